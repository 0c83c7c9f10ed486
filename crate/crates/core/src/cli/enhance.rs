use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::{
    create_dir, list_images, load_config, manifest_header, output_dir, stem, thread_pool, to_value,
    worker_count, write_json, CliError, CliResult, EXIT_FAILURE, EXIT_OK, MANIFEST,
};
use crate::enhance::{
    default_cutoff, enhance_stages, EnhanceParams, DEFAULT_T_HIGH, DEFAULT_T_LOW,
};
use crate::raster::io::{normalized_gray, read_rgb8, write_image};
use crate::raster::{merge_channels, split_channels, ColorSpace, Kernel2D, PlanarImage};

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Directory of RGB PNG/TIFF images.
    pub input: PathBuf,
    /// Output directory; defaults to `<input>-en`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Low-pass radius in frequency bins; defaults to a quarter of the
    /// shorter image side.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Lower edge of the kept response band (default 20).
    #[arg(long)]
    pub t_low: Option<f64>,
    /// Upper edge of the kept response band (default 255).
    #[arg(long)]
    pub t_high: Option<f64>,
    /// Also write the spectrum, low-passed and kernel-response planes.
    #[arg(long)]
    pub dump_stages: bool,
    /// JSON config, or the manifest of an earlier run; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; falls back to NPSEG_WORKERS, then the core count.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhanceConfig {
    /// `None` picks the per-image default.
    pub cutoff: Option<f64>,
    pub t_low: f64,
    pub t_high: f64,
    pub kernel: Kernel2D,
    pub dump_stages: bool,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig {
            cutoff: None,
            t_low: DEFAULT_T_LOW,
            t_high: DEFAULT_T_HIGH,
            kernel: Kernel2D::directional_laplacian(),
            dump_stages: false,
        }
    }
}

impl EnhanceConfig {
    fn params_for(&self, width: usize, height: usize) -> EnhanceParams {
        EnhanceParams {
            cutoff: self.cutoff.unwrap_or_else(|| default_cutoff(width, height)),
            t_low: self.t_low,
            t_high: self.t_high,
            kernel: self.kernel.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    source: &'a str,
    width: usize,
    height: usize,
    params: &'a EnhanceParams,
}

#[derive(Debug, Clone, Serialize)]
struct FileRecord {
    file: String,
    output: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

fn dump_stages(dir: &Path, stem: &str, stages: &crate::enhance::EnhanceStages) -> crate::Result<()> {
    let (w, h) = (stages.width, stages.height);
    let log_mag: Vec<f64> = stages.spectrum.magnitude().iter().map(|m| m.ln_1p()).collect();
    write_image(&normalized_gray(w, h, &log_mag)?, &dir.join(format!("{stem}_spectrum.png")))?;
    write_image(&normalized_gray(w, h, &stages.smoothed)?, &dir.join(format!("{stem}_lowpass.png")))?;
    write_image(&normalized_gray(w, h, &stages.response)?, &dir.join(format!("{stem}_laplace.png")))?;
    Ok(())
}

fn process(name: &str, src: &Path, out: &Path, config: &EnhanceConfig) -> crate::Result<()> {
    let img = read_rgb8(src)?;
    let params = config.params_for(img.width(), img.height());
    params.validate()?;
    let [r, g, b] = split_channels(&img)?;
    let stages = enhance_stages(&g, &params)?;
    let t = PlanarImage::gray_u8(stages.width, stages.height, stages.binary.clone())?;
    let enhanced = merge_channels(&[r, g, b, t], ColorSpace::RgbaEnhanced)?;
    let stem = stem(name);
    write_image(&enhanced, &out.join(format!("{stem}.png")))?;
    let sidecar = Sidecar {
        source: name,
        width: img.width(),
        height: img.height(),
        params: &params,
    };
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    std::fs::write(out.join(format!("{stem}.json")), text)
        .map_err(|e| crate::Error::io(out.join(format!("{stem}.json")), e))?;
    if config.dump_stages {
        dump_stages(&out.join("stages"), stem, &stages)?;
    }
    Ok(())
}

pub(crate) fn run(args: EnhanceArgs) -> CliResult<i32> {
    let mut config: EnhanceConfig = load_config(args.config.as_deref())?;
    if args.cutoff.is_some() {
        config.cutoff = args.cutoff;
    }
    if let Some(t) = args.t_low {
        config.t_low = t;
    }
    if let Some(t) = args.t_high {
        config.t_high = t;
    }
    config.dump_stages |= args.dump_stages;
    // check the shared parameters once, with any cutoff
    config.params_for(4, 4).validate()?;

    let workers = worker_count(args.workers)?;
    let files = list_images(&args.input)?;
    let mut outputs: BTreeMap<String, &str> = BTreeMap::new();
    for (name, _) in &files {
        if let Some(other) = outputs.insert(format!("{}.png", stem(name)), name) {
            return Err(CliError::Usage(format!("{other} and {name} map to the same output")));
        }
    }
    let out = output_dir(args.output, &args.input, "en")?;
    create_dir(&out)?;
    if config.dump_stages {
        create_dir(&out.join("stages"))?;
    }

    let manifest = |complete: bool, records: &[FileRecord]| {
        let mut m = manifest_header("enhance", complete);
        m.insert("config".into(), to_value(&config));
        m.insert("files".into(), to_value(&records));
        m
    };
    write_json(&out.join(MANIFEST), &manifest(false, &[]))?;

    let pool = thread_pool(workers)?;
    let records: Vec<FileRecord> = pool.install(|| {
        files
            .par_iter()
            .map(|(name, path)| {
                let result = process(name, path, &out, &config);
                if let Err(e) = &result {
                    log::error!("{name}: {e}");
                }
                FileRecord {
                    file: name.clone(),
                    output: format!("{}.png", stem(name)),
                    status: if result.is_ok() { "ok" } else { "error" },
                    message: result.err().map(|e| e.to_string()),
                }
            })
            .collect()
    });
    write_json(&out.join(MANIFEST), &manifest(true, &records))?;
    let failed = records.iter().filter(|r| r.status == "error").count();
    if failed > 0 {
        eprintln!("npseg: {failed} of {} images failed", records.len());
        return Ok(EXIT_FAILURE);
    }
    Ok(EXIT_OK)
}
