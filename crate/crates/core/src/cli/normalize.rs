use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::{
    create_dir, list_images, load_config, manifest_header, output_dir, thread_pool, to_value,
    worker_count, write_json, CliError, CliResult, EXIT_FAILURE, EXIT_OK, MANIFEST,
};
use crate::raster::io::{read_rgb8, write_image};
use crate::stain::{fit_target, normalize, Method, NormalizationTarget, NormalizeStatus, StainParams};

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    /// Directory of RGB PNG/TIFF images.
    pub input: PathBuf,
    /// Reference image, a target JSON, or the manifest of an earlier run.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// reinhard, macenko, vahadane or color_deconv.
    #[arg(long)]
    pub method: Option<Method>,
    /// Output directory; defaults to `<input>-<Method>`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// JSON config, or the manifest of an earlier run; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; falls back to NPSEG_WORKERS, then the core count.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizeConfig {
    pub method: Method,
    pub stain: StainParams,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig {
            method: Method::Macenko,
            stain: StainParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct FileRecord {
    file: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

fn resolve_target(path: &Path, config: &mut NormalizeConfig, method_flag: bool) -> CliResult<NormalizationTarget> {
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read target {}: {e}", path.display())))?;
        // a manifest from an earlier run carries its target
        let bad = |e: String| CliError::Usage(format!("bad target {}: {e}", path.display()));
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if let Some(inner) = value.get_mut("target") {
            value = inner.take();
        }
        let target = NormalizationTarget::from_json(&value.to_string()).map_err(|e| bad(e.to_string()))?;
        if method_flag && target.method != config.method {
            return Err(CliError::Usage(format!(
                "--method {} disagrees with the {} target in {}",
                config.method,
                target.method,
                path.display()
            )));
        }
        config.method = target.method;
        config.stain = target.parameters.clone();
        return Ok(target);
    }
    let img = read_rgb8(path).map_err(|e| CliError::Usage(format!("cannot load target: {e}")))?;
    fit_target(&img, config.method, &config.stain).map_err(|e| CliError::Failed(format!("fitting target: {e}")))
}

fn process(src: &Path, dst: &Path, target: &NormalizationTarget) -> crate::Result<NormalizeStatus> {
    let img = read_rgb8(src)?;
    let out = normalize(&img, target)?;
    write_image(&out.image, dst)?;
    Ok(out.status)
}

pub(crate) fn run(args: NormalizeArgs) -> CliResult<i32> {
    let mut config: NormalizeConfig = load_config(args.config.as_deref())?;
    if let Some(m) = args.method {
        config.method = m;
    }
    let target_path = args
        .target
        .as_deref()
        .ok_or_else(|| CliError::Usage("--target is required (reference image or target JSON)".into()))?;
    let target = resolve_target(target_path, &mut config, args.method.is_some())?;
    let workers = worker_count(args.workers)?;
    let files = list_images(&args.input)?;
    let out = output_dir(args.output, &args.input, config.method.display_name())?;
    create_dir(&out)?;

    let manifest = |complete: bool, records: &[FileRecord]| {
        let mut m = manifest_header("normalize", complete);
        m.insert("config".into(), to_value(&config));
        m.insert("target".into(), to_value(&target));
        m.insert("files".into(), to_value(&records));
        m
    };
    write_json(&out.join(MANIFEST), &manifest(false, &[]))?;

    let pool = thread_pool(workers)?;
    let records: Vec<FileRecord> = pool.install(|| {
        files
            .par_iter()
            .map(|(name, path)| {
                let (status, message) = match process(path, &out.join(name), &target) {
                    Ok(NormalizeStatus::Normalized) => ("ok", None),
                    Ok(NormalizeStatus::Passthrough(r)) => ("passthrough", Some(r)),
                    Ok(NormalizeStatus::MeanShiftOnly(r)) => ("mean_shift_only", Some(r)),
                    Err(e) => {
                        log::error!("{name}: {e}");
                        ("error", Some(e.to_string()))
                    }
                };
                if let (true, Some(m)) = (status != "error", &message) {
                    log::warn!("{name}: {m}");
                }
                FileRecord {
                    file: name.clone(),
                    status,
                    message,
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
