use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::{
    create_dir, list_images, load_config, manifest_header, stem, thread_pool, to_value,
    worker_count, write_json, CliError, CliResult, EXIT_OK, MANIFEST,
};
use crate::metrics::{
    aggregate_report, evaluate_pair, reports_csv, BinaryMask, Connectivity, PatchMetrics,
    ReportParams, ResampleUnit,
};
use crate::raster::io::read_mask8;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted masks. For 4-channel images the alpha plane is used.
    pub predictions: PathBuf,
    /// Ground-truth masks; `*_img.*` files are ignored.
    pub ground_truth: PathBuf,
    /// Output directory for report.json, report.csv and the manifest.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Instances match when their IoU exceeds this (default 0.1).
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    /// 4 or 8.
    #[arg(long)]
    pub connectivity: Option<Connectivity>,
    /// Bootstrap resamples (default 1000).
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Confidence level of the intervals (default 0.95).
    #[arg(long)]
    pub level: Option<f64>,
    /// Bootstrap seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// patch or subject.
    #[arg(long)]
    pub resample_unit: Option<ResampleUnit>,
    /// JSON map from patch id to subject, or a patchify manifest.
    #[arg(long)]
    pub subjects: Option<PathBuf>,
    /// Model label of the report row.
    #[arg(long)]
    pub model: Option<String>,
    /// Normalization label of the report row.
    #[arg(long)]
    pub normalization: Option<String>,
    /// JSON config, or the manifest of an earlier run; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; falls back to NPSEG_WORKERS, then the core count.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    pub model: String,
    pub normalization: String,
    pub report: ReportParams,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            model: "unnamed".into(),
            normalization: "none".into(),
            report: ReportParams::default(),
        }
    }
}

/// Pairing key of a mask file: its stem without a `_mask` suffix.
/// `None` for the `_img` halves of patch pairs.
fn pairing_key(name: &str) -> Option<&str> {
    let s = stem(name);
    if s.ends_with("_img") {
        return None;
    }
    Some(s.strip_suffix("_mask").unwrap_or(s))
}

fn keyed(dir: &Path) -> CliResult<BTreeMap<String, (String, PathBuf)>> {
    let mut out = BTreeMap::new();
    for (name, path) in list_images(dir)? {
        let Some(key) = pairing_key(&name) else { continue };
        if let Some((other, _)) = out.insert(key.to_string(), (name.clone(), path)) {
            return Err(CliError::Usage(format!(
                "{other} and {name} in {} pair under the same id",
                dir.display()
            )));
        }
    }
    Ok(out)
}

/// Patch id → subject from a plain map or from a patchify manifest.
fn load_subjects(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{} is not JSON: {e}", path.display())))?;
    if let Some(patches) = value.pointer("/dataset/patches").and_then(|p| p.as_array()) {
        return Ok(patches
            .iter()
            .filter_map(|p| Some((p["patch_id"].as_str()?.to_string(), p["subject_id"].as_str()?.to_string())))
            .collect());
    }
    serde_json::from_value(value).map_err(|e| {
        CliError::Usage(format!("{} is neither a subject map nor a patch manifest: {e}", path.display()))
    })
}

fn score(id: &str, pred: &Path, gt: &Path, params: &ReportParams) -> crate::Result<PatchMetrics> {
    let p = BinaryMask::from_image(&read_mask8(pred)?)?;
    let g = BinaryMask::from_image(&read_mask8(gt)?)?;
    evaluate_pair(id, &p, &g, params)
}

pub(crate) fn run(args: EvaluateArgs) -> CliResult<i32> {
    let mut config: EvaluateConfig = load_config(args.config.as_deref())?;
    let r = &mut config.report;
    if let Some(v) = args.iou_threshold {
        r.iou_threshold = v;
    }
    if let Some(v) = args.connectivity {
        r.connectivity = v;
    }
    if let Some(v) = args.resamples {
        r.resamples = v;
    }
    if let Some(v) = args.level {
        r.level = v;
    }
    if let Some(v) = args.seed {
        r.seed = v;
    }
    if let Some(v) = args.resample_unit {
        r.resample_unit = v;
    }
    if let Some(v) = args.model {
        config.model = v;
    }
    if let Some(v) = args.normalization {
        config.normalization = v;
    }
    let subjects = args.subjects.as_deref().map(load_subjects).transpose()?;
    if config.report.resample_unit == ResampleUnit::Subject && subjects.is_none() {
        return Err(CliError::Usage("--resample-unit subject needs --subjects".into()));
    }
    let workers = worker_count(args.workers)?;

    let preds = keyed(&args.predictions)?;
    let gts = keyed(&args.ground_truth)?;
    let unpaired: Vec<String> = preds
        .iter()
        .filter(|(k, _)| !gts.contains_key(*k))
        .map(|(_, (n, _))| format!("prediction/{n}"))
        .chain(
            gts.iter()
                .filter(|(k, _)| !preds.contains_key(*k))
                .map(|(_, (n, _))| format!("ground_truth/{n}")),
        )
        .collect();
    for u in &unpaired {
        log::warn!("unpaired file {u}");
    }
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> = preds
        .iter()
        .filter_map(|(k, (_, p))| gts.get(k).map(|(_, g)| (k, p, g)))
        .collect();
    if pairs.is_empty() {
        return Err(CliError::Failed(format!(
            "no prediction pairs with a ground-truth mask ({} unpaired files)",
            unpaired.len()
        )));
    }

    let out = args.output;
    create_dir(&out)?;
    let manifest = |complete: bool| {
        let mut m = manifest_header("evaluate", complete);
        m.insert("config".into(), to_value(&config));
        m.insert("pairs".into(), to_value(&pairs.iter().map(|p| p.0).collect::<Vec<_>>()));
        m.insert("unpaired".into(), to_value(&unpaired));
        m
    };
    write_json(&out.join(MANIFEST), &manifest(false))?;

    let pool = thread_pool(workers)?;
    let scored: Vec<crate::Result<PatchMetrics>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(id, p, g)| score(id, p, g, &config.report))
            .collect()
    });
    let mut patches = Vec::with_capacity(scored.len());
    for ((id, _, _), m) in pairs.iter().zip(scored) {
        let mut m = m.map_err(|e| CliError::Failed(format!("{id}: {e}")))?;
        if let Some(map) = &subjects {
            m.subject_id = map.get(*id).cloned();
        }
        patches.push(m);
    }
    let report = pool.install(|| aggregate_report(&config.model, &config.normalization, patches, &config.report))?;
    write_json(&out.join("report.json"), &report)?;
    std::fs::write(out.join("report.csv"), reports_csv(std::slice::from_ref(&report)))
        .map_err(|e| CliError::Failed(format!("cannot write report.csv: {e}")))?;
    write_json(&out.join(MANIFEST), &manifest(true))?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys() {
        assert_eq!(pairing_key("abc_mask.png"), Some("abc"));
        assert_eq!(pairing_key("abc.png"), Some("abc"));
        assert_eq!(pairing_key("abc_img.png"), None);
    }
}
