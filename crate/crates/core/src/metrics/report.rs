use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::bootstrap::{
    bootstrap_ci, bootstrap_ci_grouped, ConfidenceInterval, DEFAULT_LEVEL, DEFAULT_RESAMPLES,
};
use crate::metrics::components::Connectivity;
use crate::metrics::instance::{instance_f1, DEFAULT_IOU_THRESHOLD};
use crate::metrics::mask::{dice_score, BinaryMask};
use crate::metrics::surface::masd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleUnit {
    #[default]
    Patch,
    Subject,
}

impl FromStr for ResampleUnit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patch" => Ok(ResampleUnit::Patch),
            "subject" => Ok(ResampleUnit::Subject),
            other => Err(Error::InvalidParameter(format!(
                "resample unit must be patch or subject, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportParams {
    pub iou_threshold: f64,
    pub connectivity: Connectivity,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
    pub resample_unit: ResampleUnit,
}

impl Default for ReportParams {
    fn default() -> Self {
        ReportParams {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            connectivity: Connectivity::Eight,
            resamples: DEFAULT_RESAMPLES,
            level: DEFAULT_LEVEL,
            seed: 0,
            resample_unit: ResampleUnit::Patch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMetrics {
    pub patch_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    pub dice: f64,
    /// `None` when either mask is empty.
    pub masd: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
}

/// Dice, MASD and instance F1 of one prediction/ground-truth pair.
pub fn evaluate_pair(
    patch_id: &str,
    pred: &BinaryMask,
    gt: &BinaryMask,
    params: &ReportParams,
) -> Result<PatchMetrics> {
    let m = instance_f1(pred, gt, params.iou_threshold, params.connectivity)?;
    Ok(PatchMetrics {
        patch_id: patch_id.to_string(),
        subject_id: None,
        dice: dice_score(pred, gt)?,
        masd: masd(pred, gt)?,
        tp: m.tp,
        fp: m.fp,
        fn_: m.fn_,
        f1: m.f1(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// Patches that entered the aggregate.
    pub n: usize,
    /// Patches left out because the metric is undefined for them.
    pub excluded: usize,
}

impl MetricSummary {
    fn from_ci(ci: ConfidenceInterval, n: usize, excluded: usize) -> Self {
        MetricSummary {
            mean: ci.mean,
            lower: ci.lower,
            upper: ci.upper,
            n,
            excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Row labels of the results grid.
    pub model: String,
    pub normalization: String,
    pub parameters: ReportParams,
    pub dice: MetricSummary,
    /// `None` when no patch has a defined MASD.
    pub masd: Option<MetricSummary>,
    pub f1: MetricSummary,
    /// F1 from the TP/FP/FN totals over all patches.
    pub pooled_f1: f64,
    pub patches: Vec<PatchMetrics>,
}

fn summarize(
    values: &[f64],
    subjects: &[String],
    params: &ReportParams,
    excluded: usize,
) -> Result<MetricSummary> {
    let ci = match params.resample_unit {
        ResampleUnit::Patch => bootstrap_ci(values, params.level, params.resamples, params.seed)?,
        ResampleUnit::Subject => {
            bootstrap_ci_grouped(values, subjects, params.level, params.resamples, params.seed)?
        }
    };
    Ok(MetricSummary::from_ci(ci, values.len(), excluded))
}

/// Means and bootstrap intervals of Dice, MASD and F1 over `patches`.
/// Patches with undefined MASD are excluded from that metric only and counted.
pub fn aggregate_report(
    model: &str,
    normalization: &str,
    mut patches: Vec<PatchMetrics>,
    params: &ReportParams,
) -> Result<MetricReport> {
    if patches.is_empty() {
        return Err(Error::EmptyInput("no per-patch metrics to aggregate".into()));
    }
    if params.resample_unit == ResampleUnit::Subject {
        if let Some(p) = patches.iter().find(|p| p.subject_id.is_none()) {
            return Err(Error::UnassignedSubject(p.patch_id.clone()));
        }
    }
    patches.sort_by(|a, b| a.patch_id.cmp(&b.patch_id));
    let subject = |p: &PatchMetrics| p.subject_id.clone().unwrap_or_default();

    let dice: Vec<f64> = patches.iter().map(|p| p.dice).collect();
    let f1: Vec<f64> = patches.iter().map(|p| p.f1).collect();
    let all_subjects: Vec<String> = patches.iter().map(subject).collect();
    let (masd_values, masd_subjects): (Vec<f64>, Vec<String>) = patches
        .iter()
        .filter_map(|p| p.masd.map(|m| (m, subject(p))))
        .unzip();
    let excluded = patches.len() - masd_values.len();
    let masd = if masd_values.is_empty() {
        None
    } else {
        Some(summarize(&masd_values, &masd_subjects, params, excluded)?)
    };
    let (tp, fp, fn_) = patches
        .iter()
        .fold((0, 0, 0), |(a, b, c), p| (a + p.tp, b + p.fp, c + p.fn_));
    let denom = 2 * tp + fp + fn_;
    Ok(MetricReport {
        model: model.to_string(),
        normalization: normalization.to_string(),
        parameters: params.clone(),
        dice: summarize(&dice, &all_subjects, params, 0)?,
        masd,
        f1: summarize(&f1, &all_subjects, params, 0)?,
        pooled_f1: if denom == 0 { 1.0 } else { 2.0 * tp as f64 / denom as f64 },
        patches,
    })
}

/// `mean[lower,upper]` with two decimals.
pub fn format_cell(mean: f64, lower: f64, upper: f64) -> String {
    format!("{mean:.2}[{lower:.2},{upper:.2}]")
}

fn percent_cell(s: &MetricSummary) -> String {
    format_cell(100.0 * s.mean, 100.0 * s.lower, 100.0 * s.upper)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Results grid: one row per report, Dice and F1 in percent, MASD in pixels.
pub fn reports_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from("model,normalization,dice_pct,masd_px,f1_pct,n,masd_excluded\n");
    for r in reports {
        let masd = r
            .masd
            .as_ref()
            .map(|m| format_cell(m.mean, m.lower, m.upper))
            .unwrap_or_else(|| "undefined".into());
        let excluded = r.masd.as_ref().map_or(r.patches.len(), |m| m.excluded);
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&r.model),
            csv_field(&r.normalization),
            csv_field(&percent_cell(&r.dice)),
            csv_field(&masd),
            csv_field(&percent_cell(&r.f1)),
            r.patches.len(),
            excluded
        )
        .expect("writing to a String");
    }
    out
}
