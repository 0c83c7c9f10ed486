//! Segmentation evaluation: Dice, mean absolute surface distance, instance
//! F1 under IoU matching, and percentile bootstrap intervals.

mod bootstrap;
mod components;
mod instance;
mod mask;
mod report;
mod surface;

pub use bootstrap::{
    bootstrap_ci, bootstrap_ci_grouped, resample_rng, ConfidenceInterval, DEFAULT_LEVEL,
    DEFAULT_RESAMPLES,
};
pub use components::{connected_components, Connectivity, LabeledComponents};
pub use instance::{instance_f1, MatchResult, MatchedPair, DEFAULT_IOU_THRESHOLD};
pub use mask::{dice_score, BinaryMask, FOREGROUND_THRESHOLD};
pub use report::{
    aggregate_report, evaluate_pair, format_cell, reports_csv, MetricReport, MetricSummary,
    PatchMetrics, ReportParams, ResampleUnit,
};
pub use surface::{masd, surface_points};
