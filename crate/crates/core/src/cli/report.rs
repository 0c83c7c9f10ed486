use std::path::PathBuf;

use clap::Args;

use crate::cli::{CliError, CliResult, EXIT_OK};
use crate::metrics::{reports_csv, MetricReport};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// report.json files, or evaluate output directories holding one.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// CSV destination; printed to stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub(crate) fn run(args: ReportArgs) -> CliResult<i32> {
    let mut reports = Vec::with_capacity(args.reports.len());
    for p in &args.reports {
        let path = if p.is_dir() { p.join("report.json") } else { p.clone() };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let r: MetricReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{} is not a metric report: {e}", path.display())))?;
        reports.push(r);
    }
    let csv = reports_csv(&reports);
    match args.output {
        Some(path) => std::fs::write(&path, csv)
            .map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}
