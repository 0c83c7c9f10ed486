//! Batch front end: `normalize`, `enhance`, `patchify`, `evaluate` and
//! `report` over directories of images.
//!
//! Every subcommand resolves its settings as defaults, then the JSON file
//! given with `--config`, then command-line flags, and records the resolved
//! settings in the manifest of its output directory. Manifests are written
//! once with `"complete": false` before any work starts and rewritten with
//! `"complete": true` at the end, so an interrupted run is recognizable.
//! They contain no timestamps or absolute paths: running a command twice on
//! the same inputs produces byte-identical output trees.
//!
//! Exit codes: 0 success, 1 processing error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Error;
use crate::raster::io::is_image_path;

mod enhance;
mod evaluate;
mod normalize;
mod patchify;
mod report;

pub use enhance::EnhanceConfig;
pub use evaluate::EvaluateConfig;
pub use normalize::NormalizeConfig;
pub use patchify::PatchifyConfig;

/// Environment variable that overrides the default worker count.
pub const WORKERS_ENV: &str = "NPSEG_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "npseg", version, about = "Plaque histopathology preprocessing and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stain-normalize every image of a directory to a reference.
    Normalize(normalize::NormalizeArgs),
    /// Append the frequency-domain enhancement channel to every image.
    Enhance(enhance::EnhanceArgs),
    /// Cut annotated slides into image/mask patch pairs with a subject split.
    Patchify(patchify::PatchifyArgs),
    /// Score predicted masks against ground truth.
    Evaluate(evaluate::EvaluateArgs),
    /// Combine several evaluation reports into one CSV table.
    Report(report::ReportArgs),
}

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failed(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    /// Errors caused by what the user asked for are usage errors; the rest
    /// happened while processing data.
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::InvalidThreshold(_)
            | Error::OverlappingSplit(_)
            | Error::UnassignedSubject(_) => CliError::Usage(e.to_string()),
            e => CliError::Failed(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Normalize(a) => normalize::run(a),
        Command::Enhance(a) => enhance::run(a),
        Command::Patchify(a) => patchify::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Report(a) => report::run(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("npseg: {e}");
            e.exit_code()
        }
    }
}

/// Loads the settings overlay. A manifest written by an earlier run is
/// accepted too: its `config` member is used.
pub(crate) fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<C> {
    let Some(path) = path else {
        return Ok(C::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {} is not JSON: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value)
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

/// Worker count: the flag, then the environment, then the machine.
pub(crate) fn worker_count(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(CliError::Usage("--workers must be at least 1".into()))
        } else {
            Ok(n)
        };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn thread_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Failed(format!("cannot start worker pool: {e}")))
}

fn file_name(path: &Path) -> CliResult<String> {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Usage(format!("{} has no UTF-8 file name", path.display())))
}

/// Image files directly inside `dir`, sorted by name.
pub(crate) fn list_images(dir: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Failed(format!("listing {}: {e}", dir.display())))?
            .path();
        if path.is_file() && is_image_path(&path) {
            out.push((file_name(&path)?, path));
        }
    }
    out.sort();
    Ok(out)
}

/// File name without its extension.
pub(crate) fn stem(name: &str) -> &str {
    name.rsplit_once('.').map_or(name, |(s, _)| s)
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))
}

/// Pretty JSON with a trailing newline.
pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Failed(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

/// `name` inside `dir` when given, else a sibling of `input` named
/// `<input>-<suffix>`.
pub(crate) fn output_dir(flag: Option<PathBuf>, input: &Path, suffix: &str) -> CliResult<PathBuf> {
    if let Some(dir) = flag {
        return Ok(dir);
    }
    let base = input
        .components()
        .next_back()
        .and_then(|c| c.as_os_str().to_str())
        .ok_or_else(|| CliError::Usage(format!("cannot derive an output name from {}", input.display())))?;
    Ok(input.with_file_name(format!("{base}-{suffix}")))
}

pub(crate) const MANIFEST: &str = "manifest.json";

pub(crate) fn manifest_header(command: &str, complete: bool) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), command.into());
    m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    m.insert("complete".into(), complete.into());
    m
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("manifest types serialize to JSON")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_and_output_names() {
        assert_eq!(stem("a.b.png"), "a.b");
        assert_eq!(stem("noext"), "noext");
        let out = output_dir(None, Path::new("/data/Macenko"), "en").unwrap();
        assert_eq!(out, PathBuf::from("/data/Macenko-en"));
        let out = output_dir(None, Path::new("data/Macenko/"), "en").unwrap();
        assert_eq!(out, PathBuf::from("data/Macenko-en"));
    }

    #[test]
    fn config_overlay_accepts_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, r#"{"command": "enhance", "config": {"t_low": 30.0}}"#).unwrap();
        let c: EnhanceConfig = load_config(Some(&p)).unwrap();
        assert_eq!(c.t_low, 30.0);
        assert_eq!(c.t_high, crate::enhance::DEFAULT_T_HIGH);
        fs::write(&p, "not json").unwrap();
        assert!(matches!(load_config::<EnhanceConfig>(Some(&p)), Err(CliError::Usage(_))));
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(Error::OverlappingSplit("s".into())).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::from(Error::EmptySamples).exit_code(), EXIT_FAILURE);
        assert!(worker_count(Some(0)).is_err());
        assert_eq!(worker_count(Some(3)).unwrap(), 3);
    }
}
