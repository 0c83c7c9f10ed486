use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::{
    create_dir, list_images, load_config, manifest_header, stem, thread_pool, to_value,
    worker_count, write_json, CliError, CliResult, EXIT_OK, MANIFEST,
};
use crate::patch::{
    parse_annotations_xml, split_by_subject, AnnotationSet, ExtractionParams, PatchEntry,
    PatchSource, Split, CORNER_MARGIN, PATCH_SIZE,
};
use crate::raster::io::{read_rgb8, write_image};

#[derive(Debug, Args)]
pub struct PatchifyArgs {
    /// Directory of slide images named `<name>.png` / `.tif`.
    pub slides: PathBuf,
    /// Directory of annotation files named `<name>.xml`.
    pub annotations: PathBuf,
    /// Output directory for the train/ and test/ patch folders and the manifest.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Add the four corner translations of every patch.
    #[arg(long)]
    pub augment: bool,
    /// Comma-separated subject ids; subjects not listed for test go here.
    #[arg(long, value_delimiter = ',')]
    pub train_subjects: Option<Vec<String>>,
    /// Comma-separated subject ids; subjects not listed for train go here.
    #[arg(long, value_delimiter = ',')]
    pub test_subjects: Option<Vec<String>>,
    /// Patch side in pixels (default 256).
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Recorded in the manifest; extraction itself draws no random numbers.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON config, or the manifest of an earlier run; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; falls back to NPSEG_WORKERS, then the core count.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchifyConfig {
    pub patch_size: usize,
    pub augment: bool,
    pub seed: u64,
    pub train_subjects: Option<BTreeSet<String>>,
    pub test_subjects: Option<BTreeSet<String>>,
}

impl Default for PatchifyConfig {
    fn default() -> Self {
        PatchifyConfig {
            patch_size: PATCH_SIZE,
            augment: false,
            seed: 0,
            train_subjects: None,
            test_subjects: None,
        }
    }
}

struct SlidePair {
    slide_file: String,
    slide: PathBuf,
    set: AnnotationSet,
}

/// Pairs slides with annotation files of the same stem and parses the XML.
fn pair_inputs(slides: &Path, annotations: &Path, warnings: &mut Vec<String>) -> CliResult<Vec<SlidePair>> {
    let images = list_images(slides)?;
    let mut by_stem: BTreeMap<String, (String, PathBuf)> = BTreeMap::new();
    for (name, path) in images {
        if let Some((other, _)) = by_stem.insert(stem(&name).to_string(), (name.clone(), path)) {
            return Err(CliError::Usage(format!("slides {other} and {name} share a name")));
        }
    }
    let entries = std::fs::read_dir(annotations).map_err(|e| {
        CliError::Usage(format!("cannot read directory {}: {e}", annotations.display()))
    })?;
    let mut xml_files = BTreeMap::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Failed(format!("listing {}: {e}", annotations.display())))?
            .path();
        let is_xml = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("xml"));
        if let (true, Some(s)) = (is_xml, path.file_stem().and_then(|s| s.to_str())) {
            xml_files.insert(s.to_string(), path.clone());
        }
    }
    let mut pairs = Vec::new();
    let mut subjects = BTreeMap::new();
    for (s, xml) in &xml_files {
        let Some((slide_file, slide)) = by_stem.remove(s) else {
            warnings.push(format!("annotation file {s}.xml has no slide"));
            continue;
        };
        let bytes = std::fs::read(xml)
            .map_err(|e| CliError::Failed(format!("cannot read {}: {e}", xml.display())))?;
        let parsed = parse_annotations_xml(&bytes)
            .map_err(|e| CliError::Failed(format!("{}: {e}", xml.display())))?;
        warnings.extend(parsed.warnings.into_iter().map(|w| format!("{s}.xml: {w}")));
        if let Some(other) = subjects.insert(parsed.set.subject_id.clone(), s.clone()) {
            return Err(CliError::Usage(format!(
                "{other}.xml and {s}.xml both annotate subject {}",
                parsed.set.subject_id
            )));
        }
        pairs.push(SlidePair {
            slide_file,
            slide,
            set: parsed.set,
        });
    }
    warnings.extend(by_stem.keys().map(|s| format!("slide {s} has no annotation file")));
    Ok(pairs)
}

/// Train and test subject sets. A missing list is filled with every subject
/// the other list does not name; with neither list all subjects train.
fn resolve_split(
    config: &PatchifyConfig,
    subjects: &BTreeSet<String>,
) -> CliResult<(BTreeSet<String>, BTreeSet<String>)> {
    let rest = |other: &BTreeSet<String>| subjects.difference(other).cloned().collect::<BTreeSet<_>>();
    let (train, test) = match (&config.train_subjects, &config.test_subjects) {
        (Some(tr), Some(te)) => (tr.clone(), te.clone()),
        (Some(tr), None) => (tr.clone(), rest(tr)),
        (None, Some(te)) => (rest(te), te.clone()),
        (None, None) => (subjects.clone(), BTreeSet::new()),
    };
    if let Some(s) = train.intersection(&test).next() {
        return Err(CliError::Usage(format!("subject {s} is listed for both train and test")));
    }
    if let Some(s) = subjects.iter().find(|s| !train.contains(*s) && !test.contains(*s)) {
        return Err(CliError::Usage(format!("subject {s} is in neither split")));
    }
    Ok((train, test))
}

/// Extracts one slide's patches and writes them under `out/<split>/`.
fn process(pair: &SlidePair, split: Split, out: &Path, config: &PatchifyConfig) -> crate::Result<(Vec<PatchEntry>, Vec<String>)> {
    let slide = read_rgb8(&pair.slide)?;
    let source = PatchSource::new(&slide, &pair.set, config.patch_size)?;
    let extraction = source.extract_all(config.augment)?;
    let dir = out.join(split.name());
    let mut entries = Vec::with_capacity(extraction.records.len());
    for r in &extraction.records {
        write_image(&r.image, &dir.join(format!("{}_img.png", r.patch_id)))?;
        write_image(&r.mask, &dir.join(format!("{}_mask.png", r.patch_id)))?;
        entries.push(r.entry());
    }
    Ok((entries, extraction.warnings))
}

pub(crate) fn run(args: PatchifyArgs) -> CliResult<i32> {
    let mut config: PatchifyConfig = load_config(args.config.as_deref())?;
    config.augment |= args.augment;
    if let Some(p) = args.patch_size {
        config.patch_size = p;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(t) = args.train_subjects {
        config.train_subjects = Some(t.into_iter().collect());
    }
    if let Some(t) = args.test_subjects {
        config.test_subjects = Some(t.into_iter().collect());
    }
    if config.patch_size <= 2 * CORNER_MARGIN {
        return Err(CliError::Usage(format!(
            "patch size {} leaves no room inside the {CORNER_MARGIN}px corner margin",
            config.patch_size
        )));
    }
    let workers = worker_count(args.workers)?;

    let mut warnings = Vec::new();
    let pairs = pair_inputs(&args.slides, &args.annotations, &mut warnings)?;
    if pairs.is_empty() {
        return Err(CliError::Failed("no slide has a matching annotation file".into()));
    }
    let subjects: BTreeSet<String> = pairs.iter().map(|p| p.set.subject_id.clone()).collect();
    let (train, test) = resolve_split(&config, &subjects)?;
    let split_of = |s: &str| if test.contains(s) { Split::Test } else { Split::Train };

    let out = args.output;
    create_dir(&out.join(Split::Train.name()))?;
    create_dir(&out.join(Split::Test.name()))?;
    let manifest = |complete: bool, dataset: serde_json::Value, warnings: &[String]| {
        let mut m = manifest_header("patchify", complete);
        m.insert("config".into(), to_value(&config));
        m.insert("dataset".into(), dataset);
        m.insert("warnings".into(), to_value(&warnings));
        m
    };
    write_json(&out.join(MANIFEST), &manifest(false, serde_json::Value::Null, &[]))?;

    let pool = thread_pool(workers)?;
    let results: Vec<crate::Result<(Vec<PatchEntry>, Vec<String>)>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|p| process(p, split_of(&p.set.subject_id), &out, &config))
            .collect()
    });
    let mut entries = Vec::new();
    for (pair, r) in pairs.iter().zip(results) {
        let (e, w) = r.map_err(|e| CliError::Failed(format!("{}: {e}", pair.slide_file)))?;
        entries.extend(e);
        warnings.extend(w);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let params = ExtractionParams {
        patch_size: config.patch_size,
        augment: config.augment,
        corner_margin: CORNER_MARGIN,
        seed: config.seed,
    };
    let dataset = split_by_subject(&entries, &train, &test, params)?;
    write_json(&out.join(MANIFEST), &manifest(true, to_value(&dataset), &warnings))?;
    Ok(EXIT_OK)
}
