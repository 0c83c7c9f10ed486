mod common;

use std::fs;

use common::{assert_same_tree, copy_images, fixtures, json, npseg, npseg_ok, s};
use npseg::metrics::{aggregate_report, evaluate_pair, BinaryMask, ReportParams};
use npseg::raster::io::{read_gray8, read_rgb8};

#[test]
fn normalize_writes_one_output_per_input() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    copy_images(&input, 10);
    let out = tmp.path().join("out");
    let reference = fixtures().join("reference.png");
    npseg_ok(&["normalize", s(&input), "--target", s(&reference), "--method", "reinhard", "-o", s(&out)]);

    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["target"]["method"], "reinhard");
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 10);
    for f in files {
        let name = f["file"].as_str().unwrap();
        assert_eq!(f["status"], "ok");
        let a = read_rgb8(&input.join(name)).unwrap();
        let b = read_rgb8(&out.join(name)).unwrap();
        assert_eq!((a.width(), a.height()), (b.width(), b.height()));
    }
    assert_eq!(fs::read_dir(&out).unwrap().count(), 11);
}

#[test]
fn normalize_requires_a_target() {
    let tmp = tempfile::tempdir().unwrap();
    copy_images(tmp.path(), 1);
    let out = npseg(&["normalize", s(tmp.path()), "--method", "macenko"]);
    assert_eq!(out.status.code(), Some(2));
    let out = npseg(&["normalize", s(tmp.path()), "--target", "/nonexistent/ref.png"]);
    assert_eq!(out.status.code(), Some(2));
    let out = npseg(&["normalize"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn vahadane_reference_is_a_fixed_point() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("ref");
    fs::create_dir(&input).unwrap();
    let reference = fixtures().join("reference.png");
    fs::copy(&reference, input.join("reference.png")).unwrap();
    npseg_ok(&["normalize", s(&input), "--target", s(&reference), "--method", "vahadane"]);
    let out = tmp.path().join("ref-Vahadane");
    let a = read_rgb8(&reference).unwrap().to_interleaved().unwrap();
    let b = read_rgb8(&out.join("reference.png")).unwrap().to_interleaved().unwrap();
    let worst = a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y)).max().unwrap();
    assert!(worst <= 2, "largest channel change {worst}");

    // the manifest alone reproduces the run, as does the bare target
    let again = tmp.path().join("again");
    npseg_ok(&["normalize", s(&input), "--target", s(&out.join("manifest.json")), "-o", s(&again)]);
    assert_same_tree(&again, &out);
    let target = json(&out.join("manifest.json"))["target"].clone();
    let target_path = tmp.path().join("target.json");
    fs::write(&target_path, serde_json::to_string(&target).unwrap()).unwrap();
    let again2 = tmp.path().join("again2");
    npseg_ok(&["normalize", s(&input), "--target", s(&target_path), "-o", s(&again2)]);
    assert_same_tree(&again2, &out);
    let clash = npseg(&["normalize", s(&input), "--target", s(&target_path), "--method", "macenko"]);
    assert_eq!(clash.status.code(), Some(2));
}

#[test]
fn enhance_keeps_rgb_and_records_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("Macenko");
    copy_images(&input, 3);
    npseg_ok(&["enhance", s(&input), "--cutoff", "8", "--t-low", "20", "--t-high", "255", "--dump-stages"]);
    let out = tmp.path().join("Macenko-en");
    for e in fs::read_dir(&input).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap();
        let stem = name.trim_end_matches(".png");
        let src = image_rgba(&p);
        let dst = image_rgba(&out.join(name));
        for (a, b) in src.chunks(4).zip(dst.chunks(4)) {
            assert_eq!(&a[..3], &b[..3]);
            assert!(b[3] == 0 || b[3] == 255);
        }
        let side = json(&out.join(format!("{stem}.json")));
        assert_eq!(side["params"]["cutoff"], 8.0);
        assert_eq!(side["params"]["t_low"], 20.0);
        assert_eq!(side["params"]["t_high"], 255.0);
        for stage in ["spectrum", "lowpass", "laplace"] {
            assert!(out.join(format!("stages/{stem}_{stage}.png")).is_file());
        }
    }
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["cutoff"], 8.0);
    assert_eq!(manifest["complete"], true);
}

fn image_rgba(p: &std::path::Path) -> Vec<u8> {
    image::open(p).unwrap().to_rgba8().into_raw()
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    copy_images(&input, 1);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"t_low": 30.0, "cutoff": 12.0}"#).unwrap();

    let a = tmp.path().join("a");
    npseg_ok(&["enhance", s(&input), "-o", s(&a), "--config", s(&cfg)]);
    let c = json(&a.join("manifest.json"))["config"].clone();
    assert_eq!((c["t_low"].as_f64(), c["cutoff"].as_f64(), c["t_high"].as_f64()), (Some(30.0), Some(12.0), Some(255.0)));

    let b = tmp.path().join("b");
    npseg_ok(&["enhance", s(&input), "-o", s(&b), "--config", s(&cfg), "--t-low", "40"]);
    assert_eq!(json(&b.join("manifest.json"))["config"]["t_low"], 40.0);

    // a previous manifest re-runs the same configuration
    let c2 = tmp.path().join("c");
    npseg_ok(&["enhance", s(&input), "-o", s(&c2), "--config", s(&b.join("manifest.json"))]);
    assert_same_tree(&b, &c2);

    let bad = npseg(&["enhance", s(&input), "-o", s(&c2), "--t-low", "300", "--t-high", "10"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn patchify_fourfold_and_subject_split() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("patches");
    let (slides, ann) = (fixtures().join("slides"), fixtures().join("annotations"));
    npseg_ok(&["patchify", s(&slides), s(&ann), "-o", s(&out), "--augment", "--train-subjects", "S01", "--test-subjects", "S02"]);
    let m = json(&out.join("manifest.json"));
    let d = &m["dataset"];
    let patches = d["patches"].as_array().unwrap();
    let centered = patches.iter().filter(|p| p["provenance"] == "centered").count();
    assert_eq!((centered, patches.len() - centered), (6, 24));
    assert_eq!(d["subjects"]["S01"], "train");
    assert_eq!(d["subjects"]["S02"], "test");
    for p in patches {
        let split = p["split"].as_str().unwrap();
        let id = p["patch_id"].as_str().unwrap();
        assert_eq!(d["subjects"][p["subject_id"].as_str().unwrap()], split);
        let mask = read_gray8(&out.join(format!("{split}/{id}_mask.png"))).unwrap();
        assert_eq!((mask.width(), mask.height()), (256, 256));
        assert!(out.join(format!("{split}/{id}_img.png")).is_file());
    }

    let rerun = tmp.path().join("rerun");
    npseg_ok(&["patchify", s(&slides), s(&ann), "-o", s(&rerun), "--augment", "--train-subjects", "S01", "--test-subjects", "S02"]);
    assert_same_tree(&out, &rerun);

    let clash = npseg(&["patchify", s(&slides), s(&ann), "-o", s(&rerun), "--train-subjects", "S01,S02", "--test-subjects", "S02"]);
    assert_eq!(clash.status.code(), Some(2));
}

#[test]
fn evaluate_identical_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let masks = fixtures().join("masks");
    let out = tmp.path().join("eval");
    npseg_ok(&["evaluate", s(&masks), s(&masks), "-o", s(&out), "--iou-threshold", "0.5"]);
    let r = json(&out.join("report.json"));
    assert_eq!(r["dice"]["mean"], 1.0);
    assert_eq!(r["masd"]["mean"], 0.0);
    assert_eq!(r["f1"]["mean"], 1.0);
    assert_eq!(r["parameters"]["iou_threshold"], 0.5);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("100.00[100.00,100.00]"));
}

#[test]
fn evaluate_matches_library_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let (images, masks) = (fixtures().join("images"), fixtures().join("masks"));
    // the enhancement channel of each fixture patch acts as a prediction
    let en = tmp.path().join("en");
    npseg_ok(&["enhance", s(&images), "-o", s(&en)]);
    let out = tmp.path().join("eval");
    npseg_ok(&["evaluate", s(&en), s(&masks), "-o", s(&out), "--seed", "9", "--model", "M", "--normalization", "N"]);

    let params = ReportParams {
        seed: 9,
        ..ReportParams::default()
    };
    let mut per_patch = Vec::new();
    for e in fs::read_dir(&masks).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap();
        let alpha: Vec<u8> = image_rgba(&en.join(name)).chunks(4).map(|c| c[3]).collect();
        let pred = BinaryMask::new(256, 256, alpha.iter().map(|&v| v > 127).collect()).unwrap();
        let gt = BinaryMask::from_image(&read_gray8(&p).unwrap()).unwrap();
        per_patch.push(evaluate_pair(name.trim_end_matches(".png"), &pred, &gt, &params).unwrap());
    }
    let want = aggregate_report("M", "N", per_patch, &params).unwrap();
    let got: npseg::metrics::MetricReport =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(got, want);
}

#[test]
fn evaluate_reports_unpaired_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    let masks = fixtures().join("masks");
    fs::copy(masks.join("P01_0.png"), pred.join("P01_0.png")).unwrap();
    fs::copy(masks.join("P01_0.png"), gt.join("P01_0_mask.png")).unwrap();
    fs::copy(masks.join("P01_1.png"), gt.join("P01_1_mask.png")).unwrap();
    fs::copy(fixtures().join("images/P01_1.png"), gt.join("P01_1_img.png")).unwrap();
    let out = tmp.path().join("eval");
    npseg_ok(&["evaluate", s(&pred), s(&gt), "-o", s(&out)]);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["pairs"], serde_json::json!(["P01_0"]));
    assert_eq!(m["unpaired"], serde_json::json!(["ground_truth/P01_1_mask.png"]));

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let none = npseg(&["evaluate", s(&empty), s(&gt), "-o", s(&out)]);
    assert_eq!(none.status.code(), Some(1));
}

#[test]
fn subject_resampling_from_a_patch_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("patches");
    let (slides, ann) = (fixtures().join("slides"), fixtures().join("annotations"));
    npseg_ok(&["patchify", s(&slides), s(&ann), "-o", s(&out)]);
    let train = out.join("train");
    let eval = tmp.path().join("eval");
    let manifest = out.join("manifest.json");
    npseg_ok(&["evaluate", s(&train), s(&train), "-o", s(&eval), "--resample-unit", "subject", "--subjects", s(&manifest)]);
    let r = json(&eval.join("report.json"));
    assert_eq!(r["patches"].as_array().unwrap().len(), 6);
    assert!(r["patches"][0]["subject_id"].as_str().unwrap().starts_with('S'));
    let missing = npseg(&["evaluate", s(&train), s(&train), "-o", s(&eval), "--resample-unit", "subject"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn report_combines_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let masks = fixtures().join("masks");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    npseg_ok(&["evaluate", s(&masks), s(&masks), "-o", s(&a), "--model", "DynUNet", "--normalization", "Macenko"]);
    npseg_ok(&["evaluate", s(&masks), s(&masks), "-o", s(&b), "--model", "DynUNet", "--normalization", "Macenko-en"]);
    let table = tmp.path().join("table.csv");
    npseg_ok(&["report", s(&a), s(&b.join("report.json")), "-o", s(&table)]);
    let csv = fs::read_to_string(&table).unwrap();
    let rows: Vec<_> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("DynUNet,Macenko,"));
    assert!(rows[2].starts_with("DynUNet,Macenko-en,"));
    let stdout = npseg_ok(&["report", s(&a)]).stdout;
    assert!(String::from_utf8(stdout).unwrap().starts_with("model,normalization"));
}

#[test]
fn worker_override_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    copy_images(&input, 4);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    npseg_ok(&["enhance", s(&input), "-o", s(&a), "--workers", "1"]);
    npseg_ok(&["enhance", s(&input), "-o", s(&b), "--workers", "3"]);
    assert_same_tree(&a, &b);
    let bad = std::process::Command::new(env!("CARGO_BIN_EXE_npseg"))
        .args(["enhance", s(&input), "-o", s(&b)])
        .env("NPSEG_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
