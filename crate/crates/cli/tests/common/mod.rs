#![allow(dead_code)]

use soa_bench::detection_io::{write_detections, write_ground_truth, Detection, GroundTruthMap};
use soa_bench::{BBox, DetectionRecord, EvalManifest, GroundTruth};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const GOLDEN_FILES: &[&str] = &[
    "caption_lists.jsonl",
    "manifest.jsonl",
    "soa_report.json",
    "soa_table.txt",
    "summary_report.json",
    "summary_table.txt",
];

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_soa-bench"))
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env("SOA_BENCH_THREADS", "2")
        .output()
        .expect("binary runs")
}

pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Detector output made up from the manifest by a fixed arithmetic rule:
/// some images miss, some detect only below the threshold, some hit.
pub fn synthetic_detections(manifest: &EvalManifest) -> (Vec<DetectionRecord>, Vec<GroundTruth>) {
    let mut dets: BTreeMap<String, DetectionRecord> = BTreeMap::new();
    let mut gts: GroundTruthMap = BTreeMap::new();
    for r in manifest.image_refs() {
        let h = r.caption_id * 7 + u64::from(r.replicate) * 3 + u64::from(r.label_id.0);
        let rec = dets.entry(r.image_id.clone()).or_insert_with(|| DetectionRecord {
            image_id: r.image_id.clone(),
            detections: Vec::new(),
        });
        match h % 4 {
            0 => {}
            1 => rec.detections.push(Detection {
                label: r.label_id,
                score: 0.25,
                bbox: BBox::full(),
            }),
            _ => rec.detections.push(Detection {
                label: r.label_id,
                score: 0.5 + (h % 5) as f64 / 10.0,
                bbox: BBox::new(0.125 * (h % 3) as f64, 0.125, 0.5, 0.5).unwrap(),
            }),
        }
        if h % 7 != 0 {
            gts.entry(r.image_id.clone())
                .or_insert_with(|| GroundTruth {
                    image_id: r.image_id.clone(),
                    boxes: Vec::new(),
                })
                .boxes
                .push((r.label_id, BBox::new(0.125, 0.125, 0.5, 0.25).unwrap()));
        }
    }
    (dets.into_values().collect(), gts.into_values().collect())
}

pub const PIPELINE_CONFIG: &str = r#"model = "fixture-gan"
captions = "captions.jsonl"
manifest = "out/manifest.jsonl"
detections = "detections.jsonl"
ground_truth = "ground_truth.jsonl"
reports = ["out/soa_report.json"]
threshold = 0.5
seed = 7
out = "out"
"#;

/// filter → manifest → synthetic detections → soa → report, inside `dir`.
/// Returns the output directory.
pub fn run_pipeline(dir: &Path) -> PathBuf {
    std::fs::copy(fixtures().join("captions.jsonl"), dir.join("captions.jsonl")).unwrap();
    std::fs::write(dir.join("run.toml"), PIPELINE_CONFIG).unwrap();
    run_ok(dir, &["filter-captions", "--config", "run.toml"]);
    run_ok(dir, &["build-manifest", "--config", "run.toml"]);
    let manifest = EvalManifest::load(dir.join("out/manifest.jsonl")).unwrap();
    let (dets, gts) = synthetic_detections(&manifest);
    let mut buf = Vec::new();
    write_detections(&dets, &mut buf).unwrap();
    std::fs::write(dir.join("detections.jsonl"), buf).unwrap();
    let mut buf = Vec::new();
    write_ground_truth(&gts, &mut buf).unwrap();
    std::fs::write(dir.join("ground_truth.jsonl"), buf).unwrap();
    run_ok(dir, &["soa", "--config", "run.toml"]);
    run_ok(dir, &["report", "--config", "run.toml"]);
    dir.join("out")
}

/// Compares pipeline outputs with the checked-in golden files. With
/// `UPDATE_GOLDEN=1` the golden files are rewritten instead.
pub fn check_golden(out: &Path) -> Result<(), String> {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for name in GOLDEN_FILES {
        let actual = std::fs::read(out.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let golden_path = golden_dir().join(name);
        if update {
            std::fs::write(&golden_path, &actual).unwrap();
            continue;
        }
        let expected = std::fs::read(&golden_path).map_err(|e| format!("{name}: {e}"))?;
        if actual != expected {
            return Err(format!("{name} differs from the golden copy"));
        }
    }
    Ok(())
}
