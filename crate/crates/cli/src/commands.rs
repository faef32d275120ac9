use crate::config::Loaded;
use crate::error::{CliError, CliResult, ErrorKind};
use crate::report::{
    parse_report, render_summary, summarize, FidMetrics, InputDigest, IsMetrics, Report, ReportKind, RprecMetrics,
    SummaryMetrics,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use soa_bench::caption_filter::{matches_label, read_captions};
use soa_bench::detection_io::{read_detections, read_ground_truth};
use soa_bench::distribution_metrics::{
    frechet_distance, inception_score, moments, r_precision, EmbeddingPair, MetricError,
};
use soa_bench::eval_set::{build_manifest, class_frequency_ranking, ManifestError};
use soa_bench::pathway_kernel::{accumulate, render_pgm, BoxPlacement, FeatureGrid};
use soa_bench::soa_metrics::aggregate;
use soa_bench::{BBox, EvalManifest, FeatureMatrix, LabelId, LabelTable};
use std::path::{Path, PathBuf};

pub const CAPTION_LISTS_FILE: &str = "caption_lists.jsonl";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SOA_REPORT_FILE: &str = "soa_report.json";
pub const SOA_TABLE_FILE: &str = "soa_table.txt";
pub const FID_REPORT_FILE: &str = "fid_report.json";
pub const IS_REPORT_FILE: &str = "is_report.json";
pub const RPREC_REPORT_FILE: &str = "rprec_report.json";
pub const SUMMARY_REPORT_FILE: &str = "summary_report.json";
pub const SUMMARY_TABLE_FILE: &str = "summary_table.txt";

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| {
        let kind = if e.kind() == std::io::ErrorKind::NotFound {
            ErrorKind::InputMissing
        } else {
            ErrorKind::InvalidInput
        };
        CliError::new(kind, format!("cannot read input: {e}")).at(path.display())
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::internal(format!("cannot write output: {e}")).at(path.display()))
}

/// Reads a required input and records its digest.
fn required_input(
    run: &Loaded,
    key: &str,
    value: &Option<String>,
    digests: &mut Vec<InputDigest>,
) -> CliResult<(Vec<u8>, PathBuf)> {
    let (given, path) = run.require(key, value)?;
    let bytes = read_bytes(&path)?;
    digests.push(InputDigest::of_bytes(key, &given, &bytes));
    Ok((bytes, path))
}

fn label_table(run: &Loaded, digests: &mut Vec<InputDigest>) -> CliResult<LabelTable> {
    match &run.config.label_table {
        Some(_) => {
            let (bytes, path) = required_input(run, "label_table", &run.config.label_table, digests)?;
            let text = String::from_utf8(bytes).map_err(|e| CliError::input(e).at(path.display()))?;
            LabelTable::from_json_str(&text).map_err(|e| CliError::input(e).at(path.display()))
        }
        None => {
            let json = LabelTable::builtin_json();
            digests.push(InputDigest::of_bytes("label_table", "<builtin>", json.as_bytes()));
            Ok(LabelTable::builtin())
        }
    }
}

fn feature_input(
    run: &Loaded,
    key: &str,
    value: &Option<String>,
    digests: &mut Vec<InputDigest>,
) -> CliResult<FeatureMatrix> {
    let (given, path) = run.require(key, value)?;
    let ids_path = FeatureMatrix::ids_path(&path);
    digests.push(InputDigest::of_bytes(key, &given, &read_bytes(&path)?));
    digests.push(InputDigest::of_bytes(
        &format!("{key}.ids"),
        &format!("{given}.ids"),
        &read_bytes(&ids_path)?,
    ));
    FeatureMatrix::load(&path).map_err(|e| CliError::input(e).at(path.display()))
}

fn metric_error(e: MetricError) -> CliError {
    match e {
        MetricError::NumericalFailure => CliError::new(ErrorKind::NumericalFailure, e.to_string()),
        other => CliError::input(other),
    }
}

fn emit<M: Serialize>(run: &Loaded, file: &str, report: &Report<M>) -> CliResult<PathBuf> {
    let path = run.out_dir()?.join(file);
    write_file(&path, report.to_json())?;
    Ok(path)
}

#[derive(Serialize)]
struct CaptionList<'a> {
    label_id: LabelId,
    caption_ids: &'a [u64],
}

pub fn filter_captions(run: &Loaded) -> CliResult<()> {
    let mut digests = Vec::new();
    let table = label_table(run, &mut digests)?;
    let (bytes, path) = required_input(run, "captions", &run.config.captions, &mut digests)?;
    let captions = read_captions(bytes.as_slice()).map_err(|e| CliError::input(e).at(path.display()))?;

    let specs: Vec<_> = table.iter().collect();
    let lists: Vec<Vec<u64>> = specs
        .par_iter()
        .map(|spec| {
            let mut ids: Vec<u64> = captions
                .iter()
                .filter(|c| matches_label(c, spec))
                .map(|c| c.caption_id)
                .collect();
            ids.sort_unstable();
            ids
        })
        .collect();

    let mut jsonl = String::new();
    let width = specs.iter().map(|s| s.name.len()).max().unwrap_or(0);
    let mut summary = format!("{} captions\n", captions.len());
    for (spec, ids) in specs.iter().zip(&lists) {
        let line = serde_json::to_string(&CaptionList {
            label_id: spec.id,
            caption_ids: ids,
        })
        .expect("caption lists serialize");
        jsonl.push_str(&line);
        jsonl.push('\n');
        summary.push_str(&format!("{:>2}  {:<width$}  {}\n", spec.id, spec.name, ids.len()));
    }
    let out = run.out_dir()?.join(CAPTION_LISTS_FILE);
    write_file(&out, jsonl)?;
    print!("{summary}");
    if captions.is_empty() {
        return Err(CliError::new(ErrorKind::EmptyCorpus, "caption corpus is empty").at(path.display()));
    }
    Ok(())
}

pub fn build(run: &Loaded) -> CliResult<()> {
    let mut digests = Vec::new();
    let table = label_table(run, &mut digests)?;
    let (bytes, path) = required_input(run, "captions", &run.config.captions, &mut digests)?;
    let captions = read_captions(bytes.as_slice()).map_err(|e| CliError::input(e).at(path.display()))?;
    let manifest = build_manifest(&captions, &table, run.config.seed).map_err(|e| match e {
        ManifestError::CorpusEmpty => CliError::new(ErrorKind::EmptyCorpus, e.to_string()).at(path.display()),
        other => CliError::input(other),
    })?;
    let mut buf = Vec::new();
    manifest
        .write(&mut buf)
        .map_err(|e| CliError::internal(format!("cannot serialize manifest: {e}")))?;
    let out = run.out_dir()?.join(MANIFEST_FILE);
    write_file(&out, buf)?;
    let images: u64 = manifest.rows().iter().map(|r| r.n_images as u64).sum();
    println!(
        "{} rows, {} images, seed {} -> {}",
        manifest.rows().len(),
        images,
        manifest.seed(),
        out.display()
    );
    Ok(())
}

pub fn soa(run: &Loaded) -> CliResult<()> {
    let cfg = &run.config;
    let mut digests = Vec::new();
    let table = label_table(run, &mut digests)?;
    let (bytes, path) = required_input(run, "manifest", &cfg.manifest, &mut digests)?;
    let manifest = EvalManifest::read(bytes.as_slice()).map_err(|e| CliError::input(e).at(path.display()))?;
    let (bytes, path) = required_input(run, "detections", &cfg.detections, &mut digests)?;
    let detections = read_detections(bytes.as_slice()).map_err(|e| CliError::input(e).at(path.display()))?;
    let ground_truth = match &cfg.ground_truth {
        Some(_) => {
            let (bytes, path) = required_input(run, "ground_truth", &cfg.ground_truth, &mut digests)?;
            Some(read_ground_truth(bytes.as_slice()).map_err(|e| CliError::input(e).at(path.display()))?)
        }
        None => None,
    };

    let ranking = class_frequency_ranking(&table, &manifest);
    let result = aggregate(&table, &manifest, &detections, ground_truth.as_ref(), cfg.threshold, &ranking)
        .map_err(CliError::input)?;
    if result.missing_images > 0 {
        log::warn!("{} manifest images have no detections entry", result.missing_images);
    }
    let text = result.render_table();
    let report = Report::new(ReportKind::Soa, cfg, digests, result);
    let path = emit(run, SOA_REPORT_FILE, &report)?;
    write_file(&path.with_file_name(SOA_TABLE_FILE), &text)?;
    print!("{text}");
    Ok(())
}

pub fn fid(run: &Loaded) -> CliResult<()> {
    let cfg = &run.config;
    let mut digests = Vec::new();
    let a = feature_input(run, "features_a", &cfg.features_a, &mut digests)?;
    let b = feature_input(run, "features_b", &cfg.features_b, &mut digests)?;
    let (ma, mb) = rayon::join(|| moments(&a), || moments(&b));
    let fid = frechet_distance(&ma.map_err(metric_error)?, &mb.map_err(metric_error)?).map_err(metric_error)?;
    let metrics = FidMetrics {
        fid,
        rows_a: a.rows(),
        rows_b: b.rows(),
        dim: a.cols(),
    };
    emit(run, FID_REPORT_FILE, &Report::new(ReportKind::Fid, cfg, digests, metrics))?;
    println!("FID {fid:.4}");
    Ok(())
}

pub fn inception(run: &Loaded) -> CliResult<()> {
    let cfg = &run.config;
    let mut digests = Vec::new();
    let p = feature_input(run, "softmax", &cfg.softmax, &mut digests)?;
    let (mean, std) = inception_score(&p, cfg.is_splits).map_err(metric_error)?;
    let metrics = IsMetrics {
        is_mean: mean,
        is_std: std,
        splits: cfg.is_splits,
        rows: p.rows(),
        classes: p.cols(),
    };
    emit(run, IS_REPORT_FILE, &Report::new(ReportKind::Is, cfg, digests, metrics))?;
    println!("IS {mean:.4} ± {std:.4}");
    Ok(())
}

pub fn rprec(run: &Loaded) -> CliResult<()> {
    let cfg = &run.config;
    let mut digests = Vec::new();
    let images = feature_input(run, "image_embeddings", &cfg.image_embeddings, &mut digests)?;
    let captions = feature_input(run, "caption_embeddings", &cfg.caption_embeddings, &mut digests)?;
    let (n_images, n_captions) = (images.rows(), captions.rows());
    let pairs = EmbeddingPair::match_by_ids(images, captions).map_err(metric_error)?;
    let value = r_precision(&pairs, cfg.distractors, cfg.top_k, cfg.seed).map_err(metric_error)?;
    let metrics = RprecMetrics {
        r_precision: value,
        images: n_images,
        captions: n_captions,
        distractors: cfg.distractors,
        top_k: cfg.top_k,
        seed: cfg.seed,
    };
    emit(run, RPREC_REPORT_FILE, &Report::new(ReportKind::Rprec, cfg, digests, metrics))?;
    println!("R-precision {:.2}%", value * 100.0);
    Ok(())
}

/// Merges the configured reports plus any given on the command line.
pub fn report(run: &Loaded, extra: &[PathBuf]) -> CliResult<()> {
    let mut digests = Vec::new();
    let mut parsed = Vec::new();
    let configured = run.config.reports.iter().map(|given| (given.clone(), run.resolve(given)));
    let from_cli = extra.iter().map(|p| (p.display().to_string(), p.clone()));
    for (given, path) in configured.chain(from_cli) {
        let bytes = read_bytes(&path)?;
        digests.push(InputDigest::of_bytes("report", &given, &bytes));
        let text = String::from_utf8(bytes).map_err(|e| CliError::input(e).at(path.display()))?;
        let report = parse_report(&text, &path)?;
        parsed.push((path, report));
    }
    let rows = summarize(&parsed)?;
    let text = render_summary(&rows);
    let combined = Report::new(ReportKind::Combined, &run.config, digests, SummaryMetrics { rows });
    let path = emit(run, SUMMARY_REPORT_FILE, &combined)?;
    write_file(&path.with_file_name(SUMMARY_TABLE_FILE), &text)?;
    print!("{text}");
    Ok(())
}

/// Debug input for `render-pathway`: single-channel patches and their boxes.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementFile {
    height: usize,
    width: usize,
    placements: Vec<PlacementEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementEntry {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    patch: Vec<Vec<f64>>,
}

pub fn render_pathway(placements: &Path, output: &Path) -> CliResult<()> {
    let bytes = read_bytes(placements)?;
    let file: PlacementFile =
        serde_json::from_slice(&bytes).map_err(|e| CliError::input(e).at(placements.display()))?;
    let mut items = Vec::with_capacity(file.placements.len());
    for (i, entry) in file.placements.into_iter().enumerate() {
        let [x, y, w, h] = entry.bbox;
        let bbox = BBox::new(x, y, w, h)
            .map_err(|e| CliError::input(format!("placement {i}: {e}")).at(placements.display()))?;
        let ph = entry.patch.len();
        let pw = entry.patch.first().map_or(0, Vec::len);
        if ph == 0 || pw == 0 || entry.patch.iter().any(|r| r.len() != pw) {
            return Err(CliError::input(format!("placement {i}: patch must be a non-empty rectangle"))
                .at(placements.display()));
        }
        let data = entry.patch.into_iter().flatten().collect();
        let patch = FeatureGrid::new(1, ph, pw, data)
            .map_err(|e| CliError::input(format!("placement {i}: {e}")).at(placements.display()))?;
        items.push(BoxPlacement { bbox, patch });
    }
    let rho = accumulate(&items, 1, file.height, file.width).map_err(|e| CliError::input(e).at(placements.display()))?;
    write_file(output, render_pgm(&rho, 0))?;
    println!("{}x{} graymap -> {}", file.width, file.height, output.display());
    Ok(())
}
