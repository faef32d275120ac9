//! Semantic object accuracy.
//!
//! For every class `c` the manifest defines the set of generated images that
//! should contain an object of class `c`. A class's recall is the fraction of
//! those images in which the detector found the object. SOA-C averages the
//! recalls over classes, SOA-I pools all images, so frequent classes weigh
//! more in SOA-I.
//!
//! When ground-truth (conditioning) boxes are available, every hit image also
//! gets the best IoU between any qualifying detection and any ground-truth box
//! of the class. This is an upper bound on the localisation quality.

use crate::caption_filter::LabelTable;
use crate::detection_io::{BBox, DetectionMap, DetectionRecord, GroundTruth, GroundTruthMap};
use crate::eval_set::{EvalManifest, Ranking};
use crate::LabelId;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SoaError {
    #[error("no class has any evaluated image")]
    NoClasses,
    #[error("no evaluated images")]
    NoImages,
}

/// Intersection over union of two boxes; 0 when they do not overlap.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Best IoU over all pairs of qualifying detections of `label` and
/// ground-truth boxes of `label`. `None` if nothing qualifies or the image
/// has no ground-truth box of that class.
pub fn max_iou_for_image(
    record: &DetectionRecord,
    gt: &GroundTruth,
    label: LabelId,
    threshold: f64,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    for det in record.qualifying(label, threshold) {
        for truth in gt.boxes_of(label) {
            let v = iou(&det.bbox, truth);
            best = Some(best.map_or(v, |b| b.max(v)));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub label_id: LabelId,
    pub name: String,
    pub n_images: u64,
    pub n_hits: u64,
    /// `None` for classes without evaluated images.
    pub recall: Option<f64>,
    /// Per-image max IoU of hit images that have a ground-truth box.
    #[serde(skip)]
    pub iou_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_iou: Option<f64>,
    /// Hit images that had no ground-truth box of the class.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iou_skipped: Option<u64>,
    /// Expected images with no line in the detections file.
    pub missing_images: u64,
}

impl ClassResult {
    fn new(label_id: LabelId, name: String, hits: &[bool], iou_values: Vec<f64>) -> Self {
        let n_images = hits.len() as u64;
        let n_hits = hits.iter().filter(|&&h| h).count() as u64;
        ClassResult {
            label_id,
            name,
            n_images,
            n_hits,
            recall: (n_images > 0).then(|| n_hits as f64 / n_images as f64),
            mean_iou: mean(&iou_values),
            iou_values,
            iou_skipped: None,
            missing_images: 0,
        }
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Class-average recall over classes that have at least one image.
pub fn soa_c(results: &[ClassResult]) -> Result<f64, SoaError> {
    mean(&results.iter().filter_map(|r| r.recall).collect::<Vec<_>>()).ok_or(SoaError::NoClasses)
}

/// Image-average recall: all hits over all images.
pub fn soa_i(results: &[ClassResult]) -> Result<f64, SoaError> {
    let images: u64 = results.iter().map(|r| r.n_images).sum();
    if images == 0 {
        return Err(SoaError::NoImages);
    }
    let hits: u64 = results.iter().map(|r| r.n_hits).sum();
    Ok(hits as f64 / images as f64)
}

/// Class average of per-class mean IoU over classes that have IoU values.
pub fn soa_iou_c(results: &[ClassResult]) -> Option<f64> {
    mean(&results.iter().filter_map(|r| r.mean_iou).collect::<Vec<_>>())
}

/// Mean of all per-image max IoUs, pooled across classes.
pub fn soa_iou_i(results: &[ClassResult]) -> Option<f64> {
    mean(
        &results
            .iter()
            .flat_map(|r| r.iou_values.iter().copied())
            .collect::<Vec<_>>(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoaReport {
    pub threshold: f64,
    pub soa_c: f64,
    pub soa_i: f64,
    pub soa_c_top40: Option<f64>,
    pub soa_c_bot40: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_iou_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_iou_i: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_iou_top40: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_iou_bot40: Option<f64>,
    /// Classes with no evaluated images, left out of every average.
    pub excluded_classes: Vec<LabelId>,
    pub missing_images: u64,
    pub per_class: Vec<ClassResult>,
}

fn subset<'a>(results: &'a [ClassResult], labels: &[LabelId]) -> Vec<&'a ClassResult> {
    results.iter().filter(|r| labels.contains(&r.label_id)).collect()
}

fn class_average(results: &[&ClassResult], value: impl Fn(&ClassResult) -> Option<f64>) -> Option<f64> {
    mean(&results.iter().filter_map(|r| value(r)).collect::<Vec<_>>())
}

/// Scores every class of `table` over the images listed in `manifest`.
///
/// Images without a detections entry count as misses (and are logged).
/// IoU fields are only filled when `ground_truth` is supplied.
pub fn aggregate(
    table: &LabelTable,
    manifest: &EvalManifest,
    detections: &DetectionMap,
    ground_truth: Option<&GroundTruthMap>,
    threshold: f64,
    ranking: &Ranking,
) -> Result<SoaReport, SoaError> {
    let empty_gt = GroundTruth::default();
    let per_class: Vec<ClassResult> = table
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|spec| {
            let mut hits = Vec::new();
            let mut ious = Vec::new();
            let mut skipped = 0u64;
            let mut missing = 0u64;
            for row in manifest.rows_for(spec.id) {
                for image in 0..row.n_images {
                    let image_id = crate::eval_set::image_id(row.caption_id, image);
                    let Some(record) = detections.get(&image_id) else {
                        log::debug!("no detections for image {image_id}");
                        missing += 1;
                        hits.push(false);
                        continue;
                    };
                    let hit = record.detects(spec.id, threshold);
                    hits.push(hit);
                    if let (true, Some(gt_map)) = (hit, ground_truth) {
                        let gt = gt_map.get(&image_id).unwrap_or(&empty_gt);
                        match max_iou_for_image(record, gt, spec.id, threshold) {
                            Some(v) => ious.push(v),
                            None => skipped += 1,
                        }
                    }
                }
            }
            let mut result = ClassResult::new(spec.id, spec.name.clone(), &hits, ious);
            result.missing_images = missing;
            if ground_truth.is_some() {
                result.iou_skipped = Some(skipped);
            }
            result
        })
        .collect();

    let missing_images = per_class.iter().map(|r| r.missing_images).sum();
    if missing_images > 0 {
        log::warn!("{missing_images} expected images have no detections entry; counted as misses");
    }

    let top = subset(&per_class, ranking.top40());
    let bot = subset(&per_class, ranking.bot40());
    let with_gt = ground_truth.is_some();
    Ok(SoaReport {
        threshold,
        soa_c: soa_c(&per_class)?,
        soa_i: soa_i(&per_class)?,
        soa_c_top40: class_average(&top, |r| r.recall),
        soa_c_bot40: class_average(&bot, |r| r.recall),
        soa_iou_c: soa_iou_c(&per_class).filter(|_| with_gt),
        soa_iou_i: soa_iou_i(&per_class).filter(|_| with_gt),
        soa_iou_top40: class_average(&top, |r| r.mean_iou).filter(|_| with_gt),
        soa_iou_bot40: class_average(&bot, |r| r.mean_iou).filter(|_| with_gt),
        excluded_classes: per_class
            .iter()
            .filter(|r| r.n_images == 0)
            .map(|r| r.label_id)
            .collect(),
        missing_images,
        per_class,
    })
}

impl SoaReport {
    /// Per-label recall and IoU as an aligned text table, followed by the
    /// aggregate rows. Missing values print as `--`.
    pub fn render_table(&self) -> String {
        let opt3 = |v: Option<f64>| v.map_or_else(|| "--".to_string(), |v| format!("{v:.3}"));
        let width = self
            .per_class
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(5)
            .max("SOA-C-Bot40".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>6}  {:>6}", "Label", "Images", "Recall", "IoU");
        for r in &self.per_class {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7}  {:>6}  {:>6}",
                r.name,
                r.n_images,
                opt3(r.recall),
                opt3(r.mean_iou)
            );
        }
        let _ = writeln!(out);
        let pct = |v: Option<f64>| v.map_or_else(|| "--".to_string(), |v| format!("{:.2}", v * 100.0));
        for (name, recall, iou) in [
            ("SOA-C", Some(self.soa_c), self.soa_iou_c),
            ("SOA-I", Some(self.soa_i), self.soa_iou_i),
            ("SOA-C-Top40", self.soa_c_top40, self.soa_iou_top40),
            ("SOA-C-Bot40", self.soa_c_bot40, self.soa_iou_bot40),
        ] {
            let _ = writeln!(out, "{:<width$}  {:>7}  {:>6}  {:>6}", name, "", pct(recall), opt3(iou));
        }
        out
    }
}
