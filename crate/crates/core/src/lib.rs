//! Semantic object accuracy evaluation for text-to-image models.
//!
//! The crate is organised along the evaluation pipeline:
//!
//! * [`caption_filter`] decides which COCO labels a caption implies, using the
//!   label word table shipped in `data/label_words.json`.
//! * [`eval_set`] turns a caption corpus into an evaluation manifest.
//! * [`detection_io`] loads detector output and ground-truth boxes.
//! * [`soa_metrics`] computes SOA-C, SOA-I and the IoU variants.
//! * [`distribution_metrics`] computes FID, Inception Score and R-precision
//!   from exported feature matrices ([`features`] holds the `FMX1` format).
//! * [`pathway_kernel`] is a reference implementation of the object pathway
//!   feature placement used by object-pathway generators.

pub mod caption_filter;
pub mod detection_io;
pub mod distribution_metrics;
pub mod eval_set;
pub mod features;
mod jsonl;
pub mod pathway_kernel;
pub mod soa_metrics;

pub use caption_filter::{Caption, LabelSpec, LabelTable};
pub use detection_io::{BBox, DetectionRecord, GroundTruth};
pub use eval_set::EvalManifest;
pub use features::FeatureMatrix;
pub use soa_metrics::SoaReport;

use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of object classes in the COCO detection label set.
pub const NUM_LABELS: usize = 80;

/// A COCO class index in `0..80`, in the detector's output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(pub u32);

impl LabelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_valid(self) -> bool {
        self.index() < NUM_LABELS
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
