//! Detector output and ground-truth boxes for generated images.
//!
//! Both files are JSON lines keyed by `image_id`. Boxes are `[x, y, w, h]`
//! with the top-left corner and extent given as fractions of the image size,
//! so files are independent of the generator's output resolution.

use crate::jsonl::{self, JsonlError};
use crate::LabelId;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

/// Slack allowed on `x + w <= 1` and `y + h <= 1` for rounding in exporters.
pub const BOX_EDGE_TOLERANCE: f64 = 1e-9;

/// Default detector confidence cutoff for counting a detection.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum DetectionError {
    #[error("failed to read {what}: {source}")]
    Io {
        what: &'static str,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: invalid box: {reason}")]
    InvalidBox { line: usize, reason: String },
    #[error("line {line}: unknown label {label}")]
    UnknownLabel { line: usize, label: u32 },
    #[error("line {line}: score {score} outside [0, 1]")]
    InvalidScore { line: usize, score: f64 },
}

impl DetectionError {
    fn from_jsonl(err: JsonlError, what: &'static str) -> Self {
        match err {
            JsonlError::Io(source) => DetectionError::Io { what, source },
            JsonlError::Parse { line, source } => DetectionError::Parse {
                line,
                message: source.to_string(),
            },
        }
    }
}

/// Axis-aligned box in normalized image coordinates, anchored top-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, String> {
        let b = BBox { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    /// The unit square.
    pub fn full() -> Self {
        BBox { x: 0.0, y: 0.0, w: 1.0, h: 1.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        let BBox { x, y, w, h } = *self;
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err("non-finite coordinate".into());
        }
        if x < 0.0 || y < 0.0 {
            return Err(format!("negative origin ({x}, {y})"));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(format!("non-positive extent ({w}, {h})"));
        }
        if x + w > 1.0 + BOX_EDGE_TOLERANCE || y + h > 1.0 + BOX_EDGE_TOLERANCE {
            return Err(format!("box [{x}, {y}, {w}, {h}] extends past the image"));
        }
        Ok(())
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: LabelId,
    pub score: f64,
    pub bbox: BBox,
}

/// Detector output for one generated image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionRecord {
    pub image_id: String,
    pub detections: Vec<Detection>,
}

impl DetectionRecord {
    /// Detections of `label` scoring at least `threshold`.
    pub fn qualifying(&self, label: LabelId, threshold: f64) -> impl Iterator<Item = &Detection> {
        self.detections
            .iter()
            .filter(move |d| d.label == label && d.score >= threshold)
    }

    pub fn detects(&self, label: LabelId, threshold: f64) -> bool {
        self.qualifying(label, threshold).next().is_some()
    }
}

/// 1 if `record` holds a detection of `label` with score at least
/// `threshold`, otherwise 0.
pub fn indicator(record: &DetectionRecord, label: LabelId, threshold: f64) -> u32 {
    u32::from(record.detects(label, threshold))
}

/// Ground-truth (conditioning) boxes for one generated image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub image_id: String,
    pub boxes: Vec<(LabelId, BBox)>,
}

impl GroundTruth {
    pub fn boxes_of(&self, label: LabelId) -> impl Iterator<Item = &BBox> {
        self.boxes
            .iter()
            .filter(move |(l, _)| *l == label)
            .map(|(_, b)| b)
    }
}

#[derive(Deserialize)]
struct RawDetection {
    label: u32,
    score: f64,
    #[serde(rename = "box")]
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct RawDetectionLine {
    image_id: String,
    #[serde(default)]
    detections: Vec<RawDetection>,
}

#[derive(Deserialize)]
struct RawGtBox {
    label: u32,
    #[serde(rename = "box")]
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct RawGtLine {
    image_id: String,
    #[serde(default)]
    boxes: Vec<RawGtBox>,
}

fn check_label(line: usize, label: u32) -> Result<LabelId, DetectionError> {
    let id = LabelId(label);
    if id.is_valid() {
        Ok(id)
    } else {
        Err(DetectionError::UnknownLabel { line, label })
    }
}

fn check_box(line: usize, [x, y, w, h]: [f64; 4]) -> Result<BBox, DetectionError> {
    BBox::new(x, y, w, h).map_err(|reason| DetectionError::InvalidBox { line, reason })
}

pub type DetectionMap = BTreeMap<String, DetectionRecord>;
pub type GroundTruthMap = BTreeMap<String, GroundTruth>;

/// Reads a detections file. Lines sharing an `image_id` are merged by
/// concatenating their detection lists in file order.
pub fn read_detections(reader: impl BufRead) -> Result<DetectionMap, DetectionError> {
    let lines: Vec<(usize, RawDetectionLine)> =
        jsonl::read_records(reader).map_err(|e| DetectionError::from_jsonl(e, "detections"))?;
    let mut out = DetectionMap::new();
    for (line, raw) in lines {
        let mut parsed = Vec::with_capacity(raw.detections.len());
        for d in raw.detections {
            let label = check_label(line, d.label)?;
            if !(0.0..=1.0).contains(&d.score) {
                return Err(DetectionError::InvalidScore { line, score: d.score });
            }
            let bbox = check_box(line, d.bbox)?;
            parsed.push(Detection { label, score: d.score, bbox });
        }
        out.entry(raw.image_id.clone())
            .or_insert_with(|| DetectionRecord {
                image_id: raw.image_id,
                detections: Vec::new(),
            })
            .detections
            .extend(parsed);
    }
    Ok(out)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<DetectionMap, DetectionError> {
    let file = File::open(path).map_err(|source| DetectionError::Io {
        what: "detections",
        source,
    })?;
    read_detections(BufReader::new(file))
}

pub fn read_ground_truth(reader: impl BufRead) -> Result<GroundTruthMap, DetectionError> {
    let lines: Vec<(usize, RawGtLine)> =
        jsonl::read_records(reader).map_err(|e| DetectionError::from_jsonl(e, "ground truth"))?;
    let mut out = GroundTruthMap::new();
    for (line, raw) in lines {
        let mut parsed = Vec::with_capacity(raw.boxes.len());
        for b in raw.boxes {
            parsed.push((check_label(line, b.label)?, check_box(line, b.bbox)?));
        }
        out.entry(raw.image_id.clone())
            .or_insert_with(|| GroundTruth {
                image_id: raw.image_id,
                boxes: Vec::new(),
            })
            .boxes
            .extend(parsed);
    }
    Ok(out)
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruthMap, DetectionError> {
    let file = File::open(path).map_err(|source| DetectionError::Io {
        what: "ground truth",
        source,
    })?;
    read_ground_truth(BufReader::new(file))
}

/// Formats a real as a plain decimal carrying at least nine significant
/// digits. The shortest round-trip representation is padded with trailing
/// zeros, so parsing the result gives back exactly `v`.
pub fn format_real(v: f64) -> String {
    let mut s = format!("{v}");
    let significant = s
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count();
    if significant < 9 {
        if !s.contains('.') {
            s.push('.');
        }
        s.extend(std::iter::repeat_n('0', 9 - significant));
    }
    s
}

fn write_box(out: &mut String, b: BBox) {
    let parts: Vec<String> = b.to_array().into_iter().map(format_real).collect();
    out.push('[');
    out.push_str(&parts.join(","));
    out.push(']');
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Writes `records` in canonical form: one line per image, sorted by
/// `image_id`, reals via [`format_real`].
pub fn write_detections<'a>(
    records: impl IntoIterator<Item = &'a DetectionRecord>,
    mut writer: impl Write,
) -> io::Result<()> {
    let mut sorted: Vec<&DetectionRecord> = records.into_iter().collect();
    sorted.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    for record in sorted {
        let mut line = format!("{{\"image_id\":{},\"detections\":[", json_string(&record.image_id));
        for (i, d) in record.detections.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!(
                "{{\"label\":{},\"score\":{},\"box\":",
                d.label,
                format_real(d.score)
            ));
            write_box(&mut line, d.bbox);
            line.push('}');
        }
        line.push_str("]}\n");
        writer.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_ground_truth<'a>(
    records: impl IntoIterator<Item = &'a GroundTruth>,
    mut writer: impl Write,
) -> io::Result<()> {
    let mut sorted: Vec<&GroundTruth> = records.into_iter().collect();
    sorted.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    for record in sorted {
        let mut line = format!("{{\"image_id\":{},\"boxes\":[", json_string(&record.image_id));
        for (i, (label, bbox)) in record.boxes.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{{\"label\":{label},\"box\":"));
            write_box(&mut line, *bbox);
            line.push('}');
        }
        line.push_str("]}\n");
        writer.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(dets: &[(u32, f64)]) -> DetectionRecord {
        DetectionRecord {
            image_id: "1_0".into(),
            detections: dets
                .iter()
                .map(|&(l, s)| Detection {
                    label: LabelId(l),
                    score: s,
                    bbox: BBox::full(),
                })
                .collect(),
        }
    }

    #[test]
    fn empty_file_is_empty_map() {
        assert!(read_detections("".as_bytes()).unwrap().is_empty());
        assert!(read_ground_truth("\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn box_past_edge_is_rejected() {
        let text = r#"{"image_id":"a","detections":[{"label":1,"score":0.5,"box":[0.3,0,0.9,0.5]}]}"#;
        let err = read_detections(text.as_bytes()).unwrap_err();
        assert!(matches!(err, DetectionError::InvalidBox { line: 1, .. }), "{err}");
        // within tolerance is fine
        let text = r#"{"image_id":"a","detections":[{"label":1,"score":0.5,"box":[0.5,0,0.5000000001,0.5]}]}"#;
        assert!(read_detections(text.as_bytes()).is_ok());
    }

    #[test]
    fn label_score_and_syntax_errors() {
        let text = "\n{\"image_id\":\"a\",\"detections\":[{\"label\":80,\"score\":0.5,\"box\":[0,0,1,1]}]}";
        assert!(matches!(
            read_detections(text.as_bytes()),
            Err(DetectionError::UnknownLabel { line: 2, label: 80 })
        ));
        let text = r#"{"image_id":"a","detections":[{"label":3,"score":1.5,"box":[0,0,1,1]}]}"#;
        assert!(matches!(
            read_detections(text.as_bytes()),
            Err(DetectionError::InvalidScore { line: 1, .. })
        ));
        assert!(matches!(
            read_detections("{\"image_id\":".as_bytes()),
            Err(DetectionError::Parse { line: 1, .. })
        ));
        let text = r#"{"image_id":"a","boxes":[{"label":3,"box":[0,0,0,1]}]}"#;
        assert!(matches!(
            read_ground_truth(text.as_bytes()),
            Err(DetectionError::InvalidBox { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_lines_merge() {
        let text = concat!(
            r#"{"image_id":"7_1","detections":[{"label":16,"score":0.9,"box":[0,0,0.5,0.5]}]}"#,
            "\n",
            r#"{"image_id":"7_1","detections":[{"label":0,"score":0.2,"box":[0.5,0.5,0.5,0.5]}]}"#,
            "\n"
        );
        let map = read_detections(text.as_bytes()).unwrap();
        assert_eq!(map.len(), 1);
        let rec = &map["7_1"];
        assert_eq!(rec.detections.len(), 2);
        assert_eq!(rec.detections[0].label, LabelId(16));
        assert_eq!(rec.detections[1].label, LabelId(0));
    }

    #[test]
    fn indicator_examples() {
        let dog = LabelId(16);
        let cat = LabelId(15);
        let r = record(&[(16, 0.9)]);
        assert_eq!(indicator(&r, dog, 0.5), 1);
        assert_eq!(indicator(&r, cat, 0.5), 0);
        let r = record(&[(16, 0.4)]);
        assert_eq!(indicator(&r, dog, 0.5), 0);
        assert_eq!(indicator(&r, dog, 0.3), 1);
        // score equal to the threshold counts
        assert_eq!(indicator(&r, dog, 0.4), 1);
    }

    #[test]
    fn format_real_pads_to_nine_digits() {
        assert_eq!(format_real(0.5), "0.500000000");
        assert_eq!(format_real(1.0), "1.00000000");
        assert_eq!(format_real(0.0), "0.000000000");
        assert_eq!(format_real(0.123456789012), "0.123456789012");
        assert_eq!(format_real(0.001), "0.00100000000");
        for v in [0.1, 1.0 / 3.0, 0.25, 1e-7, 0.999] {
            assert_eq!(format_real(v).parse::<f64>().unwrap(), v);
        }
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..0.9f64, 0.0..0.9f64, 0.01..1.0f64, 0.01..1.0f64).prop_map(|(x, y, w, h)| BBox {
            x,
            y,
            w: w.min(1.0 - x),
            h: h.min(1.0 - y),
        })
    }

    fn arb_map() -> impl Strategy<Value = DetectionMap> {
        prop::collection::vec(
            (
                0u32..20,
                prop::collection::vec((0u32..80, 0.0..=1.0f64, arb_box()), 0..4),
            ),
            0..10,
        )
        .prop_map(|lines| {
            let mut map = DetectionMap::new();
            for (img, dets) in lines {
                let id = format!("{img}_0");
                map.entry(id.clone())
                    .or_insert_with(|| DetectionRecord { image_id: id, detections: vec![] })
                    .detections
                    .extend(dets.into_iter().map(|(l, score, bbox)| Detection {
                        label: LabelId(l),
                        score,
                        bbox,
                    }));
            }
            map
        })
    }

    proptest! {
        #[test]
        fn canonical_form_is_a_fixed_point(map in arb_map()) {
            let mut first = Vec::new();
            write_detections(map.values(), &mut first).unwrap();
            let reloaded = read_detections(first.as_slice()).unwrap();
            prop_assert_eq!(&reloaded, &map);
            let mut second = Vec::new();
            write_detections(reloaded.values(), &mut second).unwrap();
            prop_assert_eq!(first, second);
        }

        #[test]
        fn indicator_monotone_in_threshold(
            scores in prop::collection::vec(0.0..=1.0f64, 0..6),
            t1 in 0.0..=1.0f64,
            t2 in 0.0..=1.0f64,
        ) {
            let r = record(&scores.iter().map(|&s| (16, s)).collect::<Vec<_>>());
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(indicator(&r, LabelId(16), lo) >= indicator(&r, LabelId(16), hi));
        }
    }
}
