//! Evaluation manifests: which captions are rendered for which label, and how
//! many images each caption produces.

use crate::caption_filter::{normalize, Caption, LabelTable};
use crate::jsonl::{self, JsonlError};
use crate::{LabelId, NUM_LABELS};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

pub const MANIFEST_SCHEMA: &str = "soa-manifest/1";

/// Person captions are subsampled to this many.
pub const PERSON_CAPTION_CAP: usize = 30_000;

/// Images generated per caption for every label except person.
pub const IMAGES_PER_CAPTION: u32 = 3;

/// Images generated per sampled person caption.
pub const IMAGES_PER_PERSON_CAPTION: u32 = 1;

/// Size of the most/least common label groups.
pub const FREQUENCY_GROUP_SIZE: usize = 40;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("caption corpus is empty")]
    CorpusEmpty,
    #[error("label table has {found} labels, expected {NUM_LABELS}")]
    LabelTableIncomplete { found: usize },
    #[error("failed to read manifest: {0}")]
    Io(#[from] io::Error),
    #[error("manifest line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("manifest header missing")]
    MissingHeader,
    #[error("manifest schema {found:?} is not {MANIFEST_SCHEMA:?}")]
    SchemaMismatch { found: String },
    #[error("manifest line {line}: duplicate row for label {label_id}, caption {caption_id}")]
    DuplicateRow {
        line: usize,
        label_id: LabelId,
        caption_id: u64,
    },
    #[error("manifest line {line}: n_images must be positive")]
    ZeroImages { line: usize },
}

impl From<JsonlError> for ManifestError {
    fn from(err: JsonlError) -> Self {
        match err {
            JsonlError::Io(e) => ManifestError::Io(e),
            JsonlError::Parse { line, source } => ManifestError::Parse {
                line,
                message: source.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestRow {
    pub label_id: LabelId,
    pub caption_id: u64,
    pub n_images: u32,
}

/// One image the generator is expected to produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedImageRef {
    pub image_id: String,
    pub caption_id: u64,
    pub label_id: LabelId,
    pub replicate: u32,
}

/// File name stem of the `replicate`-th image generated from a caption.
pub fn image_id(caption_id: u64, replicate: u32) -> String {
    format!("{caption_id}_{replicate}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalManifest {
    rows: Vec<ManifestRow>,
    seed: u64,
}

#[derive(Debug, Clone)]
pub struct ManifestOptions {
    pub person_label: String,
    pub person_cap: usize,
    pub images_per_caption: u32,
    pub images_per_person_caption: u32,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        ManifestOptions {
            person_label: "person".to_string(),
            person_cap: PERSON_CAPTION_CAP,
            images_per_caption: IMAGES_PER_CAPTION,
            images_per_person_caption: IMAGES_PER_PERSON_CAPTION,
        }
    }
}

pub fn build_manifest(
    corpus: &[Caption],
    table: &LabelTable,
    seed: u64,
) -> Result<EvalManifest, ManifestError> {
    build_manifest_with(corpus, table, seed, &ManifestOptions::default())
}

/// Every caption matching a label becomes one row for that label. Person
/// captions are shuffled with a ChaCha8 stream seeded by `seed` (in ascending
/// caption id order first, so corpus order does not matter) and the first
/// `person_cap` are kept.
pub fn build_manifest_with(
    corpus: &[Caption],
    table: &LabelTable,
    seed: u64,
    options: &ManifestOptions,
) -> Result<EvalManifest, ManifestError> {
    if corpus.is_empty() {
        return Err(ManifestError::CorpusEmpty);
    }
    if !table.is_complete() {
        return Err(ManifestError::LabelTableIncomplete { found: table.len() });
    }

    let mut tokenized: Vec<(u64, Vec<String>)> = corpus
        .par_iter()
        .map(|c| (c.caption_id, normalize(&c.text)))
        .collect();
    tokenized.sort_by_key(|(id, _)| *id);

    let specs: Vec<_> = table.iter().collect();
    let per_label: Vec<Vec<ManifestRow>> = specs
        .par_iter()
        .map(|spec| {
            let mut ids: Vec<u64> = tokenized
                .iter()
                .filter(|(_, tokens)| spec.matches_tokens(tokens))
                .map(|(id, _)| *id)
                .collect();
            let n_images = if spec.name == options.person_label {
                if ids.len() > options.person_cap {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    ids.shuffle(&mut rng);
                    ids.truncate(options.person_cap);
                    ids.sort_unstable();
                }
                options.images_per_person_caption
            } else {
                options.images_per_caption
            };
            ids.into_iter()
                .map(|caption_id| ManifestRow {
                    label_id: spec.id,
                    caption_id,
                    n_images,
                })
                .collect()
        })
        .collect();

    let rows = per_label.into_iter().flatten().collect();
    Ok(EvalManifest { rows, seed })
}

impl EvalManifest {
    /// Builds a manifest from arbitrary rows, sorting them canonically.
    pub fn from_rows(mut rows: Vec<ManifestRow>, seed: u64) -> Self {
        rows.sort();
        EvalManifest { rows, seed }
    }

    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows_for(&self, label: LabelId) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.label_id == label)
    }

    /// Number of captions (rows) per label. Labels without rows are absent.
    pub fn caption_counts(&self) -> BTreeMap<LabelId, u64> {
        let mut counts = BTreeMap::new();
        for row in &self.rows {
            *counts.entry(row.label_id).or_insert(0) += 1;
        }
        counts
    }

    pub fn image_refs(&self) -> impl Iterator<Item = GeneratedImageRef> + '_ {
        self.rows.iter().flat_map(|row| {
            (0..row.n_images).map(move |replicate| GeneratedImageRef {
                image_id: image_id(row.caption_id, replicate),
                caption_id: row.caption_id,
                label_id: row.label_id,
                replicate,
            })
        })
    }

    pub fn write(&self, mut writer: impl Write) -> io::Result<()> {
        let header = serde_json::json!({ "schema": MANIFEST_SCHEMA, "seed": self.seed });
        writeln!(writer, "{header}")?;
        for row in &self.rows {
            writeln!(writer, "{}", serde_json::to_string(row)?)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut file = io::BufWriter::new(File::create(path)?);
        self.write(&mut file)?;
        file.flush()
    }

    pub fn read(reader: impl BufRead) -> Result<Self, ManifestError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Line {
            Header { schema: String, seed: u64 },
            Row(ManifestRow),
        }

        let mut lines = jsonl::read_records::<Line>(reader)?.into_iter();
        let seed = match lines.next() {
            Some((_, Line::Header { schema, seed })) => {
                if schema != MANIFEST_SCHEMA {
                    return Err(ManifestError::SchemaMismatch { found: schema });
                }
                seed
            }
            _ => return Err(ManifestError::MissingHeader),
        };
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        for (line, record) in lines {
            let row = match record {
                Line::Row(row) => row,
                Line::Header { .. } => {
                    return Err(ManifestError::Parse {
                        line,
                        message: "unexpected second header".into(),
                    })
                }
            };
            if row.n_images == 0 {
                return Err(ManifestError::ZeroImages { line });
            }
            if !seen.insert((row.label_id, row.caption_id)) {
                return Err(ManifestError::DuplicateRow {
                    line,
                    label_id: row.label_id,
                    caption_id: row.caption_id,
                });
            }
            rows.push(row);
        }
        Ok(Self::from_rows(rows, seed))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

/// Labels ordered from most to least common.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    order: Vec<LabelId>,
}

impl Ranking {
    /// Sorts by descending count, ties by ascending label id.
    pub fn from_counts(counts: impl IntoIterator<Item = (LabelId, u64)>) -> Self {
        let mut pairs: Vec<(LabelId, u64)> = counts.into_iter().collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Ranking {
            order: pairs.into_iter().map(|(id, _)| id).collect(),
        }
    }

    pub fn order(&self) -> &[LabelId] {
        &self.order
    }

    pub fn top(&self, k: usize) -> &[LabelId] {
        &self.order[..k.min(self.order.len())]
    }

    pub fn bottom(&self, k: usize) -> &[LabelId] {
        &self.order[self.order.len().saturating_sub(k)..]
    }

    pub fn top40(&self) -> &[LabelId] {
        self.top(FREQUENCY_GROUP_SIZE)
    }

    pub fn bot40(&self) -> &[LabelId] {
        self.bottom(FREQUENCY_GROUP_SIZE)
    }
}

/// Ranks every label in `table` by its number of manifest captions.
pub fn class_frequency_ranking(table: &LabelTable, manifest: &EvalManifest) -> Ranking {
    let counts = manifest.caption_counts();
    Ranking::from_counts(
        table
            .iter()
            .map(|spec| (spec.id, counts.get(&spec.id).copied().unwrap_or(0))),
    )
}

/// Ranks labels by the caption counts recorded in the word table itself.
pub fn reference_ranking(table: &LabelTable) -> Ranking {
    Ranking::from_counts(table.iter().map(|s| (s.id, s.reference_caption_count)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caption_filter::matches_label;

    fn corpus(texts: &[&str]) -> Vec<Caption> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Caption::new(i as u64 * 10 + 3, *t))
            .collect()
    }

    #[test]
    fn non_person_labels_get_three_images() {
        let table = LabelTable::builtin();
        let zebra = table.by_name("zebra").unwrap().id;
        let texts = ["a zebra", "two zebras", "zebra herd", "a lone zebra", "zebras!", "a cat"];
        let m = build_manifest(&corpus(&texts), &table, 7).unwrap();
        let rows: Vec<_> = m.rows_for(zebra).collect();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.n_images == 3));
    }

    #[test]
    fn person_rows_are_capped_and_single_image() {
        let table = LabelTable::builtin();
        let person = table.by_name("person").unwrap().id;
        let texts: Vec<Caption> = (0..60_123u64)
            .map(|i| Caption::new(i, format!("a man number {i}")))
            .chain(std::iter::once(Caption::new(1_000_000, "a dog")))
            .collect();
        let m = build_manifest(&texts, &table, 11).unwrap();
        let rows: Vec<_> = m.rows_for(person).collect();
        assert_eq!(rows.len(), PERSON_CAPTION_CAP);
        assert!(rows.iter().all(|r| r.n_images == 1));
        assert!(rows.windows(2).all(|w| w[0].caption_id < w[1].caption_id));

        let other = build_manifest(&texts, &table, 12).unwrap();
        assert_ne!(m, other, "a different seed draws a different sample");
    }

    #[test]
    fn small_person_set_is_kept_whole() {
        let table = LabelTable::builtin();
        let m = build_manifest(&corpus(&["a woman", "children playing"]), &table, 0).unwrap();
        assert_eq!(m.rows().len(), 2);
        assert!(m.rows().iter().all(|r| r.n_images == 1));
    }

    #[test]
    fn same_seed_same_bytes() {
        let table = LabelTable::builtin();
        let texts: Vec<Caption> = (0..40u64)
            .map(|i| Caption::new(i, format!("a person and a dog {i}")))
            .collect();
        let opts = ManifestOptions {
            person_cap: 10,
            ..Default::default()
        };
        let a = build_manifest_with(&texts, &table, 99, &opts).unwrap();
        let mut reversed = texts.clone();
        reversed.reverse();
        let b = build_manifest_with(&reversed, &table, 99, &opts).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write(&mut ba).unwrap();
        b.write(&mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn rows_are_sorted_and_covered() {
        let table = LabelTable::builtin();
        let c = corpus(&["a man with a dog", "a cat on a bed", "a dog on a bed", "hot dog"]);
        let m = build_manifest(&c, &table, 1).unwrap();
        assert!(m.rows().windows(2).all(|w| (w[0].label_id, w[0].caption_id) < (w[1].label_id, w[1].caption_id)));
        for row in m.rows() {
            let cap = c.iter().find(|x| x.caption_id == row.caption_id).unwrap();
            assert!(matches_label(cap, table.get(row.label_id).unwrap()));
        }
    }

    #[test]
    fn build_errors() {
        let table = LabelTable::builtin();
        assert!(matches!(build_manifest(&[], &table, 0), Err(ManifestError::CorpusEmpty)));
        let partial = LabelTable::new(table.iter().take(79).cloned().collect()).unwrap();
        assert!(matches!(
            build_manifest(&corpus(&["a dog"]), &partial, 0),
            Err(ManifestError::LabelTableIncomplete { found: 79 })
        ));
    }

    #[test]
    fn manifest_file_round_trip() {
        let table = LabelTable::builtin();
        let m = build_manifest(&corpus(&["a man with a dog", "a cat"]), &table, 5).unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"schema\":\"soa-manifest/1\",\"seed\":5}\n"));
        assert_eq!(EvalManifest::read(buf.as_slice()).unwrap(), m);

        assert!(matches!(
            EvalManifest::read("{\"label_id\":1,\"caption_id\":2,\"n_images\":3}\n".as_bytes()),
            Err(ManifestError::MissingHeader)
        ));
        assert!(matches!(
            EvalManifest::read("{\"schema\":\"x\",\"seed\":1}\n".as_bytes()),
            Err(ManifestError::SchemaMismatch { .. })
        ));
        let dup = "{\"schema\":\"soa-manifest/1\",\"seed\":1}\n{\"label_id\":1,\"caption_id\":2,\"n_images\":3}\n{\"label_id\":1,\"caption_id\":2,\"n_images\":3}\n";
        assert!(matches!(
            EvalManifest::read(dup.as_bytes()),
            Err(ManifestError::DuplicateRow { line: 3, .. })
        ));
    }

    #[test]
    fn image_refs_follow_naming_rule() {
        let m = EvalManifest::from_rows(
            vec![ManifestRow { label_id: LabelId(16), caption_id: 42, n_images: 3 }],
            0,
        );
        let ids: Vec<String> = m.image_refs().map(|r| r.image_id).collect();
        assert_eq!(ids, ["42_0", "42_1", "42_2"]);
    }

    #[test]
    fn ranking_tie_rule() {
        let (a, b, c) = (LabelId(5), LabelId(2), LabelId(9));
        let r = Ranking::from_counts([(a, 10), (b, 5), (c, 5)]);
        assert_eq!(r.order(), [a, b, c]);
        let r = Ranking::from_counts([(a, 10), (LabelId(9), 5), (LabelId(2), 5)]);
        assert_eq!(r.order(), [a, LabelId(2), LabelId(9)]);
    }

    #[test]
    fn reference_ranking_extremes() {
        let table = LabelTable::builtin();
        let r = reference_ranking(&table);
        assert_eq!(table.name_of(r.order()[0]), "person");
        assert_eq!(table.name_of(*r.order().last().unwrap()), "hair_drier");
        assert_eq!(r.top40().len(), 40);
        assert_eq!(r.bot40().len(), 40);
        let mut all: Vec<LabelId> = r.top40().iter().chain(r.bot40()).copied().collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 80);
    }
}
