//! Keyword based caption filtering.
//!
//! A caption implies a label when one of the label's include phrases occurs in
//! it after every occurrence of the label's exclusion phrases has been masked
//! out. "A man eating a hot dog" therefore implies `person` and `hot_dog` but
//! not `dog`.

use crate::jsonl::{self, JsonlError};
use crate::{LabelId, NUM_LABELS};
use serde::Deserialize;
use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

const BUILTIN_TABLE: &str = include_str!("../data/label_words.json");

#[derive(Debug, thiserror::Error)]
pub enum LabelTableError {
    #[error("failed to read label table: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed label table: {0}")]
    Json(#[from] serde_json::Error),
    #[error("label id {0} is outside 0..{NUM_LABELS}")]
    IdOutOfRange(u32),
    #[error("label id {0} appears more than once")]
    DuplicateId(u32),
    #[error("label {label}: phrase {phrase:?} is empty after normalization")]
    EmptyPhrase { label: String, phrase: String },
    #[error("label {label}: include phrase {phrase:?} is listed twice")]
    DuplicateInclude { label: String, phrase: String },
    #[error("label {0} has no include phrases")]
    NoIncludePhrases(String),
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read captions: {0}")]
    Io(#[from] std::io::Error),
    #[error("captions line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("captions line {line}: caption {caption_id} has empty text")]
    EmptyText { line: usize, caption_id: u64 },
    #[error("captions line {line}: duplicate caption id {caption_id}")]
    DuplicateId { line: usize, caption_id: u64 },
}

impl From<JsonlError> for CorpusError {
    fn from(err: JsonlError) -> Self {
        match err {
            JsonlError::Io(e) => CorpusError::Io(e),
            JsonlError::Parse { line, source } => CorpusError::Parse {
                line,
                message: source.to_string(),
            },
        }
    }
}

/// Lowercases `text` and splits it at every character that is not a letter
/// or digit. Never yields empty tokens.
pub fn normalize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// A normalized token sequence from the word table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Phrase(Vec<String>);

impl Phrase {
    pub fn parse(raw: &str) -> Option<Self> {
        let tokens = normalize(raw);
        (!tokens.is_empty()).then_some(Phrase(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Start offsets of every (possibly overlapping) occurrence in `tokens`.
    /// The last phrase token also accepts its regular plural forms.
    fn occurrences<'a>(&'a self, tokens: &'a [String]) -> impl Iterator<Item = usize> + 'a {
        let n = self.0.len();
        (0..=tokens.len().saturating_sub(n))
            .filter(move |&start| tokens.len() >= n && self.matches_at(tokens, start))
    }

    fn matches_at(&self, tokens: &[String], start: usize) -> bool {
        let (last, head) = self.0.split_last().expect("phrases are nonempty");
        let window = &tokens[start..start + self.0.len()];
        head.iter().zip(window).all(|(w, t)| w == t) && word_or_plural(&window[head.len()], last)
    }
}

impl std::fmt::Display for Phrase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// `token` is `word` or one of `word+s`, `word+es`, or `word` with a
/// trailing `y` replaced by `ies`.
pub fn word_or_plural(token: &str, word: &str) -> bool {
    if token == word {
        return true;
    }
    if let Some(stem) = token.strip_prefix(word) {
        if stem == "s" || stem == "es" {
            return true;
        }
    }
    match (word.strip_suffix('y'), token.strip_suffix("ies")) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

/// One row of the label word table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpec {
    pub id: LabelId,
    pub name: String,
    pub include: Vec<Phrase>,
    pub exclude: Vec<Phrase>,
    /// Caption count printed alongside the word table for the COCO 2014
    /// validation captions.
    pub reference_caption_count: u64,
}

impl LabelSpec {
    pub fn new<I, E>(
        id: u32,
        name: &str,
        include: I,
        exclude: E,
        reference_caption_count: u64,
    ) -> Result<Self, LabelTableError>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
        E: IntoIterator,
        E::Item: AsRef<str>,
    {
        if id as usize >= NUM_LABELS {
            return Err(LabelTableError::IdOutOfRange(id));
        }
        let parse = |raw: &str| {
            Phrase::parse(raw).ok_or_else(|| LabelTableError::EmptyPhrase {
                label: name.to_string(),
                phrase: raw.to_string(),
            })
        };

        let mut include_phrases: Vec<Phrase> = Vec::new();
        for raw in include {
            let phrase = parse(raw.as_ref())?;
            if include_phrases.contains(&phrase) {
                return Err(LabelTableError::DuplicateInclude {
                    label: name.to_string(),
                    phrase: phrase.to_string(),
                });
            }
            include_phrases.push(phrase);
        }
        if include_phrases.is_empty() {
            return Err(LabelTableError::NoIncludePhrases(name.to_string()));
        }

        // "hot dog" and "hot-dog" collapse to one exclusion.
        let mut exclude_phrases: Vec<Phrase> = Vec::new();
        for raw in exclude {
            let phrase = parse(raw.as_ref())?;
            if !exclude_phrases.contains(&phrase) {
                exclude_phrases.push(phrase);
            }
        }

        Ok(LabelSpec {
            id: LabelId(id),
            name: name.to_string(),
            include: include_phrases,
            exclude: exclude_phrases,
            reference_caption_count,
        })
    }

    /// Does the already-normalized token list imply this label?
    pub fn matches_tokens(&self, tokens: &[String]) -> bool {
        let mask = exclusion_mask(tokens, self);
        self.include.iter().any(|phrase| {
            phrase
                .occurrences(tokens)
                .any(|start| !mask[start..start + phrase.len()].iter().any(|&m| m))
        })
    }
}

/// Caption tokens with the exclusion mask for one label applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedCaption {
    pub tokens: Vec<String>,
    /// `true` where a token is covered by an exclusion phrase occurrence.
    pub mask: Vec<bool>,
}

impl TokenizedCaption {
    pub fn masked_for(tokens: Vec<String>, spec: &LabelSpec) -> Self {
        let mask = exclusion_mask(&tokens, spec);
        TokenizedCaption { tokens, mask }
    }
}

fn exclusion_mask(tokens: &[String], spec: &LabelSpec) -> Vec<bool> {
    let mut mask = vec![false; tokens.len()];
    for phrase in &spec.exclude {
        for start in phrase.occurrences(tokens) {
            mask[start..start + phrase.len()].fill(true);
        }
    }
    mask
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, serde::Serialize)]
pub struct Caption {
    pub caption_id: u64,
    pub text: String,
}

impl Caption {
    pub fn new(caption_id: u64, text: impl Into<String>) -> Self {
        Caption {
            caption_id,
            text: text.into(),
        }
    }
}

pub fn matches_label(caption: &Caption, spec: &LabelSpec) -> bool {
    spec.matches_tokens(&normalize(&caption.text))
}

/// Every label in `table` implied by `caption`.
pub fn labels_for_caption(caption: &Caption, table: &LabelTable) -> BTreeSet<LabelId> {
    let tokens = normalize(&caption.text);
    table
        .iter()
        .filter(|spec| spec.matches_tokens(&tokens))
        .map(|spec| spec.id)
        .collect()
}

#[derive(Deserialize)]
struct RawLabel {
    id: u32,
    name: String,
    include: Vec<String>,
    #[serde(default)]
    exclude: Vec<String>,
    #[serde(default)]
    reference_caption_count: u64,
}

/// The label word table, ordered by label id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    labels: Vec<LabelSpec>,
}

impl LabelTable {
    pub fn new(mut labels: Vec<LabelSpec>) -> Result<Self, LabelTableError> {
        labels.sort_by_key(|l| l.id);
        for pair in labels.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(LabelTableError::DuplicateId(pair[0].id.0));
            }
        }
        Ok(LabelTable { labels })
    }

    /// The 80-label COCO table bundled with the crate.
    pub fn builtin() -> Self {
        Self::from_json_str(BUILTIN_TABLE).expect("bundled label table is valid")
    }

    /// Source JSON of [`LabelTable::builtin`].
    pub fn builtin_json() -> &'static str {
        BUILTIN_TABLE
    }

    pub fn from_json_str(json: &str) -> Result<Self, LabelTableError> {
        let raw: Vec<RawLabel> = serde_json::from_str(json)?;
        let labels = raw
            .into_iter()
            .map(|r| {
                LabelSpec::new(
                    r.id,
                    &r.name,
                    &r.include,
                    &r.exclude,
                    r.reference_caption_count,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(labels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LabelTableError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabelSpec> {
        self.labels.iter()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// All 80 COCO labels present.
    pub fn is_complete(&self) -> bool {
        self.labels.len() == NUM_LABELS
    }

    pub fn get(&self, id: LabelId) -> Option<&LabelSpec> {
        self.labels
            .binary_search_by_key(&id, |l| l.id)
            .ok()
            .map(|i| &self.labels[i])
    }

    pub fn by_name(&self, name: &str) -> Option<&LabelSpec> {
        self.labels.iter().find(|l| l.name == name)
    }

    pub fn name_of(&self, id: LabelId) -> String {
        self.get(id)
            .map(|l| l.name.clone())
            .unwrap_or_else(|| format!("label_{id}"))
    }
}

/// Parses a JSON-lines caption corpus.
pub fn read_captions(reader: impl BufRead) -> Result<Vec<Caption>, CorpusError> {
    let records: Vec<(usize, Caption)> = jsonl::read_records(reader)?;
    let mut seen = HashSet::with_capacity(records.len());
    let mut out = Vec::with_capacity(records.len());
    for (line, caption) in records {
        if caption.text.trim().is_empty() {
            return Err(CorpusError::EmptyText {
                line,
                caption_id: caption.caption_id,
            });
        }
        if !seen.insert(caption.caption_id) {
            return Err(CorpusError::DuplicateId {
                line,
                caption_id: caption.caption_id,
            });
        }
        out.push(caption);
    }
    Ok(out)
}

pub fn load_captions(path: impl AsRef<Path>) -> Result<Vec<Caption>, CorpusError> {
    read_captions(BufReader::new(File::open(path)?))
}
