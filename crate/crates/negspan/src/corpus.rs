//! Annotated corpora: CoNLL parsing and writing, the span lattice, and
//! entity-sparsity statistics.
//!
//! Spans are stored 0-based with inclusive ends. Only the IOB2 tag scheme is
//! accepted (`B-X` opens an entity, `I-X` continues one, `O` is outside);
//! extra columns between the token and the final tag are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: expected at least token and tag columns, got {got:?}")]
    MalformedLine { line: usize, got: String },
    #[error("line {line}: invalid tag {tag:?} (expected B-X, I-X or O)")]
    InvalidTag { line: usize, tag: String },
    #[error("line {line}: tag {tag:?} does not continue an open entity of the same type")]
    DanglingInside { line: usize, tag: String },
    #[error("sentence has no tokens")]
    EmptySentence,
    #[error("token {token:?} is empty or contains whitespace")]
    BadToken { token: String },
    #[error("span {start}..={end} out of bounds for sentence of length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("spans {a} and {b} overlap")]
    OverlappingSpans { a: EntitySpan, b: EntitySpan },
    #[error("spans {a} and {b} share the same token range")]
    DuplicateRange { a: EntitySpan, b: EntitySpan },
    #[error("label {0:?} is reserved for non-entity spans")]
    ReservedLabel(String),
    #[error("duplicate entity label {0:?}")]
    DuplicateLabel(String),
    #[error("label set needs at least one entity label")]
    NoEntityLabels,
}

/// A tokenized sentence. Never empty; tokens never contain whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new<I, T>(tokens: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        for t in &tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(CorpusError::BadToken { token: t.clone() });
            }
        }
        Ok(Self { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }
}

/// A labeled token span, inclusive on both ends. The label is always an
/// entity label, never `"O"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Self { start, end, label: label.into() }
    }

    /// The `(start, end)` token range, ignoring the label.
    pub fn range(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Token ranges intersect.
    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for EntitySpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.start, self.end, self.label)
    }
}

/// A sentence with its visible annotations and, for synthetic data, the
/// entities that were masked away. The two sets never share a token range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    sentence: Sentence,
    visible: BTreeSet<EntitySpan>,
    hidden: BTreeSet<EntitySpan>,
}

impl AnnotatedSentence {
    pub fn new<V, H>(sentence: Sentence, visible: V, hidden: H) -> Result<Self, CorpusError>
    where
        V: IntoIterator<Item = EntitySpan>,
        H: IntoIterator<Item = EntitySpan>,
    {
        let visible: BTreeSet<EntitySpan> = visible.into_iter().collect();
        let hidden: BTreeSet<EntitySpan> = hidden.into_iter().collect();
        let n = sentence.len();
        let mut seen: BTreeMap<(usize, usize), &EntitySpan> = BTreeMap::new();
        for span in visible.iter().chain(hidden.iter()) {
            if span.label == LabelSet::O {
                return Err(CorpusError::ReservedLabel(span.label.clone()));
            }
            if span.start > span.end || span.end >= n {
                return Err(CorpusError::SpanOutOfBounds { start: span.start, end: span.end, len: n });
            }
            if let Some(prev) = seen.insert(span.range(), span) {
                return Err(CorpusError::DuplicateRange { a: prev.clone(), b: span.clone() });
            }
        }
        Ok(Self { sentence, visible, hidden })
    }

    /// A fully visible sentence (no masked entities).
    pub fn labeled(sentence: Sentence, visible: impl IntoIterator<Item = EntitySpan>) -> Result<Self, CorpusError> {
        Self::new(sentence, visible, [])
    }

    pub fn sentence(&self) -> &Sentence {
        &self.sentence
    }

    pub fn len(&self) -> usize {
        self.sentence.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn visible(&self) -> &BTreeSet<EntitySpan> {
        &self.visible
    }

    pub fn hidden(&self) -> &BTreeSet<EntitySpan> {
        &self.hidden
    }

    /// Visible and hidden entities together: the ground truth.
    pub fn gold(&self) -> BTreeSet<EntitySpan> {
        self.visible.union(&self.hidden).cloned().collect()
    }

    pub fn entity_count(&self) -> usize {
        self.visible.len() + self.hidden.len()
    }
}

/// The label inventory. `"O"` always sits at index 0; entity labels follow
/// in a fixed order, so a probability vector indexed by this set is
/// unambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    entity_labels: Vec<String>,
}

impl LabelSet {
    pub const O: &'static str = "O";
    pub const O_INDEX: usize = 0;

    pub fn new<I, T>(entity_labels: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let entity_labels: Vec<String> = entity_labels.into_iter().map(Into::into).collect();
        if entity_labels.is_empty() {
            return Err(CorpusError::NoEntityLabels);
        }
        let mut seen = BTreeSet::new();
        for l in &entity_labels {
            if l == Self::O {
                return Err(CorpusError::ReservedLabel(l.clone()));
            }
            if l.is_empty() || l.chars().any(char::is_whitespace) {
                return Err(CorpusError::BadToken { token: l.clone() });
            }
            if !seen.insert(l.clone()) {
                return Err(CorpusError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { entity_labels })
    }

    /// Collect every entity label occurring in the dataset (visible or
    /// hidden), sorted for determinism.
    pub fn from_sentences(dataset: &[AnnotatedSentence]) -> Result<Self, CorpusError> {
        let labels: BTreeSet<String> = dataset
            .iter()
            .flat_map(|s| s.visible().iter().chain(s.hidden().iter()))
            .map(|e| e.label.clone())
            .collect();
        Self::new(labels)
    }

    /// Total number of labels including `"O"`.
    pub fn len(&self) -> usize {
        self.entity_labels.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entity_labels(&self) -> &[String] {
        &self.entity_labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        if label == Self::O {
            return Some(Self::O_INDEX);
        }
        self.entity_labels.iter().position(|l| l == label).map(|i| i + 1)
    }

    /// Panics if `index >= len()`.
    pub fn label(&self, index: usize) -> &str {
        if index == Self::O_INDEX {
            Self::O
        } else {
            &self.entity_labels[index - 1]
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        std::iter::once(Self::O).chain(self.entity_labels.iter().map(String::as_str))
    }
}

/// Parse CoNLL-style text: one token per line, whitespace-separated columns,
/// IOB2 tag in the last column, blank lines between sentences. Hidden sets
/// come back empty.
pub fn parse_conll(text: &str) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let mut sentences = Vec::new();
    // (token, tag, line number)
    let mut rows: Vec<(String, String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !rows.is_empty() {
                sentences.push(decode_sentence(&rows)?);
                rows.clear();
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 2 {
            return Err(CorpusError::MalformedLine { line: line_no, got: line.to_string() });
        }
        rows.push((cols[0].to_string(), cols[cols.len() - 1].to_string(), line_no));
    }
    if !rows.is_empty() {
        sentences.push(decode_sentence(&rows)?);
    }
    Ok(sentences)
}

fn decode_sentence(rows: &[(String, String, usize)]) -> Result<AnnotatedSentence, CorpusError> {
    let mut spans: Vec<EntitySpan> = Vec::new();
    // currently open (label, start)
    let mut open: Option<(String, usize)> = None;
    for (pos, (_, tag, line)) in rows.iter().enumerate() {
        if tag == LabelSet::O {
            if let Some((label, start)) = open.take() {
                spans.push(EntitySpan::new(start, pos - 1, label));
            }
            continue;
        }
        if let Some(label) = tag.strip_prefix("B-") {
            if label.is_empty() {
                return Err(CorpusError::InvalidTag { line: *line, tag: tag.clone() });
            }
            if let Some((l, start)) = open.take() {
                spans.push(EntitySpan::new(start, pos - 1, l));
            }
            open = Some((label.to_string(), pos));
        } else if let Some(label) = tag.strip_prefix("I-") {
            if label.is_empty() {
                return Err(CorpusError::InvalidTag { line: *line, tag: tag.clone() });
            }
            match &open {
                Some((l, _)) if l == label => {}
                _ => return Err(CorpusError::DanglingInside { line: *line, tag: tag.clone() }),
            }
        } else {
            return Err(CorpusError::InvalidTag { line: *line, tag: tag.clone() });
        }
    }
    if let Some((label, start)) = open {
        spans.push(EntitySpan::new(start, rows.len() - 1, label));
    }
    let sentence = Sentence::new(rows.iter().map(|(tok, _, _)| tok.clone()))?;
    AnnotatedSentence::labeled(sentence, spans)
}

/// Encode a span set as IOB2 tags, one per token. Rejects overlapping spans,
/// naming the colliding pair. Round-trips with [`parse_conll`].
pub fn to_iob(sentence: &Sentence, spans: &BTreeSet<EntitySpan>) -> Result<Vec<String>, CorpusError> {
    let n = sentence.len();
    let ordered: Vec<&EntitySpan> = spans.iter().collect();
    for span in &ordered {
        if span.start > span.end || span.end >= n {
            return Err(CorpusError::SpanOutOfBounds { start: span.start, end: span.end, len: n });
        }
    }
    // BTreeSet order is start-major, so one adjacent check suffices.
    for pair in ordered.windows(2) {
        if pair[0].overlaps(pair[1]) {
            return Err(CorpusError::OverlappingSpans { a: pair[0].clone(), b: pair[1].clone() });
        }
    }
    let mut tags = vec![LabelSet::O.to_string(); n];
    for span in ordered {
        tags[span.start] = format!("B-{}", span.label);
        for slot in tags.iter_mut().take(span.end + 1).skip(span.start + 1) {
            *slot = format!("I-{}", span.label);
        }
    }
    Ok(tags)
}

/// Serialize sentences back to two-column CoNLL text (visible spans only;
/// hidden spans belong in the sidecar, see the corruption module).
pub fn to_conll_string(dataset: &[AnnotatedSentence]) -> Result<String, CorpusError> {
    let mut out = String::new();
    for (i, s) in dataset.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let tags = to_iob(s.sentence(), s.visible())?;
        for (token, tag) in s.sentence().tokens().iter().zip(&tags) {
            out.push_str(token);
            out.push(' ');
            out.push_str(tag);
            out.push('\n');
        }
    }
    Ok(out)
}

/// All `(start, end)` pairs with `0 <= start <= end < n`, optionally capped
/// at `max_len` tokens. Start-major order; `n*(n+1)/2` pairs when uncapped.
pub fn enumerate_spans(n: usize, max_len: Option<usize>) -> Vec<(usize, usize)> {
    let cap = max_len.unwrap_or(n);
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for start in 0..n {
        for end in start..n {
            if end - start + 1 > cap {
                break;
            }
            out.push((start, end));
        }
    }
    out
}

/// Per-length entity statistics for one row of the sparsity table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityRow {
    pub length: usize,
    pub support: usize,
    pub mean_entities: f64,
    pub variance: f64,
    pub sqrt_length: f64,
    /// Fraction of sentences whose total entity count exceeds sqrt(length).
    pub violation_fraction: f64,
}

/// Group sentences by length and report mean/variance of total entity counts
/// (visible plus hidden). Lengths with fewer than `min_support` sentences are
/// dropped; rows come back sorted by length.
pub fn sparsity_report(dataset: &[AnnotatedSentence], min_support: usize) -> Vec<SparsityRow> {
    let min_support = min_support.max(1);
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in dataset {
        by_len.entry(s.len()).or_default().push(s.entity_count());
    }
    by_len
        .into_iter()
        .filter(|(_, counts)| counts.len() >= min_support)
        .map(|(length, counts)| {
            let support = counts.len();
            let mean = counts.iter().sum::<usize>() as f64 / support as f64;
            let variance = counts
                .iter()
                .map(|&c| {
                    let d = c as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / support as f64;
            // count > sqrt(n) compared exactly in integers
            let violations = counts.iter().filter(|&&c| c * c > length).count();
            SparsityRow {
                length,
                support,
                mean_entities: mean,
                variance,
                sqrt_length: (length as f64).sqrt(),
                violation_fraction: violations as f64 / support as f64,
            }
        })
        .collect()
}

/// Render the sparsity table as CSV.
pub fn sparsity_csv(rows: &[SparsityRow]) -> String {
    let mut out = String::from("length,support,mean_entities,variance,sqrt_length,violation_fraction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.length, r.support, r.mean_entities, r.variance, r.sqrt_length, r.violation_fraction
        ));
    }
    out
}
