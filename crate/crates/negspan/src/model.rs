//! Span scoring and training: a hashed-feature linear softmax over the
//! label set, updated with Adam, plus greedy span decoding.
//!
//! The scorer is deliberately small: boundary/context/content features are
//! hashed into a fixed number of buckets and a single linear layer produces
//! per-label logits. That keeps the sampling machinery encoder-agnostic and
//! the whole pipeline runnable on a laptop.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::{EntitySpan, LabelSet, Sentence};
use crate::rng::fnv1a64;

/// Probabilities are floored at this value inside logs.
pub const PROB_FLOOR: f64 = 1e-12;

pub const DEFAULT_HASH_DIMS: usize = 1 << 20;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_L2: f64 = 1e-5;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

const CHECKPOINT_MAGIC: &[u8; 8] = b"NEGSPAN\0";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("probability vector invalid: {0}")]
    InvalidDistribution(String),
    #[error("non-finite gradient encountered; aborting training")]
    NonFiniteGradient,
    #[error("checkpoint is not a recognized scorer file: {0}")]
    CheckpointFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

/// A probability vector over a [`LabelSet`], `"O"` at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.len() < 2 {
            return Err(ModelError::InvalidDistribution(format!(
                "need at least 2 labels, got {}",
                probs.len()
            )));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidDistribution(format!("entry {p} outside [0, 1]")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ModelError::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    /// Probability of the non-entity label.
    pub fn o_prob(&self) -> f64 {
        self.probs[LabelSet::O_INDEX]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the most probable label; ties resolve to the lowest index,
    /// so a uniform distribution picks `"O"`.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Anything that can score a span with a label distribution.
pub trait SpanScorer {
    fn labels(&self) -> &LabelSet;

    fn score(&self, sentence: &Sentence, span: (usize, usize)) -> LabelDistribution;

    /// Decode entity predictions: label every lattice span by argmax, keep
    /// non-`"O"` spans, then greedily accept by descending probability,
    /// dropping anything that overlaps an accepted span. Ties break by label
    /// order, then span order.
    fn predict(&self, sentence: &Sentence) -> BTreeSet<EntitySpan> {
        let mut candidates: Vec<((usize, usize), usize, f64)> = Vec::new();
        for span in crate::corpus::enumerate_spans(sentence.len(), None) {
            let z = self.score(sentence, span);
            let best = z.argmax();
            if best != LabelSet::O_INDEX {
                candidates.push((span, best, z.prob(best)));
            }
        }
        candidates.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .expect("softmax probabilities are finite")
                .then(a.1.cmp(&b.1))
                .then(a.0.cmp(&b.0))
        });
        let mut accepted: Vec<((usize, usize), usize)> = Vec::new();
        for (span, label, _) in candidates {
            let overlaps = accepted
                .iter()
                .any(|&((s, e), _)| span.0 <= e && s <= span.1);
            if !overlaps {
                accepted.push((span, label));
            }
        }
        accepted
            .into_iter()
            .map(|((start, end), label)| EntitySpan::new(start, end, self.labels().label(label)))
            .collect()
    }
}

/// One labeled training span: a visible entity or a sampled `"O"` negative.
#[derive(Debug, Clone, Copy)]
pub struct SpanExample<'a> {
    pub sentence: &'a Sentence,
    pub span: (usize, usize),
    /// Index into the scorer's label set.
    pub label: usize,
}

// Feature kinds, hashed together with their payload.
const KIND_BEGIN: u8 = 1;
const KIND_END: u8 = 2;
const KIND_PREV: u8 = 3;
const KIND_NEXT: u8 = 4;
const KIND_INSIDE: u8 = 5;
const KIND_LEN: u8 = 6;
const KIND_SHAPE: u8 = 7;
const KIND_CONTEXT_SHAPE: u8 = 8;

fn bucket(kind: u8, payload: &[u8], dims: usize) -> usize {
    let mut bytes = Vec::with_capacity(payload.len() + 1);
    bytes.push(kind);
    // ASCII case folding keeps hashing allocation-light and deterministic
    bytes.extend(payload.iter().map(u8::to_ascii_lowercase));
    (fnv1a64(&bytes) % dims as u64) as usize
}

fn shape_byte(token: &str) -> u8 {
    match token.chars().next() {
        Some(c) if c.is_uppercase() => b'U',
        Some(c) if c.is_ascii_digit() => b'D',
        Some(c) if c.is_lowercase() => b'L',
        _ => b'X',
    }
}

/// Deterministic sparse features for a span: hashed boundary tokens, the
/// tokens just outside the span and their casing shapes, a bag of in-span
/// tokens, a length bucket (1, 2, 3, 4, 5+), and the capitalization shape
/// of the span.
pub fn featurize(sentence: &Sentence, span: (usize, usize), hash_dims: usize) -> Vec<(usize, f64)> {
    let (start, end) = span;
    debug_assert!(start <= end && end < sentence.len());
    let mut out = Vec::with_capacity(end - start + 8);
    out.push((bucket(KIND_BEGIN, sentence.token(start).as_bytes(), hash_dims), 1.0));
    out.push((bucket(KIND_END, sentence.token(end).as_bytes(), hash_dims), 1.0));
    let prev: &[u8] = if start == 0 { b"<bos>" } else { sentence.token(start - 1).as_bytes() };
    out.push((bucket(KIND_PREV, prev, hash_dims), 1.0));
    let next: &[u8] = if end + 1 == sentence.len() { b"<eos>" } else { sentence.token(end + 1).as_bytes() };
    out.push((bucket(KIND_NEXT, next, hash_dims), 1.0));
    let prev_shape = if start == 0 { b'B' } else { shape_byte(sentence.token(start - 1)) };
    let next_shape =
        if end + 1 == sentence.len() { b'E' } else { shape_byte(sentence.token(end + 1)) };
    out.push((bucket(KIND_CONTEXT_SHAPE, &[prev_shape, next_shape], hash_dims), 1.0));
    for i in start..=end {
        out.push((bucket(KIND_INSIDE, sentence.token(i).as_bytes(), hash_dims), 1.0));
    }
    let len_bucket = (end - start + 1).min(5) as u8;
    out.push((bucket(KIND_LEN, &[len_bucket], hash_dims), 1.0));
    let mut shape = [0u8; 5];
    let mut shape_len = 0;
    for i in start..=end.min(start + 3) {
        shape[shape_len] = shape_byte(sentence.token(i));
        shape_len += 1;
    }
    if end - start + 1 > 4 {
        shape[shape_len] = b'+';
        shape_len += 1;
    }
    out.push((bucket(KIND_SHAPE, &shape[..shape_len], hash_dims), 1.0));
    out
}

/// The built-in trainable scorer: feature-hashed linear softmax with Adam
/// moments and L2 regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct HashedLinearScorer {
    labels: LabelSet,
    hash_dims: usize,
    learning_rate: f64,
    l2: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    // bucket-major layout: weights[bucket * |L| + label]
    weights: Vec<f64>,
    moment1: Vec<f64>,
    moment2: Vec<f64>,
}

impl HashedLinearScorer {
    pub fn new(labels: LabelSet) -> Self {
        Self::with_config(labels, DEFAULT_HASH_DIMS, DEFAULT_LEARNING_RATE, DEFAULT_L2)
    }

    pub fn with_config(labels: LabelSet, hash_dims: usize, learning_rate: f64, l2: f64) -> Self {
        assert!(hash_dims >= 1, "hash_dims must be positive");
        let len = hash_dims * labels.len();
        Self {
            labels,
            hash_dims,
            learning_rate,
            l2,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            step: 0,
            weights: vec![0.0; len],
            moment1: vec![0.0; len],
            moment2: vec![0.0; len],
        }
    }

    pub fn hash_dims(&self) -> usize {
        self.hash_dims
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn featurize(&self, sentence: &Sentence, span: (usize, usize)) -> Vec<(usize, f64)> {
        featurize(sentence, span, self.hash_dims)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Raw weight access, mainly for gradient checking and diagnostics.
    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn logits(&self, features: &[(usize, f64)]) -> Vec<f64> {
        let l = self.labels.len();
        let mut logits = vec![0.0; l];
        for &(feat, value) in features {
            let base = feat * l;
            for (label, logit) in logits.iter_mut().enumerate() {
                *logit += value * self.weights[base + label];
            }
        }
        logits
    }

    fn softmax(logits: &[f64]) -> Vec<f64> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        probs
    }

    /// Cross-entropy data loss over the batch: sum of `-ln P(label | span)`.
    /// The L2 penalty is tracked separately, see [`Self::l2_penalty`].
    pub fn loss(&self, batch: &[SpanExample<'_>]) -> f64 {
        batch
            .iter()
            .map(|ex| {
                let features = self.featurize(ex.sentence, ex.span);
                let probs = Self::softmax(&self.logits(&features));
                -(probs[ex.label].max(PROB_FLOOR)).ln()
            })
            .sum()
    }

    /// `0.5 * l2 * ||w||^2`, the regularization term added to the objective.
    pub fn l2_penalty(&self) -> f64 {
        0.5 * self.l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Dense gradient of the data loss (no L2 term). Returns the loss.
    pub fn loss_gradient(&self, batch: &[SpanExample<'_>], grad: &mut [f64]) -> f64 {
        assert_eq!(grad.len(), self.weights.len());
        let l = self.labels.len();
        let mut loss = 0.0;
        for ex in batch {
            let features = self.featurize(ex.sentence, ex.span);
            let probs = Self::softmax(&self.logits(&features));
            loss += -(probs[ex.label].max(PROB_FLOOR)).ln();
            for &(feat, value) in &features {
                let base = feat * l;
                for (label, &p) in probs.iter().enumerate() {
                    let indicator = if label == ex.label { 1.0 } else { 0.0 };
                    grad[base + label] += value * (p - indicator);
                }
            }
        }
        loss
    }

    /// One Adam step on `data loss + 0.5 * l2 * ||w||^2` over the batch.
    /// Returns the pre-update data loss.
    pub fn train_step(&mut self, batch: &[SpanExample<'_>]) -> Result<f64, ModelError> {
        let mut grad = vec![0.0; self.weights.len()];
        let loss = self.loss_gradient(batch, &mut grad);
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteGradient);
        }
        self.step += 1;
        let correction1 = 1.0 - self.beta1.powi(self.step as i32);
        let correction2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..self.weights.len() {
            let g = grad[i] + self.l2 * self.weights[i];
            if !g.is_finite() {
                return Err(ModelError::NonFiniteGradient);
            }
            self.moment1[i] = self.beta1 * self.moment1[i] + (1.0 - self.beta1) * g;
            self.moment2[i] = self.beta2 * self.moment2[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.moment1[i] / correction1;
            let v_hat = self.moment2[i] / correction2;
            self.weights[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(loss)
    }

    /// Write a versioned binary checkpoint: label set, dimensions,
    /// hyperparameters, weights, and optimizer state. Little-endian f64
    /// throughout; byte-stable across runs.
    pub fn save(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let entity_labels = self.labels.entity_labels();
        w.write_all(&(entity_labels.len() as u32).to_le_bytes())?;
        for label in entity_labels {
            let bytes = label.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(bytes)?;
        }
        w.write_all(&(self.hash_dims as u64).to_le_bytes())?;
        for v in [self.learning_rate, self.l2, self.beta1, self.beta2, self.epsilon] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&(self.weights.len() as u64).to_le_bytes())?;
        for arr in [&self.weights, &self.moment1, &self.moment2] {
            for v in arr.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(r: &mut impl Read) -> Result<Self, ModelError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(ModelError::CheckpointFormat("bad magic bytes".into()));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::CheckpointFormat(format!("unsupported version {version}")));
        }
        let label_count = read_u32(r)? as usize;
        let mut entity_labels = Vec::with_capacity(label_count);
        for _ in 0..label_count {
            let len = read_u32(r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            entity_labels.push(
                String::from_utf8(buf)
                    .map_err(|e| ModelError::CheckpointFormat(format!("label not UTF-8: {e}")))?,
            );
        }
        let labels = LabelSet::new(entity_labels)?;
        let hash_dims = read_u64(r)? as usize;
        let learning_rate = read_f64(r)?;
        let l2 = read_f64(r)?;
        let beta1 = read_f64(r)?;
        let beta2 = read_f64(r)?;
        let epsilon = read_f64(r)?;
        let step = read_u64(r)?;
        let len = read_u64(r)? as usize;
        if len != hash_dims * labels.len() {
            return Err(ModelError::CheckpointFormat(format!(
                "weight count {len} does not match {hash_dims} buckets x {} labels",
                labels.len()
            )));
        }
        let mut arrays = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut arr = Vec::with_capacity(len);
            for _ in 0..len {
                arr.push(read_f64(r)?);
            }
            arrays.push(arr);
        }
        let moment2 = arrays.pop().expect("three arrays");
        let moment1 = arrays.pop().expect("three arrays");
        let weights = arrays.pop().expect("three arrays");
        Ok(Self {
            labels,
            hash_dims,
            learning_rate,
            l2,
            beta1,
            beta2,
            epsilon,
            step,
            weights,
            moment1,
            moment2,
        })
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::load(&mut BufReader::new(File::open(path)?))
    }
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

impl SpanScorer for HashedLinearScorer {
    fn labels(&self) -> &LabelSet {
        &self.labels
    }

    fn score(&self, sentence: &Sentence, span: (usize, usize)) -> LabelDistribution {
        let features = self.featurize(sentence, span);
        LabelDistribution { probs: Self::softmax(&self.logits(&features)) }
    }
}
