//! Negative candidate sets and the sampling distributions over them:
//! uniform draws, and the adaptive weighted distribution built from the
//! oracle's confidence margin `v` and uncertainty `u`.
//!
//! Per candidate span: `r = u * (1 + v)^mu`, then `e = softmax(r / T)` over
//! the candidate set. `T >= 1` smooths the distribution toward uniform and
//! is scheduled as `sqrt(C - c)` over training epochs.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{enumerate_spans, EntitySpan, Sentence};
use crate::model::{LabelDistribution, SpanScorer};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("asked for {requested} draws from {available} candidates")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("non-finite sampling weight at span ({0}, {1})")]
    NonFiniteWeight(usize, usize),
    #[error("epoch {epoch} out of range for {total} total epochs")]
    EpochOutOfRange { epoch: usize, total: usize },
    #[error("temperature must be >= 1, got {0}")]
    BadTemperature(f64),
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
}

/// How negatives are drawn each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Uniform,
    /// Weighted by a frozen, externally supplied oracle.
    WeightedFixed,
    /// Weighted by the training model itself, re-snapshotted every epoch.
    WeightedAdaptive,
}

impl std::fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SamplingMode::Uniform => "uniform",
            SamplingMode::WeightedFixed => "weighted_fixed",
            SamplingMode::WeightedAdaptive => "weighted_adaptive",
        };
        f.write_str(s)
    }
}

/// Sampling hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Draw `ceil(lambda * n)` negatives per sentence; `0 < lambda < 1`.
    pub lambda: f64,
    /// Trade-off exponent in `r = u * (1 + v)^mu`; `mu >= 1`.
    pub mu: f64,
    /// Epoch count `C` driving the `sqrt(C - c)` temperature schedule.
    pub total_epochs: usize,
    pub mode: SamplingMode,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !self.lambda.is_finite() || self.lambda <= 0.0 || self.lambda >= 1.0 {
            return Err(SamplerError::InvalidConfig(format!(
                "lambda must be in (0, 1), got {}",
                self.lambda
            )));
        }
        if !self.mu.is_finite() || self.mu < 1.0 {
            return Err(SamplerError::InvalidConfig(format!("mu must be >= 1, got {}", self.mu)));
        }
        if self.total_epochs == 0 {
            return Err(SamplerError::InvalidConfig("total_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { lambda: 0.35, mu: 8.0, total_epochs: 16, mode: SamplingMode::Uniform, seed: 0 }
    }
}

/// The span lattice minus the visible entities: every remaining span is a
/// negative candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeCandidateSet {
    spans: Vec<(usize, usize)>,
}

impl NegativeCandidateSet {
    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

/// Full lattice of the sentence minus the `(start, end)` ranges of visible
/// entities, in start-major order. Size is `n(n+1)/2 - m`.
pub fn build_candidates(sentence: &Sentence, visible: &BTreeSet<EntitySpan>) -> NegativeCandidateSet {
    let taken: BTreeSet<(usize, usize)> = visible.iter().map(EntitySpan::range).collect();
    let spans = enumerate_spans(sentence.len(), None)
        .into_iter()
        .filter(|span| !taken.contains(span))
        .collect();
    NegativeCandidateSet { spans }
}

/// `k = min(ceil(lambda * n), available)`.
pub fn sample_count(n: usize, lambda: f64, available: usize) -> usize {
    let raw = (lambda * n as f64).ceil() as usize;
    raw.min(available)
}

/// Draw `k` distinct candidates uniformly without replacement; every
/// k-subset is equally likely. Result is in candidate order.
pub fn sample_uniform(
    candidates: &[(usize, usize)],
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>, SamplerError> {
    if k > candidates.len() {
        return Err(SamplerError::SampleTooLarge { requested: k, available: candidates.len() });
    }
    let mut picked = rand::seq::index::sample(rng, candidates.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| candidates[i]).collect())
}

/// Confidence margin `v = z("O") - max over entity labels of z(l)`,
/// in `[-1, 1]`. High `v` means the oracle is confident the span is a true
/// negative.
pub fn compute_v(z: &LabelDistribution) -> f64 {
    let probs = z.probs();
    let max_entity = probs[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    z.o_prob() - max_entity
}

/// Uncertainty `u`: the entropy of the label distribution in nats, with
/// `0 * ln 0 = 0`. Range `[0, ln |L|]`.
pub fn compute_u(z: &LabelDistribution) -> f64 {
    z.probs().iter().map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 }).sum()
}

/// Temperature schedule `T = sqrt(C - c)` for epoch `c` of `C` (0-based).
/// Strictly decreasing, ending at exactly 1 on the final epoch.
pub fn temperature(total_epochs: usize, epoch: usize) -> Result<f64, SamplerError> {
    if epoch >= total_epochs {
        return Err(SamplerError::EpochOutOfRange { epoch, total: total_epochs });
    }
    Ok(((total_epochs - epoch) as f64).sqrt())
}

/// One candidate's scores under the weighted distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateWeight {
    pub span: (usize, usize),
    pub v: f64,
    pub u: f64,
    pub r: f64,
    pub e: f64,
}

/// The weighted sampling distribution over one sentence's candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingWeights {
    records: Vec<CandidateWeight>,
    temperature: f64,
}

impl SamplingWeights {
    /// Build directly from precomputed records. `e` entries must be
    /// nonnegative and sum to 1 within 1e-6.
    pub fn new(records: Vec<CandidateWeight>, temperature: f64) -> Result<Self, SamplerError> {
        if records.is_empty() {
            return Err(SamplerError::EmptyCandidates);
        }
        if !(temperature >= 1.0) {
            return Err(SamplerError::BadTemperature(temperature));
        }
        let mut total = 0.0;
        for c in &records {
            if !c.e.is_finite() || c.e < 0.0 {
                return Err(SamplerError::NonFiniteWeight(c.span.0, c.span.1));
            }
            total += c.e;
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(SamplerError::InvalidConfig(format!("e sums to {total}, expected 1")));
        }
        Ok(Self { records, temperature })
    }

    pub fn records(&self) -> &[CandidateWeight] {
        &self.records
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Dump one `epoch sentence start end e` TSV line per candidate, for
    /// sampling audits.
    pub fn trace_tsv(&self, epoch: usize, sentence: usize) -> String {
        let mut out = String::new();
        for c in &self.records {
            out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", epoch, sentence, c.span.0, c.span.1, c.e));
        }
        out
    }
}

/// Score every candidate with the oracle and build the weighted
/// distribution `e = softmax(r / T)` with `r = u * (1 + v)^mu`. When all
/// `r` are equal (for instance a cold-start oracle, or the all-zero case),
/// `e` is exactly uniform.
pub fn compute_weights<S: SpanScorer + ?Sized>(
    candidates: &NegativeCandidateSet,
    oracle: &S,
    sentence: &Sentence,
    mu: f64,
    temperature: f64,
) -> Result<SamplingWeights, SamplerError> {
    if candidates.is_empty() {
        return Err(SamplerError::EmptyCandidates);
    }
    if !(temperature >= 1.0) || !temperature.is_finite() {
        return Err(SamplerError::BadTemperature(temperature));
    }
    if !(mu >= 1.0) {
        return Err(SamplerError::InvalidConfig(format!("mu must be >= 1, got {mu}")));
    }
    let mut records = Vec::with_capacity(candidates.len());
    for &span in candidates.spans() {
        let z = oracle.score(sentence, span);
        let v = compute_v(&z);
        let u = compute_u(&z);
        let r = u * (1.0 + v).powf(mu);
        if !r.is_finite() {
            return Err(SamplerError::NonFiniteWeight(span.0, span.1));
        }
        records.push(CandidateWeight { span, v, u, r, e: 0.0 });
    }
    let first = records[0].r;
    if records.iter().all(|c| c.r == first) {
        let e = 1.0 / records.len() as f64;
        for c in &mut records {
            c.e = e;
        }
    } else {
        let max = records.iter().map(|c| c.r).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for c in &mut records {
            c.e = ((c.r - max) / temperature).exp();
            total += c.e;
        }
        for c in &mut records {
            c.e /= total;
        }
    }
    Ok(SamplingWeights { records, temperature })
}

/// A without-replacement weighted draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedDraw {
    pub spans: Vec<(usize, usize)>,
    /// True when the positive-weight pool ran out and the remainder was
    /// filled uniformly from zero-weight candidates.
    pub uniform_fill: bool,
}

/// Draw `k` distinct candidates sequentially without replacement,
/// renormalizing `e` after each draw. If fewer than `k` candidates carry
/// positive weight, the remainder is drawn uniformly from the zero-weight
/// ones and the result is flagged.
pub fn sample_weighted(
    weights: &SamplingWeights,
    k: usize,
    rng: &mut impl Rng,
) -> Result<WeightedDraw, SamplerError> {
    let records = weights.records();
    if k > records.len() {
        return Err(SamplerError::SampleTooLarge { requested: k, available: records.len() });
    }
    let mut positive: Vec<usize> = (0..records.len()).filter(|&i| records[i].e > 0.0).collect();
    let zero: Vec<usize> = (0..records.len()).filter(|&i| records[i].e == 0.0).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    while chosen.len() < k && !positive.is_empty() {
        let total: f64 = positive.iter().map(|&i| records[i].e).sum();
        let x = rng.gen::<f64>() * total;
        let mut cumulative = 0.0;
        let mut pick = positive.len() - 1;
        for (pos, &i) in positive.iter().enumerate() {
            cumulative += records[i].e;
            if x < cumulative {
                pick = pos;
                break;
            }
        }
        chosen.push(positive.remove(pick));
    }
    let mut uniform_fill = false;
    if chosen.len() < k {
        uniform_fill = true;
        let need = k - chosen.len();
        let extra = rand::seq::index::sample(rng, zero.len(), need);
        chosen.extend(extra.iter().map(|j| zero[j]));
    }
    chosen.sort_unstable();
    Ok(WeightedDraw { spans: chosen.into_iter().map(|i| records[i].span).collect(), uniform_fill })
}
