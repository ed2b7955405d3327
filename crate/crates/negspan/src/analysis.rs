//! Missampling analytics: the missampling rate, the exact zero-missampling
//! probability and its closed-form lower bound, Monte Carlo verification of
//! that bound, uncertainty-stratified negative selection, and span F1.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{AnnotatedSentence, EntitySpan};
use crate::model::SpanScorer;
use crate::rng;
use crate::sampler::{build_candidates, compute_u, sample_count};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("cannot draw {requested} negatives from {candidates} candidates")]
    Oversampled { requested: usize, candidates: usize },
    #[error("{hidden} hidden entities cannot fit into {candidates} candidates")]
    TooManyHidden { hidden: usize, candidates: usize },
    #[error("more entities ({entities}) than lattice spans ({lattice})")]
    TooManyEntities { entities: usize, lattice: usize },
    #[error("sentence length must be >= 2, got {n}")]
    SentenceTooShort { n: usize },
    #[error("need at least one trial")]
    NoTrials,
    #[error("predicted and gold lists differ in length: {predicted} vs {gold}")]
    LengthMismatch { predicted: usize, gold: usize },
}

/// Missampling outcome of one sentence's draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissamplingReport {
    /// Fraction of sampled negatives that are actually unlabeled entities.
    pub gamma: f64,
    pub sampled_count: usize,
    /// The sampled spans that hit an unlabeled entity.
    pub hit_spans: Vec<(usize, usize)>,
}

/// `gamma = |sampled ∩ hidden ranges| / |sampled|`; zero for an empty draw.
pub fn missampling_rate(
    sampled: &[(usize, usize)],
    hidden: &BTreeSet<EntitySpan>,
) -> MissamplingReport {
    let hidden_ranges: BTreeSet<(usize, usize)> = hidden.iter().map(EntitySpan::range).collect();
    let hit_spans: Vec<(usize, usize)> =
        sampled.iter().copied().filter(|span| hidden_ranges.contains(span)).collect();
    let gamma = if sampled.is_empty() { 0.0 } else { hit_spans.len() as f64 / sampled.len() as f64 };
    MissamplingReport { gamma, sampled_count: sampled.len(), hit_spans }
}

/// Dataset-level aggregation of per-sentence missampling. `micro` pools all
/// draws; `macro_avg` averages per-sentence rates over sentences that drew
/// at least one negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaAggregate {
    pub micro: f64,
    pub macro_avg: f64,
    pub sentences: usize,
    pub sampled: usize,
    pub hits: usize,
}

pub fn aggregate_gamma(reports: &[MissamplingReport]) -> GammaAggregate {
    let sampled: usize = reports.iter().map(|r| r.sampled_count).sum();
    let hits: usize = reports.iter().map(|r| r.hit_spans.len()).sum();
    let with_draws: Vec<&MissamplingReport> =
        reports.iter().filter(|r| r.sampled_count > 0).collect();
    let micro = if sampled == 0 { 0.0 } else { hits as f64 / sampled as f64 };
    let macro_avg = if with_draws.is_empty() {
        0.0
    } else {
        with_draws.iter().map(|r| r.gamma).sum::<f64>() / with_draws.len() as f64
    };
    GammaAggregate { micro, macro_avg, sentences: reports.len(), sampled, hits }
}

/// `top * (top - 1) * ... * (top - count + 1)` as an exact big integer;
/// zero if the factors cross zero.
fn falling_product(top: usize, count: usize) -> BigUint {
    if count > top {
        return BigUint::from(0u32);
    }
    let mut out = BigUint::from(1u32);
    for i in 0..count {
        out *= BigUint::from(top - i);
    }
    out
}

/// Correctly rounded `num / den` as an f64, for `0 <= num <= den`.
/// Exact rational arithmetic with a single round-to-nearest-even at the end.
fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    use num_bigint::BigUint as B;
    if num == &B::from(0u32) {
        return 0.0;
    }
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    // Shift so the integer quotient carries at least 55 significant bits.
    let shift = 55 - (nb - db) + 2;
    debug_assert!(shift > 0, "num <= den implies a positive shift");
    let scaled = num << shift as u64;
    let quotient = &scaled / den;
    let remainder = &scaled - &quotient * den;
    let qb = quotient.bits() as i64;
    debug_assert!(qb >= 54);
    let drop = (qb - 53) as u64;
    let mut mantissa = &quotient >> drop;
    let dropped = &quotient - (&mantissa << drop);
    let half = B::from(1u32) << (drop - 1);
    let sticky = remainder != B::from(0u32);
    let odd = (&mantissa % B::from(2u32)) == B::from(1u32);
    // round to nearest, ties to even
    if dropped > half || (dropped == half && (sticky || odd)) {
        mantissa += 1u32;
    }
    let mantissa_f64 = u64::try_from(&mantissa).expect("53-bit mantissa fits u64") as f64;
    let exponent = drop as i64 - shift;
    mantissa_f64 * 2f64.powi(exponent as i32)
}

/// Exact probability that a uniform without-replacement draw of `k`
/// negatives avoids all `h` unlabeled entities, for an `n`-token sentence
/// with `m` annotated entities:
///
/// ```text
/// q = prod over i in 0..k of (1 - h / (n(n+1)/2 - m - i))
/// ```
///
/// Computed as a ratio of exact falling factorials, so the result is the
/// correctly rounded f64 of the true rational value.
pub fn exact_zero_missample_prob(n: usize, m: usize, h: usize, k: usize) -> Result<f64, AnalysisError> {
    let lattice = n * (n + 1) / 2;
    let candidates = lattice
        .checked_sub(m)
        .ok_or(AnalysisError::TooManyEntities { entities: m, lattice })?;
    if k > candidates {
        return Err(AnalysisError::Oversampled { requested: k, candidates });
    }
    if h > candidates {
        return Err(AnalysisError::TooManyHidden { hidden: h, candidates });
    }
    if h == 0 || k == 0 {
        return Ok(1.0);
    }
    if k > candidates - h {
        // every draw sequence must eventually hit a hidden entity
        return Ok(0.0);
    }
    let num = falling_product(candidates - h, k);
    let den = falling_product(candidates, k);
    Ok(ratio_to_f64(&num, &den))
}

/// Closed-form lower bound `1 - 4 * lambda * sqrt(n) / (n - 1)` on the zero
/// missampling probability under the entity sparsity premise
/// `m + h <= sqrt(n)`. May be negative (vacuous) for small `n`.
pub fn theorem_bound(n: usize, lambda: f64) -> Result<f64, AnalysisError> {
    if n < 2 {
        return Err(AnalysisError::SentenceTooShort { n });
    }
    Ok(1.0 - 4.0 * lambda * (n as f64).sqrt() / (n as f64 - 1.0))
}

/// One Monte Carlo verification of the zero-missampling bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub lambda: f64,
    pub m: usize,
    pub h: usize,
    pub k: usize,
    pub exact_q: f64,
    pub lower_bound: f64,
    pub empirical_prob: f64,
    pub trials: u64,
    /// Sampling-noise allowance `4 * sqrt(0.25 / trials)`.
    pub tolerance: f64,
    /// Whether `m + h <= sqrt(n)` held; the bound is only claimed in-premise.
    pub in_premise: bool,
}

impl BoundReport {
    pub fn bound_satisfied(&self) -> bool {
        self.empirical_prob >= self.lower_bound - self.tolerance
    }
}

/// Place `m` visible and `h` hidden entities on distinct random lattice
/// spans, draw `k = ceil(lambda * n)` uniform negatives, and estimate
/// `P(gamma = 0)` over `trials` runs. Each trial has its own RNG stream, so
/// trials run in parallel and the count is order-independent.
pub fn monte_carlo_bound_check(
    n: usize,
    lambda: f64,
    h: usize,
    m: usize,
    trials: u64,
    seed: u64,
) -> Result<BoundReport, AnalysisError> {
    if trials == 0 {
        return Err(AnalysisError::NoTrials);
    }
    let lattice = n * (n + 1) / 2;
    if m + h > lattice {
        return Err(AnalysisError::TooManyEntities { entities: m + h, lattice });
    }
    let candidates = lattice - m;
    let k = sample_count(n, lambda, candidates);
    let exact_q = exact_zero_missample_prob(n, m, h, k)?;
    let lower_bound = theorem_bound(n, lambda)?;
    let in_premise = (m + h) * (m + h) <= n;

    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut stream = rng::stream2(seed, "mc-trial", trial, 0);
            // entity placement: h hidden + m visible on distinct spans
            let placed = rand::seq::index::sample(&mut stream, lattice, m + h);
            let hidden: Vec<usize> = placed.iter().take(h).collect();
            let mut visible: Vec<usize> = placed.iter().skip(h).collect();
            visible.sort_unstable();
            // draw k candidate ranks, then map each rank to its lattice
            // index by skipping past visible spans in order
            let ranks = rand::seq::index::sample(&mut stream, candidates, k);
            let hit = ranks.iter().any(|rank| {
                let mut index = rank;
                for &v in &visible {
                    if v <= index {
                        index += 1;
                    } else {
                        break;
                    }
                }
                hidden.contains(&index)
            });
            u64::from(!hit)
        })
        .sum();

    let empirical_prob = successes as f64 / trials as f64;
    Ok(BoundReport {
        n,
        lambda,
        m,
        h,
        k,
        exact_q,
        lower_bound,
        empirical_prob,
        trials,
        tolerance: 4.0 * (0.25 / trials as f64).sqrt(),
        in_premise,
    })
}

/// CSV header matching [`bound_csv_row`].
pub fn bound_csv_header() -> &'static str {
    "n,lambda,exact_q,bound,empirical,trials,in_premise\n"
}

pub fn bound_csv_row(report: &BoundReport) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        report.n,
        report.lambda,
        report.exact_q,
        report.lower_bound,
        report.empirical_prob,
        report.trials,
        report.in_premise
    )
}

/// Which slice of the uncertainty ranking to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Top,
    Middle,
    Bottom,
}

/// Negatives chosen for one sentence by uncertainty ranking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumSelection {
    pub spans: Vec<(usize, usize)>,
    /// True when fewer than `k` candidates were available and the whole
    /// candidate set was taken.
    pub truncated: bool,
}

/// Rank each sentence's candidates (excluding hidden entity spans, so the
/// selection has zero missampling by construction) by uncertainty
/// descending and keep the requested stratum of size `k = ceil(lambda * n)`.
/// The middle stratum is centered: it starts at rank `(|S'| - k) / 2`.
/// Ties break by span order.
pub fn uncertainty_strata<S: SpanScorer + ?Sized>(
    sentences: &[AnnotatedSentence],
    oracle: &S,
    lambda: f64,
    stratum: Stratum,
) -> Vec<StratumSelection> {
    sentences
        .iter()
        .map(|sentence| {
            let hidden_ranges: BTreeSet<(usize, usize)> =
                sentence.hidden().iter().map(EntitySpan::range).collect();
            let candidates = build_candidates(sentence.sentence(), sentence.visible());
            let mut ranked: Vec<((usize, usize), f64)> = candidates
                .spans()
                .iter()
                .filter(|span| !hidden_ranges.contains(span))
                .map(|&span| (span, compute_u(&oracle.score(sentence.sentence(), span))))
                .collect();
            ranked.sort_by(|a, b| {
                b.1.partial_cmp(&a.1).expect("entropies are finite").then(a.0.cmp(&b.0))
            });
            let k = (lambda * sentence.len() as f64).ceil() as usize;
            if ranked.len() < k {
                let mut spans: Vec<(usize, usize)> = ranked.into_iter().map(|(s, _)| s).collect();
                spans.sort_unstable();
                return StratumSelection { spans, truncated: true };
            }
            let start = match stratum {
                Stratum::Top => 0,
                Stratum::Middle => (ranked.len() - k) / 2,
                Stratum::Bottom => ranked.len() - k,
            };
            let mut spans: Vec<(usize, usize)> =
                ranked[start..start + k].iter().map(|&(s, _)| s).collect();
            spans.sort_unstable();
            StratumSelection { spans, truncated: false }
        })
        .collect()
}

/// Exact-match span precision/recall/F1 over aligned sentence lists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

/// A predicted span counts only on an exact `(start, end, label)` match.
/// Conventions: empty/empty scores 1.0, otherwise empty denominators score 0.
pub fn span_f1(
    predicted: &[BTreeSet<EntitySpan>],
    gold: &[BTreeSet<EntitySpan>],
) -> Result<F1Report, AnalysisError> {
    if predicted.len() != gold.len() {
        return Err(AnalysisError::LengthMismatch { predicted: predicted.len(), gold: gold.len() });
    }
    let mut tp = 0usize;
    let mut pred_total = 0usize;
    let mut gold_total = 0usize;
    for (p, g) in predicted.iter().zip(gold) {
        tp += p.intersection(g).count();
        pred_total += p.len();
        gold_total += g.len();
    }
    let (precision, recall, f1) = if pred_total == 0 && gold_total == 0 {
        (1.0, 1.0, 1.0)
    } else {
        let precision = if pred_total == 0 { 0.0 } else { tp as f64 / pred_total as f64 };
        let recall = if gold_total == 0 { 0.0 } else { tp as f64 / gold_total as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        (precision, recall, f1)
    };
    Ok(F1Report { precision, recall, f1, true_positives: tp, predicted: pred_total, gold: gold_total })
}
