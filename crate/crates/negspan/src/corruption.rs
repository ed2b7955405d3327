//! Synthetic unlabeled-entity corpora: mask gold annotations with a fixed
//! probability, and split datasets in half for held-out oracle training.
//!
//! Masking is per-entity and per-sentence streams are derived from
//! `(seed, sentence index)`, so corrupting the first k sentences of a
//! dataset gives the same result no matter what follows them.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedSentence, CorpusError, EntitySpan};
use crate::rng;

#[derive(Debug, Error)]
pub enum CorruptionError {
    #[error("mask probability must be in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("sentence {sentence} already has hidden entities; refusing to corrupt twice")]
    AlreadyCorrupted { sentence: usize },
    #[error("need at least 2 sentences to split, got {0}")]
    DatasetTooSmall(usize),
    #[error("sidecar line {line}: {reason}")]
    SidecarParse { line: usize, reason: String },
    #[error("sidecar line {line}: sentence index {index} out of range ({len} sentences)")]
    SidecarIndex { line: usize, index: usize, len: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Masking parameters: each visible entity is hidden independently with
/// probability `mask_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub mask_prob: f64,
    pub seed: u64,
}

impl CorruptionConfig {
    pub fn new(mask_prob: f64, seed: u64) -> Result<Self, CorruptionError> {
        if !mask_prob.is_finite() || !(0.0..=1.0).contains(&mask_prob) {
            return Err(CorruptionError::InvalidProbability(mask_prob));
        }
        Ok(Self { mask_prob, seed })
    }
}

/// Move each visible entity to the hidden set with probability `mask_prob`.
/// Token content is untouched and `visible ∪ hidden` is preserved exactly.
/// Inputs must be uncorrupted (empty hidden sets).
pub fn mask_entities(
    dataset: &[AnnotatedSentence],
    config: &CorruptionConfig,
) -> Result<Vec<AnnotatedSentence>, CorruptionError> {
    for (i, s) in dataset.iter().enumerate() {
        if !s.hidden().is_empty() {
            return Err(CorruptionError::AlreadyCorrupted { sentence: i });
        }
    }
    Ok(dataset
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut stream = rng::stream(config.seed, "mask", i as u64);
            let mut visible = BTreeSet::new();
            let mut hidden = BTreeSet::new();
            for span in s.visible() {
                if stream.gen::<f64>() < config.mask_prob {
                    hidden.insert(span.clone());
                } else {
                    visible.insert(span.clone());
                }
            }
            AnnotatedSentence::new(s.sentence().clone(), visible, hidden)
                .expect("masking only moves spans between sets")
        })
        .collect())
}

/// Random permutation split into two halves differing in size by at most
/// one; the first half takes the extra sentence when the count is odd.
pub fn split_half(
    dataset: &[AnnotatedSentence],
    seed: u64,
) -> Result<(Vec<AnnotatedSentence>, Vec<AnnotatedSentence>), CorruptionError> {
    if dataset.len() < 2 {
        return Err(CorruptionError::DatasetTooSmall(dataset.len()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng::stream(seed, "split", 0));
    let cut = dataset.len().div_ceil(2);
    let first = order[..cut].iter().map(|&i| dataset[i].clone()).collect();
    let second = order[cut..].iter().map(|&i| dataset[i].clone()).collect();
    Ok((first, second))
}

/// Render hidden spans as sidecar text: one `sentence_index start end label`
/// line per hidden span, in sentence order.
pub fn sidecar_to_string(dataset: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for (i, s) in dataset.iter().enumerate() {
        for span in s.hidden() {
            out.push_str(&format!("{} {} {} {}\n", i, span.start, span.end, span.label));
        }
    }
    out
}

/// Re-attach hidden spans from sidecar text to sentences parsed from the
/// corrupted CoNLL file. The inputs must have empty hidden sets.
pub fn attach_hidden(
    sentences: Vec<AnnotatedSentence>,
    sidecar: &str,
) -> Result<Vec<AnnotatedSentence>, CorruptionError> {
    let mut hidden_by_sentence: Vec<Vec<EntitySpan>> = vec![Vec::new(); sentences.len()];
    for (idx, raw) in sidecar.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(CorruptionError::SidecarParse {
                line: line_no,
                reason: format!("expected `sentence_index start end label`, got {line:?}"),
            });
        }
        let parse_num = |field: &str, name: &str| {
            field.parse::<usize>().map_err(|_| CorruptionError::SidecarParse {
                line: line_no,
                reason: format!("{name} {field:?} is not a non-negative integer"),
            })
        };
        let sentence_index = parse_num(cols[0], "sentence index")?;
        let start = parse_num(cols[1], "start")?;
        let end = parse_num(cols[2], "end")?;
        if sentence_index >= sentences.len() {
            return Err(CorruptionError::SidecarIndex {
                line: line_no,
                index: sentence_index,
                len: sentences.len(),
            });
        }
        hidden_by_sentence[sentence_index].push(EntitySpan::new(start, end, cols[3]));
    }
    sentences
        .into_iter()
        .zip(hidden_by_sentence)
        .enumerate()
        .map(|(i, (s, hidden))| {
            if !s.hidden().is_empty() {
                return Err(CorruptionError::AlreadyCorrupted { sentence: i });
            }
            AnnotatedSentence::new(s.sentence().clone(), s.visible().clone(), hidden).map_err(Into::into)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn toy_dataset(sentences: usize, entities_each: usize) -> Vec<AnnotatedSentence> {
        (0..sentences)
            .map(|i| {
                let n = entities_each.max(1) + 2;
                let tokens: Vec<String> = (0..n).map(|t| format!("s{i}t{t}")).collect();
                let spans: Vec<EntitySpan> =
                    (0..entities_each).map(|e| EntitySpan::new(e, e, "PER")).collect();
                AnnotatedSentence::labeled(Sentence::new(tokens).unwrap(), spans).unwrap()
            })
            .collect()
    }

    #[test]
    fn mask_prob_zero_is_identity() {
        let data = toy_dataset(5, 3);
        let out = mask_entities(&data, &CorruptionConfig::new(0.0, 9).unwrap()).unwrap();
        assert_eq!(out, data);
    }

    #[test]
    fn mask_prob_one_hides_everything() {
        let data = toy_dataset(5, 3);
        let out = mask_entities(&data, &CorruptionConfig::new(1.0, 9).unwrap()).unwrap();
        for (before, after) in data.iter().zip(&out) {
            assert!(after.visible().is_empty());
            assert_eq!(&after.hidden().iter().cloned().collect::<BTreeSet<_>>(), before.visible());
        }
    }

    #[test]
    fn mask_count_is_binomial_at_half() {
        // 10_000 entities at p = 0.5: hidden count within 3 sigma of 5_000
        let data = toy_dataset(2500, 4);
        let out = mask_entities(&data, &CorruptionConfig::new(0.5, 123).unwrap()).unwrap();
        let hidden: usize = out.iter().map(|s| s.hidden().len()).sum();
        let sigma = (10_000.0f64 * 0.25).sqrt();
        assert!(
            (hidden as f64 - 5000.0).abs() <= 3.0 * sigma,
            "hidden = {hidden}, expected 5000 ± {}",
            3.0 * sigma
        );
    }

    #[test]
    fn mask_preserves_union_disjointly() {
        let data = toy_dataset(50, 3);
        let out = mask_entities(&data, &CorruptionConfig::new(0.4, 7).unwrap()).unwrap();
        for (before, after) in data.iter().zip(&out) {
            let union: BTreeSet<EntitySpan> = after.gold();
            assert_eq!(&union, before.visible());
            assert!(after.visible().is_disjoint(after.hidden()));
            assert_eq!(after.sentence(), before.sentence());
        }
    }

    #[test]
    fn mask_is_deterministic_and_stable_under_extension() {
        let data = toy_dataset(10, 3);
        let config = CorruptionConfig::new(0.5, 42).unwrap();
        let a = mask_entities(&data, &config).unwrap();
        let b = mask_entities(&data, &config).unwrap();
        assert_eq!(a, b);
        // appending sentences must not disturb earlier streams
        let longer = toy_dataset(15, 3);
        let c = mask_entities(&longer, &config).unwrap();
        assert_eq!(&c[..10], &a[..]);
    }

    #[test]
    fn mask_rejects_double_corruption() {
        let data = toy_dataset(3, 2);
        let config = CorruptionConfig::new(1.0, 1).unwrap();
        let once = mask_entities(&data, &config).unwrap();
        let err = mask_entities(&once, &config).unwrap_err();
        assert!(matches!(err, CorruptionError::AlreadyCorrupted { sentence: 0 }));
    }

    #[test]
    fn masking_decisions_are_independent_per_entity() {
        // per-entity mask frequency over 1000 seeds stays within p ± 5 sigma
        let data = toy_dataset(3, 4);
        let p = 0.3;
        let seeds = 1000;
        let mut counts = [0usize; 12];
        for seed in 0..seeds {
            let out = mask_entities(&data, &CorruptionConfig::new(p, seed).unwrap()).unwrap();
            let mut slot = 0;
            for (s, original) in out.iter().zip(&data) {
                for span in original.visible() {
                    if s.hidden().contains(span) {
                        counts[slot] += 1;
                    }
                    slot += 1;
                }
            }
        }
        let sigma = (p * (1.0 - p) / seeds as f64).sqrt();
        for (i, c) in counts.iter().enumerate() {
            let freq = *c as f64 / seeds as f64;
            assert!((freq - p).abs() <= 5.0 * sigma, "entity {i}: freq {freq}");
        }
    }

    #[test]
    fn split_sizes_and_union() {
        let data = toy_dataset(10, 1);
        let (a, b) = split_half(&data, 5).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));

        let data = toy_dataset(11, 1);
        let (a, b) = split_half(&data, 5).unwrap();
        assert_eq!((a.len(), b.len()), (6, 5));
        let mut merged: Vec<_> = a.iter().chain(b.iter()).cloned().collect();
        let mut original = data.clone();
        merged.sort_by_key(|s| s.sentence().token(0).to_string());
        original.sort_by_key(|s| s.sentence().token(0).to_string());
        assert_eq!(merged, original);
    }

    #[test]
    fn split_is_deterministic() {
        let data = toy_dataset(9, 1);
        assert_eq!(split_half(&data, 3).unwrap(), split_half(&data, 3).unwrap());
        assert!(split_half(&data[..1], 3).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let data = toy_dataset(6, 3);
        let masked = mask_entities(&data, &CorruptionConfig::new(0.6, 11).unwrap()).unwrap();
        let sidecar = sidecar_to_string(&masked);
        let stripped: Vec<AnnotatedSentence> = masked
            .iter()
            .map(|s| {
                AnnotatedSentence::labeled(s.sentence().clone(), s.visible().iter().cloned()).unwrap()
            })
            .collect();
        let restored = attach_hidden(stripped, &sidecar).unwrap();
        assert_eq!(restored, masked);
    }

    #[test]
    fn sidecar_rejects_bad_lines() {
        let data = toy_dataset(2, 1);
        assert!(matches!(
            attach_hidden(data.clone(), "0 1\n"),
            Err(CorruptionError::SidecarParse { line: 1, .. })
        ));
        assert!(matches!(
            attach_hidden(data.clone(), "9 0 0 PER\n"),
            Err(CorruptionError::SidecarIndex { line: 1, index: 9, .. })
        ));
        assert!(matches!(
            attach_hidden(data, "x 0 0 PER\n"),
            Err(CorruptionError::SidecarParse { line: 1, .. })
        ));
    }
}
