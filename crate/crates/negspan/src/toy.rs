//! Planted synthetic corpora for desk-scale experiments.
//!
//! Each entity type owns a small vocabulary of trigger tokens; non-entity
//! positions draw from a shared background vocabulary. Entities are one or
//! two tokens long, never overlap, and every sentence respects the sparsity
//! premise `entity count <= sqrt(n)`. Because visible and masked entities
//! come from the same generative process, a model trained on the visible
//! ones scores masked entity spans as entity-like, which is exactly what
//! the weighted sampler needs to steer around.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentence, EntitySpan, LabelSet, Sentence};
use crate::rng;

const LABEL_PALETTE: [&str; 8] = ["PER", "ORG", "LOC", "GPE", "DATE", "EVENT", "FAC", "MISC"];

const TRIGGERS_PER_TYPE: usize = 12;
const BACKGROUND_WORDS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub sentences: usize,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
    /// Number of entity types, at most 8.
    pub entity_types: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { sentences: 2000, seed: 0, min_len: 8, max_len: 30, entity_types: 5 }
    }
}

/// Generate a fully annotated corpus plus its label set. Deterministic per
/// `(config, seed)`; sentence `i` only depends on `(seed, i)`.
pub fn generate(config: &ToyConfig) -> (Vec<AnnotatedSentence>, LabelSet) {
    assert!(config.entity_types >= 1 && config.entity_types <= LABEL_PALETTE.len());
    assert!(config.min_len >= 2 && config.min_len <= config.max_len);
    let labels: Vec<&str> = LABEL_PALETTE[..config.entity_types].to_vec();
    let label_set = LabelSet::new(labels.clone()).expect("palette labels are valid");

    // capitalized triggers against a lowercase background, so span shape
    // carries the usual NER casing signal
    let triggers: Vec<Vec<String>> = labels
        .iter()
        .map(|l| {
            let mut word = l.to_lowercase();
            word[..1].make_ascii_uppercase();
            (0..TRIGGERS_PER_TYPE).map(|i| format!("{word}{i:02}")).collect()
        })
        .collect();
    let background: Vec<String> = (0..BACKGROUND_WORDS).map(|i| format!("w{i:03}")).collect();

    let sentences = (0..config.sentences)
        .map(|i| {
            let mut stream = rng::stream(config.seed, "toy", i as u64);
            let n = stream.gen_range(config.min_len..=config.max_len);
            // dense but within the sparsity premise: count stays <= sqrt(n)
            let budget = ((n as f64).sqrt().floor() as usize).max(1);
            let target = budget.saturating_sub(stream.gen_range(0..=1)).max(1);

            // place spans of length 1 or 2, separated by at least one
            // background token so no two entities ever touch
            let mut placed: Vec<(usize, usize)> = Vec::with_capacity(target);
            let mut occupied = vec![false; n];
            let mut attempts = 0;
            while placed.len() < target && attempts < 50 {
                attempts += 1;
                let len = if stream.gen_bool(0.5) { 1 } else { 2 };
                if len > n {
                    continue;
                }
                let start = stream.gen_range(0..=n - len);
                let end = start + len - 1;
                let guard_start = start.saturating_sub(1);
                let guard_end = (end + 1).min(n - 1);
                if occupied[guard_start..=guard_end].iter().any(|&o| o) {
                    continue;
                }
                for slot in occupied.iter_mut().take(end + 1).skip(start) {
                    *slot = true;
                }
                placed.push((start, end));
            }
            placed.sort_unstable();

            let mut tokens: Vec<String> =
                (0..n).map(|_| background[stream.gen_range(0..background.len())].clone()).collect();
            let mut spans: BTreeSet<EntitySpan> = BTreeSet::new();
            for (start, end) in placed {
                let type_index = stream.gen_range(0..labels.len());
                for slot in tokens.iter_mut().take(end + 1).skip(start) {
                    *slot = triggers[type_index][stream.gen_range(0..TRIGGERS_PER_TYPE)].clone();
                }
                spans.insert(EntitySpan::new(start, end, labels[type_index]));
            }
            let sentence = Sentence::new(tokens).expect("generated tokens are valid");
            AnnotatedSentence::labeled(sentence, spans).expect("placed spans never collide")
        })
        .collect();

    (sentences, label_set)
}
