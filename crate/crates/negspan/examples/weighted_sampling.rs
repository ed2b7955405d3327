//! Inspect the weighted sampling distribution on one sentence: per-candidate
//! margin v, uncertainty u, r = u * (1 + v)^mu, and e = softmax(r / T) at a
//! few temperatures, then draw negatives without replacement.
//!
//! Run with: cargo run --example weighted_sampling

use negspan::corruption::{mask_entities, CorruptionConfig};
use negspan::rng;
use negspan::sampler::{build_candidates, compute_weights, sample_count, sample_weighted};
use negspan::toy::{generate, ToyConfig};
use negspan::trainer::{train, TrainConfig};
use negspan::{EntitySpan, SamplerConfig};

fn main() {
    let seed = 11;
    let (gold, labels) = generate(&ToyConfig { sentences: 400, seed, ..ToyConfig::default() });
    let corrupted = mask_entities(&gold, &CorruptionConfig::new(0.8, seed).unwrap()).unwrap();

    // a quick oracle trained with plain uniform sampling
    let config = TrainConfig {
        sampler: SamplerConfig { total_epochs: 6, seed, ..SamplerConfig::default() },
        epochs: 6,
        batch_size: 64,
        learning_rate: 0.02,
        l2: 0.005,
        hash_dims: 1 << 14,
        eval_each_epoch: false,
        seed,
        ..TrainConfig::default()
    };
    let oracle = train(&corrupted, &[], &labels, &config, None).unwrap().scorer;

    // pick a sentence that still hides an entity
    let sentence = corrupted.iter().find(|s| !s.hidden().is_empty()).unwrap();
    println!("sentence: {}", sentence.sentence().tokens().join(" "));
    for span in sentence.visible() {
        println!("  visible {span}");
    }
    for span in sentence.hidden() {
        println!("  hidden  {span}");
    }

    let candidates = build_candidates(sentence.sentence(), sentence.visible());
    println!("\n{} negative candidates", candidates.len());
    let hidden_ranges: Vec<(usize, usize)> =
        sentence.hidden().iter().map(EntitySpan::range).collect();

    for temperature in [4.0, 2.0, 1.0] {
        let weights = compute_weights(&candidates, &oracle, sentence.sentence(), 8.0, temperature).unwrap();
        let mut records: Vec<_> = weights.records().to_vec();
        records.sort_by(|a, b| b.e.partial_cmp(&a.e).unwrap());
        println!("\nT = {temperature}: top candidates by e");
        for c in records.iter().take(5) {
            println!(
                "  span ({}, {})  v={:+.3} u={:.3} r={:.3} e={:.4}",
                c.span.0, c.span.1, c.v, c.u, c.r, c.e
            );
        }
        let hidden_mass: f64 = weights
            .records()
            .iter()
            .filter(|c| hidden_ranges.contains(&c.span))
            .map(|c| c.e)
            .sum();
        println!("  total e mass on hidden entity spans: {hidden_mass:.2e}");

        let k = sample_count(sentence.len(), 0.35, candidates.len());
        let draw = sample_weighted(&weights, k, &mut rng::stream(seed, "demo-draw", 0)).unwrap();
        println!("  drew {k} negatives: {:?}", draw.spans);
    }
}
