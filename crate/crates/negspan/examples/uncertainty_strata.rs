//! The uncertainty study: train an oracle on one half of a corrupted
//! corpus, rank the other half's negative candidates by entropy, and train
//! three models on the top-k / middle-k / bottom-k strata (k = ceil(lambda
//! * n), hidden spans excluded so every stratum has zero missampling).
//! High-uncertainty negatives should win.
//!
//! Run with: cargo run --release --example uncertainty_strata

use negspan::analysis::{uncertainty_strata, Stratum};
use negspan::corruption::{mask_entities, split_half, CorruptionConfig};
use negspan::toy::{generate, ToyConfig};
use negspan::trainer::{evaluate, train, train_fixed, TrainConfig};
use negspan::SamplerConfig;

fn main() {
    let seed = 1;
    let (gold, labels) = generate(&ToyConfig { sentences: 1600, seed, ..ToyConfig::default() });
    let (dev, _) = generate(&ToyConfig { sentences: 400, seed: seed + 1000, ..ToyConfig::default() });
    let corrupted = mask_entities(&gold, &CorruptionConfig::new(0.8, seed).unwrap()).unwrap();
    let (oracle_half, study_half) = split_half(&corrupted, seed).unwrap();
    println!(
        "oracle half: {} sentences, study half: {} sentences",
        oracle_half.len(),
        study_half.len()
    );

    let oracle_config = TrainConfig {
        sampler: SamplerConfig { total_epochs: 8, seed, ..SamplerConfig::default() },
        epochs: 8,
        batch_size: 64,
        learning_rate: 0.02,
        l2: 0.005,
        hash_dims: 1 << 15,
        eval_each_epoch: false,
        seed,
        ..TrainConfig::default()
    };
    let oracle = train(&oracle_half, &[], &labels, &oracle_config, None).unwrap().scorer;
    println!("oracle trained with uniform sampling on its half");

    let study_config = TrainConfig {
        epochs: 16,
        sampler: SamplerConfig { total_epochs: 16, seed, ..SamplerConfig::default() },
        ..oracle_config
    };
    for stratum in [Stratum::Top, Stratum::Middle, Stratum::Bottom] {
        let picks = uncertainty_strata(&study_half, &oracle, 0.35, stratum);
        let truncated = picks.iter().filter(|p| p.truncated).count();
        let negatives: Vec<Vec<(usize, usize)>> = picks.into_iter().map(|p| p.spans).collect();
        let out = train_fixed(&study_half, &negatives, &[], &labels, &study_config).unwrap();
        let report = evaluate(&out.scorer, &dev).unwrap();
        println!(
            "{stratum:?}: dev F1 = {:.4} (P = {:.4}, R = {:.4}; {truncated} truncated sentences)",
            report.f1, report.precision, report.recall
        );
    }
}
