//! Train one span model with uniform negative sampling on a corrupted toy
//! corpus and watch loss, dev F1, and the missampling rate per epoch.
//!
//! Run with: cargo run --release --example train_toy

use negspan::corruption::{mask_entities, CorruptionConfig};
use negspan::toy::{generate, ToyConfig};
use negspan::trainer::{evaluate, train, TrainConfig};
use negspan::{SamplerConfig, SpanScorer};

fn main() {
    let seed = 5;
    let (gold, labels) = generate(&ToyConfig { sentences: 1000, seed, ..ToyConfig::default() });
    let (dev, _) = generate(&ToyConfig { sentences: 300, seed: seed + 1000, ..ToyConfig::default() });
    let corrupted = mask_entities(&gold, &CorruptionConfig::new(0.6, seed).unwrap()).unwrap();

    let config = TrainConfig {
        sampler: SamplerConfig { total_epochs: 10, seed, ..SamplerConfig::default() },
        epochs: 10,
        batch_size: 64,
        learning_rate: 0.02,
        l2: 0.005,
        hash_dims: 1 << 14,
        seed,
        ..TrainConfig::default()
    };
    let outcome = train(&corrupted, &dev, &labels, &config, None).unwrap();

    println!("epoch   mean loss   dev F1    gamma");
    for r in &outcome.reports {
        println!(
            "{:>5}   {:<9.4}   {:<7.4}   {:.5}",
            r.epoch,
            r.mean_loss,
            r.dev_f1.unwrap_or(f64::NAN),
            r.mean_gamma.unwrap_or(f64::NAN)
        );
    }

    let report = evaluate(&outcome.scorer, &dev).unwrap();
    println!(
        "\nfinal dev scores: P = {:.4}, R = {:.4}, F1 = {:.4}",
        report.precision, report.recall, report.f1
    );

    // a model trained on its own predictions of the dev gold
    let sample = &dev[0];
    println!("\nsample sentence: {}", sample.sentence().tokens().join(" "));
    for span in outcome.scorer.predict(sample.sentence()) {
        println!("  predicted {span}");
    }
    for span in sample.gold() {
        println!("  gold      {span}");
    }
}
