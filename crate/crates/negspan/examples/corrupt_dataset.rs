//! Build a synthetic unlabeled-entity dataset: mask gold annotations with a
//! fixed probability, write the corrupted corpus plus its hidden-span
//! sidecar, and reload the pair.
//!
//! Run with: cargo run --example corrupt_dataset

use negspan::corpus::{parse_conll, to_conll_string};
use negspan::corruption::{attach_hidden, mask_entities, sidecar_to_string, CorruptionConfig};
use negspan::toy::{generate, ToyConfig};

fn main() {
    let (gold, _) = generate(&ToyConfig { sentences: 6, seed: 3, max_len: 12, ..ToyConfig::default() });
    let total: usize = gold.iter().map(|s| s.visible().len()).sum();
    println!("gold corpus: {} sentences, {total} entities", gold.len());

    let config = CorruptionConfig::new(0.7, 42).unwrap();
    let masked = mask_entities(&gold, &config).unwrap();
    let hidden: usize = masked.iter().map(|s| s.hidden().len()).sum();
    println!("after masking at p = {}: {hidden} hidden, {} still visible", config.mask_prob, total - hidden);

    let conll = to_conll_string(&masked).unwrap();
    let sidecar = sidecar_to_string(&masked);
    println!("\ncorrupted CoNLL:\n{conll}");
    println!("sidecar (sentence start end label):\n{sidecar}");

    // the pair of files reconstructs the dataset exactly
    let reparsed = parse_conll(&conll).unwrap();
    let restored = attach_hidden(reparsed, &sidecar).unwrap();
    assert_eq!(restored, masked);
    println!("reloaded corpus matches the masked one exactly");

    // same seed, same masking
    assert_eq!(mask_entities(&gold, &config).unwrap(), masked);
    println!("masking is deterministic for a fixed seed");
}
