//! Parse a small CoNLL snippet, inspect the decoded spans and the span
//! lattice, and print an entity-sparsity table for a generated corpus.
//!
//! Run with: cargo run --example parse_and_stats

use negspan::corpus::{enumerate_spans, parse_conll, sparsity_csv, sparsity_report, to_iob};
use negspan::toy::{generate, ToyConfig};

const SNIPPET: &str = "\
EU B-ORG
rejects O
German B-MISC
call O
to O
boycott O
British B-MISC
lamb O
. O

Peter B-PER
Blackburn I-PER
";

fn main() {
    let sentences = parse_conll(SNIPPET).expect("snippet is well-formed");
    for (i, s) in sentences.iter().enumerate() {
        println!("sentence {i}: {} tokens", s.len());
        for span in s.visible() {
            let phrase: Vec<&str> =
                s.sentence().tokens()[span.start..=span.end].iter().map(String::as_str).collect();
            println!("  {span}  {:?}", phrase.join(" "));
        }
        let tags = to_iob(s.sentence(), s.visible()).unwrap();
        println!("  round-trip tags: {}", tags.join(" "));
    }

    let n = sentences[0].len();
    println!("\nlattice of the first sentence: {} spans (n = {n})", enumerate_spans(n, None).len());
    println!("capped at 3 tokens: {} spans", enumerate_spans(n, Some(3)).len());

    // sparsity: entity counts stay below sqrt(length)
    let (corpus, _) = generate(&ToyConfig { sentences: 4000, seed: 7, ..ToyConfig::default() });
    let rows = sparsity_report(&corpus, 20);
    println!("\nentity sparsity over {} generated sentences:", corpus.len());
    print!("{}", sparsity_csv(&rows));
}
