//! Negative sampling for span-based named entity recognition under
//! incomplete annotation.
//!
//! When a corpus misses some of its true entities, every unannotated entity
//! span looks like a negative, and training on all `n(n+1)/2` spans of each
//! sentence teaches the model to suppress real entities. Sampling a small
//! set of `ceil(lambda * n)` negatives per sentence sidesteps most of that
//! damage; this crate implements the machinery around that idea:
//!
//! - [`corpus`]: CoNLL IOB2 parsing/writing, the span lattice, and
//!   entity-sparsity statistics.
//! - [`corruption`]: synthetic unlabeled-entity datasets by masking gold
//!   annotations, plus held-out splits.
//! - [`model`]: a hashed-feature linear softmax span scorer trained with
//!   Adam, and greedy span decoding.
//! - [`sampler`]: negative candidate sets, uniform draws, and the weighted
//!   distribution `e = softmax(u * (1 + v)^mu / T)` with the
//!   `T = sqrt(C - c)` schedule.
//! - [`analysis`]: missampling rate, the exact zero-missampling probability
//!   `q = prod (1 - h / (n(n+1)/2 - m - i))`, its closed-form lower bound
//!   `1 - 4 lambda sqrt(n) / (n - 1)`, Monte Carlo verification,
//!   uncertainty strata, and span F1.
//! - [`trainer`]: the epoch loop tying it all together, with uniform,
//!   fixed-oracle weighted, and adaptive weighted sampling.
//! - [`toy`]: planted synthetic corpora so experiments run without any
//!   licensed data.
//! - [`cli`]: the `negspan` binary's command implementations.
//!
//! Start with the `examples/` directory: each file is a runnable walkthrough
//! of one capability.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod corruption;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod toy;
pub mod trainer;

pub use analysis::{BoundReport, F1Report, MissamplingReport, Stratum};
pub use corpus::{AnnotatedSentence, EntitySpan, LabelSet, Sentence};
pub use corruption::CorruptionConfig;
pub use model::{HashedLinearScorer, LabelDistribution, SpanExample, SpanScorer};
pub use sampler::{NegativeCandidateSet, SamplerConfig, SamplingMode, SamplingWeights};
pub use trainer::{EpochReport, TrainConfig, TrainOutcome, TrendReport};
