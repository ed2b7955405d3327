//! The epoch loop: build candidates, pick the sampling distribution, draw
//! negatives, take cross-entropy steps on positives plus sampled negatives,
//! and evaluate per epoch.
//!
//! Negatives are resampled every epoch. In adaptive mode the sampling
//! oracle is a snapshot of the training model taken at the start of each
//! epoch, so an epoch's draws never depend on its own updates and runs are
//! bit-reproducible regardless of thread count.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{aggregate_gamma, missampling_rate, span_f1, AnalysisError, F1Report, MissamplingReport};
use crate::corpus::{AnnotatedSentence, LabelSet};
use crate::model::{HashedLinearScorer, ModelError, SpanExample, SpanScorer};
use crate::rng;
use crate::sampler::{
    build_candidates, compute_weights, sample_count, sample_uniform, sample_weighted, temperature,
    SamplerConfig, SamplerError, SamplingMode,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("weighted_fixed sampling needs an oracle scorer")]
    MissingOracle,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("entity label {0:?} is not in the label set")]
    UnknownLabel(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Everything one training run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub sampler: SamplerConfig,
    /// Epoch count `C`; must match `sampler.total_epochs`.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub hash_dims: usize,
    pub eval_each_epoch: bool,
    /// Master seed for batch shuffling; sampling streams flow from
    /// `sampler.seed`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            epochs: 16,
            batch_size: 32,
            learning_rate: crate::model::DEFAULT_LEARNING_RATE,
            l2: crate::model::DEFAULT_L2,
            hash_dims: crate::model::DEFAULT_HASH_DIMS,
            eval_each_epoch: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.sampler.validate()?;
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.epochs != self.sampler.total_epochs {
            return Err(TrainError::InvalidConfig(format!(
                "epochs ({}) must match sampler.total_epochs ({})",
                self.epochs, self.sampler.total_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(TrainError::InvalidConfig(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !self.l2.is_finite() || self.l2 < 0.0 {
            return Err(TrainError::InvalidConfig(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if self.hash_dims == 0 {
            return Err(TrainError::InvalidConfig("hash_dims must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch summary, serialized as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean cross-entropy data loss per training instance.
    pub mean_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_f1: Option<f64>,
    /// Micro-averaged missampling rate over the epoch's draws; present only
    /// when the dataset carries hidden entities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_gamma: Option<f64>,
    /// Sampling temperature; absent in uniform mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub scorer: HashedLinearScorer,
    pub reports: Vec<EpochReport>,
}

fn label_indices(
    dataset: &[AnnotatedSentence],
    labels: &LabelSet,
) -> Result<Vec<Vec<((usize, usize), usize)>>, TrainError> {
    dataset
        .iter()
        .map(|s| {
            s.visible()
                .iter()
                .map(|span| {
                    labels
                        .index_of(&span.label)
                        .map(|idx| (span.range(), idx))
                        .ok_or_else(|| TrainError::UnknownLabel(span.label.clone()))
                })
                .collect()
        })
        .collect()
}

/// Train a fresh scorer. Per epoch and sentence: build the candidate set,
/// draw `k = ceil(lambda * n)` negatives under the configured distribution,
/// and take Adam steps on shuffled batches of positives plus negatives.
/// `fixed_oracle` is required for [`SamplingMode::WeightedFixed`] and
/// ignored otherwise.
pub fn train(
    dataset: &[AnnotatedSentence],
    dev: &[AnnotatedSentence],
    labels: &LabelSet,
    config: &TrainConfig,
    fixed_oracle: Option<&HashedLinearScorer>,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.sampler.mode == SamplingMode::WeightedFixed && fixed_oracle.is_none() {
        return Err(TrainError::MissingOracle);
    }

    let positives = label_indices(dataset, labels)?;
    let candidates: Vec<_> =
        dataset.iter().map(|s| build_candidates(s.sentence(), s.visible())).collect();
    let draw_counts: Vec<usize> = dataset
        .iter()
        .zip(&candidates)
        .map(|(s, c)| sample_count(s.len(), config.sampler.lambda, c.len()))
        .collect();
    let has_hidden = dataset.iter().any(|s| !s.hidden().is_empty());

    let mut scorer =
        HashedLinearScorer::with_config(labels.clone(), config.hash_dims, config.learning_rate, config.l2);
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let epoch_temperature = match config.sampler.mode {
            SamplingMode::Uniform => None,
            _ => Some(temperature(config.epochs, epoch)?),
        };

        // draw this epoch's negatives
        let sampled: Vec<Vec<(usize, usize)>> = match config.sampler.mode {
            SamplingMode::Uniform => dataset
                .iter()
                .enumerate()
                .map(|(i, _)| {
                    let mut stream =
                        rng::stream2(config.sampler.seed, "negatives", epoch as u64, i as u64);
                    sample_uniform(candidates[i].spans(), draw_counts[i], &mut stream)
                })
                .collect::<Result<_, _>>()?,
            SamplingMode::WeightedFixed | SamplingMode::WeightedAdaptive => {
                let snapshot;
                let oracle: &HashedLinearScorer = match config.sampler.mode {
                    SamplingMode::WeightedFixed => fixed_oracle.expect("checked above"),
                    _ => {
                        snapshot = scorer.clone();
                        &snapshot
                    }
                };
                let t = epoch_temperature.expect("weighted modes are scheduled");
                (0..dataset.len())
                    .into_par_iter()
                    .map(|i| {
                        if candidates[i].is_empty() {
                            return Ok(Vec::new());
                        }
                        let weights = compute_weights(
                            &candidates[i],
                            oracle,
                            dataset[i].sentence(),
                            config.sampler.mu,
                            t,
                        )?;
                        let mut stream =
                            rng::stream2(config.sampler.seed, "negatives", epoch as u64, i as u64);
                        Ok(sample_weighted(&weights, draw_counts[i], &mut stream)?.spans)
                    })
                    .collect::<Result<_, TrainError>>()?
            }
        };

        let mean_gamma = if has_hidden {
            let per_sentence: Vec<MissamplingReport> = dataset
                .iter()
                .zip(&sampled)
                .map(|(s, draw)| missampling_rate(draw, s.hidden()))
                .collect();
            Some(aggregate_gamma(&per_sentence).micro)
        } else {
            None
        };

        // assemble and shuffle this epoch's training instances
        let mut instances: Vec<SpanExample<'_>> = Vec::new();
        for (i, sentence) in dataset.iter().enumerate() {
            for &(span, label) in &positives[i] {
                instances.push(SpanExample { sentence: sentence.sentence(), span, label });
            }
            for &span in &sampled[i] {
                instances.push(SpanExample {
                    sentence: sentence.sentence(),
                    span,
                    label: LabelSet::O_INDEX,
                });
            }
        }
        instances.shuffle(&mut rng::stream2(config.seed, "shuffle", epoch as u64, 0));

        let mut loss_total = 0.0;
        for batch in instances.chunks(config.batch_size) {
            loss_total += scorer.train_step(batch)?;
        }
        let mean_loss = if instances.is_empty() { 0.0 } else { loss_total / instances.len() as f64 };

        let dev_f1 = if config.eval_each_epoch && !dev.is_empty() {
            Some(evaluate(&scorer, dev)?.f1)
        } else {
            None
        };

        reports.push(EpochReport {
            epoch,
            mean_loss,
            dev_f1,
            mean_gamma,
            temperature: epoch_temperature,
        });
    }

    Ok(TrainOutcome { scorer, reports })
}

/// Train on externally chosen, fixed per-sentence negative sets (for
/// instance the uncertainty strata). Negatives are not resampled; batches
/// are reshuffled each epoch. Temperature does not apply.
pub fn train_fixed(
    dataset: &[AnnotatedSentence],
    negatives: &[Vec<(usize, usize)>],
    dev: &[AnnotatedSentence],
    labels: &LabelSet,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if dataset.len() != negatives.len() {
        return Err(TrainError::InvalidConfig(format!(
            "negatives supplied for {} sentences, dataset has {}",
            negatives.len(),
            dataset.len()
        )));
    }
    let positives = label_indices(dataset, labels)?;
    let has_hidden = dataset.iter().any(|s| !s.hidden().is_empty());
    let mean_gamma = if has_hidden {
        let per_sentence: Vec<MissamplingReport> = dataset
            .iter()
            .zip(negatives)
            .map(|(s, draw)| missampling_rate(draw, s.hidden()))
            .collect();
        Some(aggregate_gamma(&per_sentence).micro)
    } else {
        None
    };

    let mut scorer =
        HashedLinearScorer::with_config(labels.clone(), config.hash_dims, config.learning_rate, config.l2);
    let mut reports = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut instances: Vec<SpanExample<'_>> = Vec::new();
        for (i, sentence) in dataset.iter().enumerate() {
            for &(span, label) in &positives[i] {
                instances.push(SpanExample { sentence: sentence.sentence(), span, label });
            }
            for &span in &negatives[i] {
                instances.push(SpanExample {
                    sentence: sentence.sentence(),
                    span,
                    label: LabelSet::O_INDEX,
                });
            }
        }
        instances.shuffle(&mut rng::stream2(config.seed, "shuffle", epoch as u64, 0));
        let mut loss_total = 0.0;
        for batch in instances.chunks(config.batch_size) {
            loss_total += scorer.train_step(batch)?;
        }
        let mean_loss = if instances.is_empty() { 0.0 } else { loss_total / instances.len() as f64 };
        let dev_f1 = if config.eval_each_epoch && !dev.is_empty() {
            Some(evaluate(&scorer, dev)?.f1)
        } else {
            None
        };
        reports.push(EpochReport { epoch, mean_loss, dev_f1, mean_gamma, temperature: None });
    }
    Ok(TrainOutcome { scorer, reports })
}

/// Predict every sentence and score against `visible ∪ hidden` as gold.
pub fn evaluate<S: SpanScorer + Sync + ?Sized>(
    scorer: &S,
    dataset: &[AnnotatedSentence],
) -> Result<F1Report, TrainError> {
    let predicted: Vec<_> =
        dataset.par_iter().map(|s| scorer.predict(s.sentence())).collect();
    let gold: Vec<_> = dataset.iter().map(|s| s.gold()).collect();
    span_f1(&predicted, &gold).map_err(Into::into)
}

/// Trend summary for one sampling mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTrend {
    pub mode: SamplingMode,
    pub final_f1: f64,
    /// First epoch (0-based) whose dev F1 reaches 95% of the run's final F1.
    pub epochs_to_threshold: usize,
    /// Mean of per-epoch micro missampling rates, when hidden entities exist.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_gamma: Option<f64>,
    pub epochs: Vec<EpochReport>,
}

fn summarize(mode: SamplingMode, reports: Vec<EpochReport>) -> Result<ModeTrend, TrainError> {
    let final_f1 = reports
        .last()
        .and_then(|r| r.dev_f1)
        .ok_or_else(|| TrainError::InvalidConfig("trend comparison needs per-epoch dev F1".into()))?;
    let threshold = 0.95 * final_f1;
    let epochs_to_threshold = reports
        .iter()
        .position(|r| r.dev_f1.is_some_and(|f| f >= threshold))
        .unwrap_or(reports.len().saturating_sub(1));
    let gammas: Vec<f64> = reports.iter().filter_map(|r| r.mean_gamma).collect();
    let mean_gamma =
        if gammas.is_empty() { None } else { Some(gammas.iter().sum::<f64>() / gammas.len() as f64) };
    Ok(ModeTrend { mode, final_f1, epochs_to_threshold, mean_gamma, epochs: reports })
}

/// Paired uniform vs weighted-adaptive runs with shared seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub uniform: ModeTrend,
    pub weighted_adaptive: ModeTrend,
}

/// Run [`train`] once per mode (uniform, weighted adaptive) with identical
/// seeds and data, and summarize convergence and missampling per mode.
pub fn compare_samplers(
    dataset: &[AnnotatedSentence],
    dev: &[AnnotatedSentence],
    labels: &LabelSet,
    base: &TrainConfig,
) -> Result<TrendReport, TrainError> {
    if dev.is_empty() {
        return Err(TrainError::InvalidConfig("trend comparison needs a dev set".into()));
    }
    let mut config = base.clone();
    config.eval_each_epoch = true;

    config.sampler.mode = SamplingMode::Uniform;
    let uniform = train(dataset, dev, labels, &config, None)?;

    config.sampler.mode = SamplingMode::WeightedAdaptive;
    let weighted = train(dataset, dev, labels, &config, None)?;

    Ok(TrendReport {
        uniform: summarize(SamplingMode::Uniform, uniform.reports)?,
        weighted_adaptive: summarize(SamplingMode::WeightedAdaptive, weighted.reports)?,
    })
}
