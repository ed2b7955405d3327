//! The command-line pipeline: `corrupt`, `stats`, `train`, `compare`,
//! `eval`, and `verify-bound`.
//!
//! Every command takes a single master seed and emits its fully resolved
//! configuration next to its outputs, so reruns are byte-identical. Exit
//! codes: 0 on success, 2 on configuration errors, 3 on data errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, bound_csv_header, bound_csv_row};
use crate::corpus::{self, AnnotatedSentence, LabelSet};
use crate::corruption::{self, CorruptionConfig};
use crate::model::HashedLinearScorer;
use crate::sampler::{SamplerConfig, SamplingMode};
use crate::trainer::{self, TrainConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn data_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "negspan", version, about = "Negative sampling toolkit for span-based NER under incomplete annotation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Cap the worker thread count (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mask gold entities with probability p; write corrupted CoNLL plus a
    /// hidden-span sidecar.
    Corrupt(CorruptArgs),
    /// Entity-sparsity statistics of a corpus as CSV.
    Stats(StatsArgs),
    /// Train one model from a TOML run config.
    Train(TrainArgs),
    /// Paired uniform vs weighted-adaptive runs from a TOML run config.
    Compare(TrainArgs),
    /// Score a checkpoint against an annotated corpus.
    Eval(EvalArgs),
    /// Monte Carlo sweep of the zero-missampling probability bound.
    VerifyBound(VerifyBoundArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CorruptArgs {
    /// Input CoNLL file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output CoNLL file.
    #[arg(long)]
    pub output: PathBuf,
    /// Sidecar path for hidden spans (default: <output>.hidden).
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Masking probability in [0, 1].
    #[arg(long)]
    pub prob: f64,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Input CoNLL file.
    #[arg(long)]
    pub input: PathBuf,
    /// Optional hidden-span sidecar to include in entity counts.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Drop lengths supported by fewer sentences than this.
    #[arg(long, default_value_t = 20)]
    pub min_support: usize,
    /// Output CSV path.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// TOML run config (see RunConfig in the library docs).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config file's sampling mode.
    #[arg(long)]
    pub mode: Option<String>,
    /// Override the config file's output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Annotated CoNLL data.
    #[arg(long)]
    pub data: PathBuf,
    /// Optional hidden-span sidecar; hidden spans count as gold.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Output JSON path.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyBoundArgs {
    /// Sentence lengths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Sampling ratios, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// Visible entity count per trial (default 0).
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    /// Hidden entity count per trial (default: floor(sqrt(n))).
    #[arg(long)]
    pub h: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    pub output: PathBuf,
}

/// A train/compare run configuration, loaded from TOML. Unknown keys are
/// rejected by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub train_path: PathBuf,
    #[serde(default)]
    pub hidden_path: Option<PathBuf>,
    #[serde(default)]
    pub dev_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default = "defaults::mode")]
    pub mode: SamplingMode,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::mu")]
    pub mu: f64,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::l2")]
    pub l2: f64,
    #[serde(default = "defaults::hash_dims")]
    pub hash_dims: usize,
    #[serde(default = "defaults::eval_each_epoch")]
    pub eval_each_epoch: bool,
    /// Frozen oracle checkpoint, required for mode = "weighted_fixed".
    #[serde(default)]
    pub oracle_path: Option<PathBuf>,
}

mod defaults {
    use crate::sampler::SamplingMode;

    pub fn mode() -> SamplingMode {
        SamplingMode::Uniform
    }
    pub fn lambda() -> f64 {
        0.35
    }
    pub fn mu() -> f64 {
        8.0
    }
    pub fn epochs() -> usize {
        16
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn learning_rate() -> f64 {
        crate::model::DEFAULT_LEARNING_RATE
    }
    pub fn l2() -> f64 {
        crate::model::DEFAULT_L2
    }
    pub fn hash_dims() -> usize {
        crate::model::DEFAULT_HASH_DIMS
    }
    pub fn eval_each_epoch() -> bool {
        true
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(config_err)
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            sampler: SamplerConfig {
                lambda: self.lambda,
                mu: self.mu,
                total_epochs: self.epochs,
                mode: self.mode,
                seed: self.seed,
            },
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            l2: self.l2,
            hash_dims: self.hash_dims,
            eval_each_epoch: self.eval_each_epoch,
            seed: self.seed,
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match cli.threads {
        Some(threads) if threads > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(config_err)?;
            pool.install(|| dispatch(&cli.command))
        }
        Some(_) => Err(CliError::Config("--threads must be positive".into())),
        None => dispatch(&cli.command),
    }
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Corrupt(args) => cmd_corrupt(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Train(args) => cmd_train(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Eval(args) => cmd_eval(args),
        Command::VerifyBound(args) => cmd_verify_bound(args),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| data_err(&format!("reading {}", path.display()), e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| data_err(&format!("creating {}", parent.display()), e))?;
        }
    }
    fs::write(path, contents).map_err(|e| data_err(&format!("writing {}", path.display()), e))
}

/// The resolved-config sidecar for a data output at `path`.
fn config_sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".config.toml");
    path.with_file_name(name)
}

fn emit_resolved_config(anchor: &Path, resolved: &impl Serialize) -> Result<(), CliError> {
    let text = toml::to_string_pretty(resolved).map_err(config_err)?;
    write_file(&config_sidecar_path(anchor), text)
}

fn load_corpus(path: &Path, sidecar: Option<&Path>) -> Result<Vec<AnnotatedSentence>, CliError> {
    let text = read_file(path)?;
    let sentences = corpus::parse_conll(&text)
        .map_err(|e| data_err(&format!("parsing {}", path.display()), e))?;
    match sidecar {
        None => Ok(sentences),
        Some(sc) => {
            let sidecar_text = read_file(sc)?;
            corruption::attach_hidden(sentences, &sidecar_text)
                .map_err(|e| data_err(&format!("attaching {}", sc.display()), e))
        }
    }
}

fn cmd_corrupt(args: &CorruptArgs) -> Result<(), CliError> {
    let config = CorruptionConfig::new(args.prob, args.seed).map_err(config_err)?;
    let dataset = load_corpus(&args.input, None)?;
    let masked = corruption::mask_entities(&dataset, &config)
        .map_err(|e| data_err("masking", e))?;
    let conll = corpus::to_conll_string(&masked).map_err(|e| data_err("encoding output", e))?;
    let sidecar_path =
        args.sidecar.clone().unwrap_or_else(|| args.output.with_extension("hidden"));

    #[derive(Serialize)]
    struct Resolved<'a> {
        command: &'a str,
        input: &'a Path,
        output: &'a Path,
        sidecar: &'a Path,
        prob: f64,
        seed: u64,
    }
    write_file(&args.output, conll)?;
    write_file(&sidecar_path, corruption::sidecar_to_string(&masked))?;
    emit_resolved_config(
        &args.output,
        &Resolved {
            command: "corrupt",
            input: &args.input,
            output: &args.output,
            sidecar: &sidecar_path,
            prob: args.prob,
            seed: args.seed,
        },
    )
}

fn cmd_stats(args: &StatsArgs) -> Result<(), CliError> {
    if args.min_support == 0 {
        return Err(CliError::Config("min_support must be >= 1".into()));
    }
    let dataset = load_corpus(&args.input, args.sidecar.as_deref())?;
    if dataset.is_empty() {
        return Err(CliError::Data(format!("{} holds no sentences", args.input.display())));
    }
    let rows = corpus::sparsity_report(&dataset, args.min_support);
    write_file(&args.output, corpus::sparsity_csv(&rows))?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        command: &'a str,
        #[serde(flatten)]
        args: &'a StatsArgs,
    }
    emit_resolved_config(&args.output, &Resolved { command: "stats", args })
}

/// Shared setup for train and compare: load config + data, resolve labels.
struct RunInputs {
    config: RunConfig,
    train_data: Vec<AnnotatedSentence>,
    dev_data: Vec<AnnotatedSentence>,
    labels: LabelSet,
}

fn load_run_inputs(args: &TrainArgs) -> Result<RunInputs, CliError> {
    let mut config = RunConfig::from_toml(&read_file(&args.config)?)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = &args.mode {
        config.mode = match mode.as_str() {
            "uniform" => SamplingMode::Uniform,
            "weighted_fixed" => SamplingMode::WeightedFixed,
            "weighted_adaptive" => SamplingMode::WeightedAdaptive,
            other => return Err(CliError::Config(format!("unknown mode {other:?}"))),
        };
    }
    if let Some(out_dir) = &args.out_dir {
        config.out_dir = out_dir.clone();
    }
    config.train_config().validate().map_err(config_err)?;

    let train_data = load_corpus(&config.train_path, config.hidden_path.as_deref())?;
    if train_data.is_empty() {
        return Err(CliError::Data(format!("{} holds no sentences", config.train_path.display())));
    }
    let dev_data = match &config.dev_path {
        Some(path) => load_corpus(path, None)?,
        None => Vec::new(),
    };
    let mut all: Vec<AnnotatedSentence> = train_data.clone();
    all.extend(dev_data.iter().cloned());
    let labels = LabelSet::from_sentences(&all)
        .map_err(|e| data_err("collecting labels", e))?;
    Ok(RunInputs { config, train_data, dev_data, labels })
}

fn jsonl(reports: &[trainer::EpochReport]) -> Result<String, CliError> {
    let mut out = String::new();
    for report in reports {
        out.push_str(&serde_json::to_string(report).map_err(config_err)?);
        out.push('\n');
    }
    Ok(out)
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let inputs = load_run_inputs(args)?;
    let config = &inputs.config;
    let oracle = match (config.mode, &config.oracle_path) {
        (SamplingMode::WeightedFixed, None) => {
            return Err(CliError::Config("mode weighted_fixed requires oracle_path".into()))
        }
        (SamplingMode::WeightedFixed, Some(path)) => Some(
            HashedLinearScorer::load_from_path(path)
                .map_err(|e| data_err(&format!("loading oracle {}", path.display()), e))?,
        ),
        _ => None,
    };
    let outcome = trainer::train(
        &inputs.train_data,
        &inputs.dev_data,
        &inputs.labels,
        &config.train_config(),
        oracle.as_ref(),
    )
    .map_err(|e| data_err("training", e))?;

    let out_dir = &config.out_dir;
    write_file(&out_dir.join("epochs.jsonl"), jsonl(&outcome.reports)?)?;
    let ckpt_path = out_dir.join("model.ckpt");
    outcome
        .scorer
        .save_to_path(&ckpt_path)
        .map_err(|e| data_err(&format!("writing {}", ckpt_path.display()), e))?;
    let resolved = toml::to_string_pretty(config).map_err(config_err)?;
    write_file(&out_dir.join("config_resolved.toml"), resolved)
}

fn cmd_compare(args: &TrainArgs) -> Result<(), CliError> {
    let inputs = load_run_inputs(args)?;
    let config = &inputs.config;
    if inputs.dev_data.is_empty() {
        return Err(CliError::Config("compare requires dev_path".into()));
    }
    let trend = trainer::compare_samplers(
        &inputs.train_data,
        &inputs.dev_data,
        &inputs.labels,
        &config.train_config(),
    )
    .map_err(|e| data_err("comparing samplers", e))?;

    let out_dir = &config.out_dir;
    write_file(&out_dir.join("epochs_uniform.jsonl"), jsonl(&trend.uniform.epochs)?)?;
    write_file(
        &out_dir.join("epochs_weighted_adaptive.jsonl"),
        jsonl(&trend.weighted_adaptive.epochs)?,
    )?;
    let trend_json = serde_json::to_string_pretty(&trend).map_err(config_err)?;
    write_file(&out_dir.join("trend.json"), trend_json)?;
    let resolved = toml::to_string_pretty(config).map_err(config_err)?;
    write_file(&out_dir.join("config_resolved.toml"), resolved)
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let scorer = HashedLinearScorer::load_from_path(&args.model)
        .map_err(|e| data_err(&format!("loading {}", args.model.display()), e))?;
    let dataset = load_corpus(&args.data, args.sidecar.as_deref())?;
    if dataset.is_empty() {
        return Err(CliError::Data(format!("{} holds no sentences", args.data.display())));
    }
    let report = trainer::evaluate(&scorer, &dataset).map_err(|e| data_err("evaluating", e))?;
    write_file(&args.output, serde_json::to_string_pretty(&report).map_err(config_err)?)?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        command: &'a str,
        #[serde(flatten)]
        args: &'a EvalArgs,
    }
    emit_resolved_config(&args.output, &Resolved { command: "eval", args })
}

fn cmd_verify_bound(args: &VerifyBoundArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Config("trials must be >= 1".into()));
    }
    for &n in &args.n {
        if n < 2 {
            return Err(CliError::Config(format!("n must be >= 2, got {n}")));
        }
    }
    for &lambda in &args.lambda {
        if !lambda.is_finite() || lambda <= 0.0 || lambda >= 1.0 {
            return Err(CliError::Config(format!("lambda must be in (0, 1), got {lambda}")));
        }
    }
    let mut csv = String::from(bound_csv_header());
    let mut row_index = 0u64;
    for &n in &args.n {
        let h = args.h.unwrap_or_else(|| (n as f64).sqrt().floor() as usize);
        for &lambda in &args.lambda {
            let report = analysis::monte_carlo_bound_check(
                n,
                lambda,
                h,
                args.m,
                args.trials,
                // one stream family per row keeps rows independent
                args.seed.wrapping_add(row_index.wrapping_mul(0x9e37_79b9)),
            )
            .map_err(|e| CliError::Config(format!("row n={n} lambda={lambda}: {e}")))?;
            csv.push_str(&bound_csv_row(&report));
            row_index += 1;
        }
    }
    write_file(&args.output, csv)?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        command: &'a str,
        #[serde(flatten)]
        args: &'a VerifyBoundArgs,
    }
    emit_resolved_config(&args.output, &Resolved { command: "verify-bound", args })
}
