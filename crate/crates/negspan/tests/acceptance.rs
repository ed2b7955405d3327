//! The acceptance gate: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test -p negspan --test acceptance -- --nocapture`.

use std::collections::BTreeSet;
use std::fs;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use negspan::analysis::{
    exact_zero_missample_prob, monte_carlo_bound_check, span_f1, theorem_bound,
    uncertainty_strata, Stratum,
};
use negspan::corpus::{to_conll_string, to_iob, EntitySpan, LabelSet, Sentence};
use negspan::corruption::{mask_entities, split_half, CorruptionConfig};
use negspan::model::{HashedLinearScorer, SpanExample};
use negspan::rng;
use negspan::sampler::{
    build_candidates, compute_weights, sample_weighted, temperature, CandidateWeight,
    SamplerConfig, SamplingWeights,
};
use negspan::toy::{generate, ToyConfig};
use negspan::trainer::{
    compare_samplers, evaluate, train, train_fixed, ModeTrend, TrainConfig, TrendReport,
};

fn conclude(criterion: &str, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    while r * r > n {
        r -= 1;
    }
    r
}

#[test]
fn criterion_01_exact_bound_sweep() {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst_margin = f64::INFINITY;
    for n in 2..=200usize {
        let root = isqrt(n);
        for lambda in [0.1, 0.35, 0.7] {
            let bound = theorem_bound(n, lambda).unwrap();
            let k = (lambda * n as f64).ceil() as usize;
            for total in 0..=root {
                for m in 0..=total {
                    let h = total - m;
                    let q = exact_zero_missample_prob(n, m, h, k).unwrap();
                    assert!(
                        q >= bound,
                        "q = {q} < bound = {bound} at n={n} lambda={lambda} m={m} h={h}"
                    );
                    worst_margin = worst_margin.min(q - bound);
                    checked += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    conclude(
        "01 exact zero-missampling bound sweep",
        elapsed.as_secs_f64() < 10.0,
        &format!("{checked} (n, lambda, m, h) cases, worst margin {worst_margin:.4}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_monte_carlo_bound() {
    let start = Instant::now();
    let trials = 100_000;
    let mut detail = String::new();
    for n in [20usize, 50, 100] {
        let h = isqrt(n);
        let report = monte_carlo_bound_check(n, 0.35, h, 0, trials, 2026).unwrap();
        assert!(report.in_premise);
        assert!(
            report.bound_satisfied(),
            "n={n}: empirical {} < bound {} - tol {}",
            report.empirical_prob,
            report.lower_bound,
            report.tolerance
        );
        detail.push_str(&format!("n={n}: {:.4}>={:.4}; ", report.empirical_prob, report.lower_bound));
    }
    // the fixture with exact q = 2/3
    let fixture = monte_carlo_bound_check(3, 0.35, 1, 0, trials, 2026).unwrap();
    assert_eq!(fixture.k, 2);
    assert_eq!(fixture.exact_q, 2.0 / 3.0);
    let deviation = (fixture.empirical_prob - 2.0 / 3.0).abs();
    let elapsed = start.elapsed();
    conclude(
        "02 Monte Carlo bound check",
        deviation < 0.005 && elapsed.as_secs_f64() < 60.0,
        &format!("{detail}fixture |emp - 2/3| = {deviation:.5}, {elapsed:.2?}"),
    );
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let mut out: u64 = 1;
    for i in 0..k {
        out = out * (n - i) as u64 / (i + 1) as u64;
    }
    out
}

#[test]
fn criterion_03_hypergeometric_oracle() {
    // brute force: enumerate every k-subset of |S| candidates and count the
    // ones avoiding the h designated entities
    fn brute_force(s: usize, h: usize, k: usize) -> f64 {
        let indices: Vec<usize> = (0..s).collect();
        let mut total = 0u64;
        let mut clean = 0u64;
        let mut subset = vec![0usize; k];
        fn walk(
            indices: &[usize],
            subset: &mut Vec<usize>,
            depth: usize,
            from: usize,
            h: usize,
            total: &mut u64,
            clean: &mut u64,
        ) {
            if depth == subset.len() {
                *total += 1;
                if subset.iter().all(|&i| i >= h) {
                    *clean += 1;
                }
                return;
            }
            for i in from..indices.len() {
                subset[depth] = indices[i];
                walk(indices, subset, depth + 1, i + 1, h, total, clean);
            }
        }
        if k == 0 {
            return 1.0;
        }
        walk(&indices, &mut subset, 0, 0, h, &mut total, &mut clean);
        clean as f64 / total as f64
    }

    let mut cases = 0usize;
    for s in 1..=12usize {
        // n = 5 gives a 15-span lattice; m = 15 - s leaves |S| = s
        let m = 15 - s;
        for h in 0..=3.min(s) {
            for k in 0..=5.min(s) {
                let got = exact_zero_missample_prob(5, m, h, k).unwrap();
                let via_binomials = if k > s - h {
                    0.0
                } else {
                    binomial(s - h, k) as f64 / binomial(s, k) as f64
                };
                assert_eq!(got, via_binomials, "binomial ratio mismatch at s={s} h={h} k={k}");
                assert_eq!(got, brute_force(s, h, k), "enumeration mismatch at s={s} h={h} k={k}");
                cases += 1;
            }
        }
    }
    conclude("03 hypergeometric oracle equality", true, &format!("{cases} cases exact"));
}

fn weights_from_e(e: &[f64]) -> SamplingWeights {
    let records = e
        .iter()
        .enumerate()
        .map(|(i, &e)| CandidateWeight { span: (i, i), v: 0.0, u: 0.0, r: 0.0, e })
        .collect();
    SamplingWeights::new(records, 1.0).unwrap()
}

#[test]
fn criterion_04_weighted_sampler_correctness() {
    // two-candidate fixture: r = (ln 2, 0) at T = 1 gives e = (2/3, 1/3)
    let ln2 = 2.0f64.ln();
    let total = ln2.exp() + 1.0;
    let e_a = ln2.exp() / total;
    assert!((e_a - 2.0 / 3.0).abs() < 1e-12);
    let fixture = weights_from_e(&[e_a, 1.0 - e_a]);
    let mut stream = rng::stream(404, "acceptance-two", 0);
    let draws = 90_000;
    let mut first = 0usize;
    for _ in 0..draws {
        if sample_weighted(&fixture, 1, &mut stream).unwrap().spans == vec![(0, 0)] {
            first += 1;
        }
    }
    let freq = first as f64 / draws as f64;
    let freq_ok = (freq - 2.0 / 3.0).abs() < 0.01;

    // chi-square on random 10-candidate distributions, alpha = 0.001
    let critical = ChiSquared::new(9.0).unwrap().inverse_cdf(0.999);
    let mut chi_detail = String::new();
    let mut chi_ok = true;
    for instance in 0..3u64 {
        let mut gen_stream = rng::stream(405, "acceptance-chi-e", instance);
        let raw: Vec<f64> = (0..10).map(|_| gen_stream.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let e: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let weights = weights_from_e(&e);
        let mut draw_stream = rng::stream(406, "acceptance-chi-draws", instance);
        let draws = 100_000usize;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            let span = sample_weighted(&weights, 1, &mut draw_stream).unwrap().spans[0];
            counts[span.0] += 1;
        }
        let statistic: f64 = counts
            .iter()
            .zip(&e)
            .map(|(&c, &p)| {
                let expected = p * draws as f64;
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        chi_ok &= statistic < critical;
        chi_detail.push_str(&format!("chi2[{instance}]={statistic:.2}; "));
    }
    conclude(
        "04 weighted sampler correctness",
        freq_ok && chi_ok,
        &format!("freq(A) = {freq:.4} vs 2/3; {chi_detail}critical = {critical:.2}"),
    );
}

#[test]
fn criterion_05_softmax_and_temperature_properties() {
    let labels = LabelSet::new(["PER", "ORG", "LOC"]).unwrap();
    let mut scorer = HashedLinearScorer::with_config(labels, 512, 0.05, 0.0);
    let mut stream = rng::stream(505, "acceptance-softmax", 0);
    let mut max_sum_error = 0.0f64;
    for _ in 0..10_000 {
        for w in scorer.weights_mut() {
            *w = stream.gen_range(-5.0..5.0);
        }
        let n = stream.gen_range(2..8usize);
        let tokens: Vec<String> = (0..n).map(|i| format!("t{}{i}", stream.gen_range(0..50u32))).collect();
        let sentence = Sentence::new(tokens).unwrap();
        let candidates = build_candidates(&sentence, &BTreeSet::new());
        let mu = stream.gen_range(1.0..12.0);
        let t = stream.gen_range(1.0..6.0);
        let weights = compute_weights(&candidates, &scorer, &sentence, mu, t).unwrap();
        let sum: f64 = weights.records().iter().map(|c| c.e).sum();
        max_sum_error = max_sum_error.max((sum - 1.0).abs());
        assert!(weights.records().iter().all(|c| c.e >= 0.0));
    }
    let sums_ok = max_sum_error < 1e-6;

    // schedule endpoints are exact
    let mut endpoints_ok = temperature(16, 0).unwrap() == 4.0 && temperature(4, 0).unwrap() == 2.0;
    for c in 1..=50usize {
        endpoints_ok &= temperature(c, c - 1).unwrap() == 1.0;
        endpoints_ok &= temperature(c, 0).unwrap() == (c as f64).sqrt();
    }

    // high-temperature limit collapses to uniform
    let sentence = Sentence::new(["a", "b", "c", "d", "e"]).unwrap();
    let candidates = build_candidates(&sentence, &BTreeSet::new());
    for w in scorer.weights_mut() {
        *w = stream.gen_range(-5.0..5.0);
    }
    let weights = compute_weights(&candidates, &scorer, &sentence, 8.0, 1e6).unwrap();
    let uniform = 1.0 / candidates.len() as f64;
    let max_uniform_gap = weights
        .records()
        .iter()
        .map(|c| (c.e - uniform).abs())
        .fold(0.0f64, f64::max);
    conclude(
        "05 softmax and temperature properties",
        sums_ok && endpoints_ok && max_uniform_gap < 1e-5,
        &format!(
            "max |sum(e) - 1| = {max_sum_error:.2e}, high-T gap = {max_uniform_gap:.2e}, endpoints exact = {endpoints_ok}"
        ),
    );
}

#[test]
fn criterion_06_gradient_check() {
    let mut worst_rel = 0.0f64;
    for instance in 0..100u64 {
        let mut stream = rng::stream(606, "acceptance-grad", instance);
        let label_count = stream.gen_range(1..5usize);
        let labels =
            LabelSet::new((0..label_count).map(|i| format!("L{i}"))).unwrap();
        let mut scorer = HashedLinearScorer::with_config(labels, 64, 0.05, 0.0);
        for w in scorer.weights_mut() {
            *w = stream.gen_range(-1.5..1.5);
        }
        let n = stream.gen_range(2..7usize);
        let tokens: Vec<String> =
            (0..n).map(|i| format!("w{}{i}", stream.gen_range(0..40u32))).collect();
        let sentence = Sentence::new(tokens).unwrap();
        let spans = negspan::corpus::enumerate_spans(n, None);
        let batch: Vec<SpanExample> = (0..stream.gen_range(1..5usize))
            .map(|_| SpanExample {
                sentence: &sentence,
                span: spans[stream.gen_range(0..spans.len())],
                label: stream.gen_range(0..label_count + 1),
            })
            .collect();
        let mut grad = vec![0.0; scorer.weights().len()];
        scorer.loss_gradient(&batch, &mut grad);
        let h = 1e-5;
        for i in 0..scorer.weights().len() {
            let orig = scorer.weights()[i];
            scorer.weights_mut()[i] = orig + h;
            let plus = scorer.loss(&batch);
            scorer.weights_mut()[i] = orig - h;
            let minus = scorer.loss(&batch);
            scorer.weights_mut()[i] = orig;
            let fd = (plus - minus) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-4, "instance {instance} weight {i}: analytic {} vs fd {fd}", grad[i]);
            worst_rel = worst_rel.max(rel);
        }
    }
    conclude(
        "06 analytic gradient vs central differences",
        true,
        &format!("100 instances, worst relative error {worst_rel:.2e}"),
    );
}

/// Independent reference scorer: encode both sides as IOB2 tags, decode the
/// tags with its own run decoder, and count exact tuple matches.
fn iob_reference_f1(
    predicted: &[BTreeSet<EntitySpan>],
    gold: &[BTreeSet<EntitySpan>],
    sentences: &[Sentence],
) -> (f64, f64, f64) {
    fn decode(tags: &[String]) -> Vec<(usize, usize, String)> {
        let mut out = Vec::new();
        let mut open: Option<(usize, String)> = None;
        for (i, tag) in tags.iter().enumerate() {
            if let Some(label) = tag.strip_prefix("B-") {
                if let Some((start, l)) = open.take() {
                    out.push((start, i - 1, l));
                }
                open = Some((i, label.to_string()));
            } else if tag.starts_with("I-") {
                // continuation; decoder trusts well-formed input
            } else {
                if let Some((start, l)) = open.take() {
                    out.push((start, i - 1, l));
                }
            }
        }
        if let Some((start, l)) = open {
            out.push((start, tags.len() - 1, l));
        }
        out
    }
    let mut tp = 0usize;
    let mut pred_total = 0usize;
    let mut gold_total = 0usize;
    for ((p, g), s) in predicted.iter().zip(gold).zip(sentences) {
        let p_entities = decode(&to_iob(s, p).unwrap());
        let g_entities = decode(&to_iob(s, g).unwrap());
        pred_total += p_entities.len();
        gold_total += g_entities.len();
        tp += p_entities.iter().filter(|e| g_entities.contains(e)).count();
    }
    if pred_total == 0 && gold_total == 0 {
        return (1.0, 1.0, 1.0);
    }
    let precision = if pred_total == 0 { 0.0 } else { tp as f64 / pred_total as f64 };
    let recall = if gold_total == 0 { 0.0 } else { tp as f64 / gold_total as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    (precision, recall, f1)
}

#[test]
fn criterion_07_f1_parity_with_iob_scorer() {
    let labels = ["PER", "LOC", "ORG", "GPE"];
    let mut fixtures = 0usize;
    for fixture in 0..100u64 {
        let mut stream = rng::stream(707, "acceptance-f1", fixture);
        let sentence_count = stream.gen_range(1..4usize);
        let mut sentences = Vec::new();
        let mut gold = Vec::new();
        let mut predicted = Vec::new();
        for _ in 0..sentence_count {
            let n = stream.gen_range(1..15usize);
            sentences.push(Sentence::new((0..n).map(|i| format!("t{i}"))).unwrap());
            // build two random non-overlapping span sets left to right
            let build = |stream: &mut rand_chacha::ChaCha8Rng| {
                let mut spans = BTreeSet::new();
                let mut cursor = 0usize;
                while cursor < n {
                    if stream.gen_bool(0.4) {
                        let len = stream.gen_range(1..=3usize).min(n - cursor);
                        spans.insert(EntitySpan::new(
                            cursor,
                            cursor + len - 1,
                            labels[stream.gen_range(0..labels.len())],
                        ));
                        cursor += len;
                    }
                    cursor += stream.gen_range(1..3usize);
                }
                spans
            };
            gold.push(build(&mut stream));
            predicted.push(build(&mut stream));
        }
        let report = span_f1(&predicted, &gold).unwrap();
        let (p, r, f1) = iob_reference_f1(&predicted, &gold, &sentences);
        assert_eq!(report.precision, p, "fixture {fixture}");
        assert_eq!(report.recall, r, "fixture {fixture}");
        assert_eq!(report.f1, f1, "fixture {fixture}");
        fixtures += 1;
    }
    conclude("07 span F1 parity with IOB reference", true, &format!("{fixtures} fixtures exact"));
}

const TREND_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn trend_config(seed: u64) -> TrainConfig {
    TrainConfig {
        sampler: SamplerConfig { total_epochs: 16, seed, ..SamplerConfig::default() },
        epochs: 16,
        batch_size: 64,
        learning_rate: 0.02,
        l2: 0.005,
        hash_dims: 1 << 15,
        eval_each_epoch: true,
        seed,
    }
}

fn trend_runs() -> &'static Vec<TrendReport> {
    static RUNS: OnceLock<Vec<TrendReport>> = OnceLock::new();
    RUNS.get_or_init(|| {
        TREND_SEEDS
            .iter()
            .map(|&seed| {
                let (gold, labels) =
                    generate(&ToyConfig { sentences: 2000, seed, ..ToyConfig::default() });
                let (dev, _) = generate(&ToyConfig {
                    sentences: 400,
                    seed: seed + 1000,
                    ..ToyConfig::default()
                });
                let corrupted =
                    mask_entities(&gold, &CorruptionConfig::new(0.8, seed).unwrap()).unwrap();
                compare_samplers(&corrupted, &dev, &labels, &trend_config(seed)).unwrap()
            })
            .collect()
    })
}

fn mean_gamma_last5(mode: &ModeTrend) -> f64 {
    let gammas: Vec<f64> = mode.epochs.iter().rev().take(5).filter_map(|r| r.mean_gamma).collect();
    gammas.iter().sum::<f64>() / gammas.len() as f64
}

#[test]
fn criterion_08_trend_replication() {
    let start = Instant::now();
    let runs = trend_runs();
    let f1_wins = runs
        .iter()
        .filter(|t| t.weighted_adaptive.final_f1 >= t.uniform.final_f1)
        .count();
    let gamma_wins = runs
        .iter()
        .filter(|t| mean_gamma_last5(&t.weighted_adaptive) < mean_gamma_last5(&t.uniform))
        .count();
    let detail: Vec<String> = runs
        .iter()
        .zip(TREND_SEEDS)
        .map(|(t, seed)| {
            format!(
                "seed {seed}: F1 {:.3} vs {:.3}, gamma {:.5} vs {:.5}",
                t.weighted_adaptive.final_f1,
                t.uniform.final_f1,
                mean_gamma_last5(&t.weighted_adaptive),
                mean_gamma_last5(&t.uniform),
            )
        })
        .collect();
    conclude(
        "08 trend replication (weighted vs uniform at p = 0.8)",
        f1_wins >= 4 && gamma_wins == 5 && start.elapsed().as_secs() < 600,
        &format!("F1 wins {f1_wins}/5, gamma wins {gamma_wins}/5; {}", detail.join("; ")),
    );
}

#[test]
fn criterion_09_convergence_trend() {
    let runs = trend_runs();
    let wins = runs
        .iter()
        .filter(|t| t.weighted_adaptive.epochs_to_threshold <= t.uniform.epochs_to_threshold)
        .count();
    let detail: Vec<String> = runs
        .iter()
        .zip(TREND_SEEDS)
        .map(|(t, seed)| {
            format!(
                "seed {seed}: {} vs {}",
                t.weighted_adaptive.epochs_to_threshold, t.uniform.epochs_to_threshold
            )
        })
        .collect();
    conclude(
        "09 convergence trend (epochs to 95% of final F1)",
        wins >= 4,
        &format!("wins {wins}/5; {}", detail.join("; ")),
    );
}

#[test]
fn criterion_10_uncertainty_strata_trend() {
    let mut wins = 0usize;
    let mut detail = String::new();
    for seed in TREND_SEEDS {
        let (gold, labels) =
            generate(&ToyConfig { sentences: 1600, seed, ..ToyConfig::default() });
        let (dev, _) =
            generate(&ToyConfig { sentences: 400, seed: seed + 1000, ..ToyConfig::default() });
        let corrupted = mask_entities(&gold, &CorruptionConfig::new(0.8, seed).unwrap()).unwrap();
        let (oracle_half, study_half) = split_half(&corrupted, seed).unwrap();

        let mut oracle_config = trend_config(seed);
        oracle_config.epochs = 8;
        oracle_config.sampler.total_epochs = 8;
        oracle_config.eval_each_epoch = false;
        let oracle = train(&oracle_half, &[], &labels, &oracle_config, None).unwrap().scorer;

        let mut study_config = trend_config(seed);
        study_config.eval_each_epoch = false;
        let mut f1 = Vec::new();
        for stratum in [Stratum::Top, Stratum::Bottom] {
            let picks = uncertainty_strata(&study_half, &oracle, 0.35, stratum);
            // zero missampling by construction
            for (selection, sentence) in picks.iter().zip(&study_half) {
                for span in &selection.spans {
                    assert!(!sentence.hidden().iter().any(|e| e.range() == *span));
                }
            }
            let negatives: Vec<Vec<(usize, usize)>> =
                picks.into_iter().map(|p| p.spans).collect();
            let out = train_fixed(&study_half, &negatives, &[], &labels, &study_config).unwrap();
            f1.push(evaluate(&out.scorer, &dev).unwrap().f1);
        }
        if f1[0] >= f1[1] {
            wins += 1;
        }
        detail.push_str(&format!("seed {seed}: top {:.3} vs bottom {:.3}; ", f1[0], f1[1]));
    }
    conclude(
        "10 uncertainty strata trend (top-k vs bottom-k)",
        wins >= 4,
        &format!("wins {wins}/5; {detail}"),
    );
}

#[test]
fn criterion_11_command_determinism() {
    use negspan::cli::{Cli, Command, CorruptArgs, EvalArgs, StatsArgs, TrainArgs, VerifyBoundArgs};

    let dir = tempfile::tempdir().unwrap();
    let (gold, _) = generate(&ToyConfig { sentences: 60, seed: 21, ..ToyConfig::default() });
    let gold_path = dir.path().join("gold.conll");
    fs::write(&gold_path, to_conll_string(&gold).unwrap()).unwrap();
    let (dev, _) = generate(&ToyConfig { sentences: 20, seed: 1021, ..ToyConfig::default() });
    let dev_path = dir.path().join("dev.conll");
    fs::write(&dev_path, to_conll_string(&dev).unwrap()).unwrap();

    let run = |command: Command| negspan::cli::run(&Cli { command, threads: None }).unwrap();

    // one pass of every verb into its own directory, twice
    let pass = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let base = dir.path().join(tag);
        fs::create_dir_all(&base).unwrap();
        let corrupted = base.join("train.conll");
        run(Command::Corrupt(CorruptArgs {
            input: gold_path.clone(),
            output: corrupted.clone(),
            sidecar: None,
            prob: 0.8,
            seed: 7,
        }));
        run(Command::Stats(StatsArgs {
            input: gold_path.clone(),
            sidecar: None,
            min_support: 2,
            output: base.join("stats.csv"),
        }));
        run(Command::VerifyBound(VerifyBoundArgs {
            n: vec![10, 20],
            lambda: vec![0.35],
            trials: 3000,
            seed: 7,
            m: 0,
            h: None,
            output: base.join("bound.csv"),
        }));
        let run_dir = base.join("run");
        let config_path = base.join("run.toml");
        fs::write(
            &config_path,
            format!(
                "seed = 7\ntrain_path = {corrupted:?}\nhidden_path = {:?}\ndev_path = {dev_path:?}\n\
                 out_dir = {run_dir:?}\nmode = \"weighted_adaptive\"\nepochs = 3\n\
                 learning_rate = 0.02\nl2 = 0.005\nhash_dims = 2048\n",
                base.join("train.hidden")
            ),
        )
        .unwrap();
        run(Command::Train(TrainArgs {
            config: config_path.clone(),
            seed: None,
            mode: None,
            out_dir: None,
        }));
        run(Command::Eval(EvalArgs {
            model: run_dir.join("model.ckpt"),
            data: dev_path.clone(),
            sidecar: None,
            output: base.join("eval.json"),
        }));

        let mut files = Vec::new();
        let mut stack = vec![base.clone()];
        while let Some(current) = stack.pop() {
            for entry in fs::read_dir(&current).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                let relative = path.strip_prefix(&base).unwrap().to_string_lossy().to_string();
                // config files embed absolute paths that differ per pass
                let bytes = if relative.ends_with(".toml") || relative.ends_with(".config.toml") {
                    continue;
                } else {
                    fs::read(&path).unwrap()
                };
                files.push((relative, bytes));
            }
        }
        files.sort();
        files
    };

    let first = pass("first");
    let second = pass("second");
    assert_eq!(first.len(), second.len());
    let mut compared = 0usize;
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1, "outputs differ for {}", a.0);
        compared += 1;
    }
    conclude(
        "11 command determinism",
        compared >= 7,
        &format!("{compared} data outputs byte-identical across reruns"),
    );
}
