//! Acceptance criteria. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line; the process fails if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use moses_core::baselines::{nearest_vote, StaticThreshold};
use moses_core::cte::{sigmoid, BoostedCte, BoostedParams, CteKind, FeatureMatrix, LogisticCte, LogisticObjective, LogisticParams};
use moses_core::error::Error;
use moses_core::eval::synth::{default_styles, synth_benchmark_with};
use moses_core::eval::{
    benchmark_config, mcnemar, mcnemar_counts, run_point, synth_benchmark, Dataset, GridPoint, SplitPolicy,
    SuiteOptions,
};
use moses_core::features::{extract_conditions, ngram_repetition, tokenize, FeatureMask, TokenSequence, TokenizerConfig};
use moses_core::pipeline::{fit_pipeline, PipelineConfig, RouterMode};
use moses_core::repository::Label;
use moses_core::router::{sinkhorn_assign, SinkhornConfig};

const SEEDS: u64 = 20;
const N_PER_CELL: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn label_of(human: bool) -> Label {
    if human {
        Label::Human
    } else {
        Label::Ai
    }
}

struct Accuracies {
    logistic: f64,
    boosted: f64,
    static_: f64,
}

fn benchmark_means(split: impl Fn(u64) -> SplitPolicy, with_boosted: bool) -> Accuracies {
    let mut sums = [0.0; 3];
    let options = SuiteOptions::default();
    for seed in 0..SEEDS {
        let bench = synth_benchmark(seed, N_PER_CELL).expect("benchmark");
        let data = Dataset {
            references: bench.references,
            test: bench.test,
        };
        let point = |kind: CteKind| GridPoint {
            name: kind.to_string(),
            config: benchmark_config(kind, seed),
            split: split(seed),
        };
        let lr = run_point(&data, &point(CteKind::Logistic), &options).expect("logistic run");
        sums[0] += lr.accuracy("moses");
        sums[2] += lr.accuracy("static");
        if with_boosted {
            let br = run_point(&data, &point(CteKind::Boosted), &options).expect("boosted run");
            sums[1] += br.accuracy("moses");
        }
    }
    let n = SEEDS as f64;
    Accuracies {
        logistic: sums[0] / n,
        boosted: sums[1] / n,
        static_: sums[2] / n,
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let acc = benchmark_means(|_| SplitPolicy::Given, true);
    let secs = start.elapsed().as_secs_f64();
    let gain = 100.0 * (acc.logistic - acc.static_);
    let gap = 100.0 * (acc.boosted - acc.logistic);
    outcome(
        gain >= 3.0 && gap >= -1.0 && secs < 60.0,
        format!(
            "logistic {:.4}, boosted {:.4}, static {:.4}; logistic - static = {gain:+.2} pts (need >= +3), \
             boosted - logistic = {gap:+.2} pts (need >= -1), {secs:.1} s (need < 60)",
            acc.logistic, acc.boosted, acc.static_
        ),
    )
}

fn criterion_2() -> Outcome {
    let acc = benchmark_means(|seed| SplitPolicy::LowResource { per_style: 100, seed }, false);
    let gain = 100.0 * (acc.logistic - acc.static_);
    outcome(
        gain >= 3.0,
        format!(
            "100 references per style: logistic {:.4}, static {:.4}, advantage {gain:+.2} pts (need >= +3)",
            acc.logistic, acc.static_
        ),
    )
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-way hard assignment maximizing total similarity over all splits as
/// balanced as the marginals allow (sizes differ by at most one), by
/// enumeration. Returns the assignment and whether it is the unique optimum.
fn exhaustive_two_way(points: &[Vec<f64>], protos: &[Vec<f64>]) -> (Vec<usize>, bool) {
    let n = points.len();
    let mut best = f64::NEG_INFINITY;
    let mut best_mask = 0u32;
    let mut ties = 0;
    for mask in 0u32..(1 << n) {
        if (mask.count_ones() as usize * 2).abs_diff(n) > 1 {
            continue;
        }
        let value: f64 = (0..n)
            .map(|i| dot(&protos[((mask >> i) & 1) as usize], &points[i]))
            .sum();
        if value > best + 1e-12 {
            best = value;
            best_mask = mask;
            ties = 0;
        } else if (value - best).abs() <= 1e-12 {
            ties += 1;
        }
    }
    ((0..n).map(|i| ((best_mask >> i) & 1) as usize).collect(), ties == 0)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = SinkhornConfig {
        epsilon: 0.05,
        max_iter: 1_000_000,
        tol: 1e-10,
    };
    let dim = 4;
    let mut worst: f64 = 0.0;
    let mut capped = 0;
    let mut oracle_cases = 0;
    let mut ties = 0;
    let mut oracle_mismatch = 0;
    for inst in 0..50 {
        let (n, k) = if inst < 20 {
            (2 * rng.random_range(1..=4), 2)
        } else {
            let k = rng.random_range(1..=8);
            (rng.random_range(k..=64), k)
        };
        let points: Vec<Vec<f64>> = (0..n).map(|_| unit(&mut rng, dim)).collect();
        let protos: Vec<Vec<f64>> = (0..k).map(|_| unit(&mut rng, dim)).collect();
        let plan = sinkhorn_assign(&points, &protos, &config).expect("valid instance");
        capped += usize::from(!plan.converged);
        for row in &plan.plan {
            worst = worst.max((row.iter().sum::<f64>() - 1.0 / k as f64).abs());
        }
        for j in 0..n {
            let col: f64 = plan.plan.iter().map(|row| row[j]).sum();
            worst = worst.max((col - 1.0 / n as f64).abs());
        }
        if k == 2 && n <= 8 {
            oracle_cases += 1;
            let (oracle, unique) = exhaustive_two_way(&points, &protos);
            ties += usize::from(!unique);
            if plan.harden() != oracle {
                oracle_mismatch += 1;
            }
        }
    }
    outcome(
        worst < 1e-6 && oracle_mismatch == 0,
        format!(
            "50 instances, max marginal violation {worst:.2e} (need < 1e-6), {capped} stopped at the \
             iteration cap above tol 1e-10; hardened plan matches exhaustive optimum on \
             {}/{oracle_cases} instances with N <= 8, K = 2 ({ties} with tied optima)",
            oracle_cases - oracle_mismatch
        ),
    )
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, features: usize, standardize: bool) -> FeatureMatrix {
    let beta: Vec<f64> = (0..features).map(|_| normal(rng)).collect();
    loop {
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut scores = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..features).map(|_| normal(rng)).collect();
            let score = normal(rng);
            let p = sigmoid(dot(&x, &beta) - score);
            labels.push(label_of(rng.random::<f64>() < p));
            rows.push(x);
            scores.push(score);
        }
        if let Ok(m) = FeatureMatrix::with_intercept(rows, labels, scores, standardize) {
            return m;
        }
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let n = rng.random_range(5..=40);
        let features = rng.random_range(1..=5);
        let data = random_matrix(&mut rng, n, features, false);
        let l2 = [0.0, 1e-4, 0.1, 1.0][inst % 4];
        let objective = LogisticObjective::new(&data, l2);
        let beta: Vec<f64> = (0..data.width()).map(|_| normal(&mut rng)).collect();
        let grad = objective.gradient(&beta);
        for j in 0..beta.len() {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (objective.loss(&up) - objective.loss(&down)) / (2.0 * h);
            let rel = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
        }
    }
    outcome(
        worst <= 1e-5,
        format!("20 instances, max relative gradient error {worst:.2e} against central differences, h = 1e-5 (need <= 1e-5)"),
    )
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Weighted NLL of the first `t` trees, recomputed from the public model.
fn prefix_nll(model: &BoostedCte, data: &FeatureMatrix, t: usize) -> f64 {
    let prefix = BoostedCte {
        trees: model.trees[..t].to_vec(),
        ..model.clone()
    };
    (0..data.n())
        .map(|i| {
            let z = prefix.threshold(&data.rows[i], data.scores[i]).expect("row width") - data.scores[i];
            data.weights[i] * (softplus(z) - data.y(i) * z)
        })
        .sum()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    let mut objective_violations = 0;
    let mut rounds = Vec::new();
    let mut biggest: f64 = 0.0;
    for fixture in 0..10 {
        let n = rng.random_range(60..=300);
        let features = rng.random_range(1..=5);
        let data = random_matrix(&mut rng, n, features, false);
        let params = BoostedParams {
            n_trees: 100,
            max_depth: 1 + fixture % 6,
            learning_rate: [0.1, 0.3, 1.0][fixture % 3],
            reg_gamma: 0.0,
            ..BoostedParams::default()
        };
        let model = BoostedCte::fit(&data, &params).expect("fit");
        rounds.push(model.trees.len());
        let losses: Vec<f64> = (0..=model.trees.len()).map(|t| prefix_nll(&model, &data, t)).collect();
        for (t, pair) in losses.windows(2).enumerate() {
            // slack covers summation-order rounding only
            let slack = 1e-12 * pair[0].abs();
            if pair[1] > pair[0] + slack {
                violations += 1;
                biggest = biggest.max(pair[1] - pair[0]);
            }
            let omega = model.trees[t].complexity(params.reg_gamma, params.reg_lambda);
            if pair[1] + omega > pair[0] + slack {
                objective_violations += 1;
            }
        }
    }
    let complete = rounds.iter().all(|&r| r == 100);
    outcome(
        violations == 0 && objective_violations == 0 && complete,
        format!(
            "10 fixtures, rounds fitted {rounds:?}; {violations} NLL increases (largest {biggest:.2e}), \
             {objective_violations} rounds where NLL + tree complexity rose"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = LogisticParams {
        l2: 0.0,
        ..LogisticParams::default()
    };
    let mut negatives = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut queries = 0;
    let mut zero_row_ok = true;
    for _fixture in 0..5 {
        let data = random_matrix(&mut rng, 200, 3, true);
        let single = LogisticCte::fit(&data, &params).expect("fit");
        let double = LogisticCte::fit(&data.duplicated(), &params).expect("fit duplicated");
        zero_row_ok &= single.threshold_variance(&vec![0.0; data.width()]).expect("width") == 0.0;
        for _ in 0..20 {
            let row: Vec<f64> = (0..data.width() - 1)
                .map(|_| 2.0 * normal(&mut rng))
                .chain(std::iter::once(1.0))
                .collect();
            let v1 = single.threshold_variance(&row).expect("width");
            let v2 = double.threshold_variance(&row).expect("width");
            negatives += usize::from(v1 < 0.0) + usize::from(v2 < 0.0);
            worst_ratio = worst_ratio.max((v2 / (v1 / 4.0) - 1.0).abs());
            queries += 1;
        }
    }
    outcome(
        negatives == 0 && worst_ratio <= 1e-8 && zero_row_ok,
        format!(
            "{queries} queries, {negatives} negative variances; duplicated/original variance is 1/4 \
             within relative {worst_ratio:.2e} (need <= 1e-8); zero row gives zero: {zero_row_ok}"
        ),
    )
}

/// Disagreement rate per 100 test points between the intercept-only
/// estimator and the Youden threshold, one style with equal-variance classes.
fn intercept_vs_youden(seed: u64, n_ref: usize, n_test: usize) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| {
        let mut scores = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(2 * n);
        for i in 0..2 * n {
            let human = i % 2 == 0;
            scores.push(normal(&mut rng) + if human { 0.0 } else { 1.7 });
            labels.push(label_of(human));
        }
        (scores, labels)
    };
    let (ref_scores, ref_labels) = draw(n_ref);
    let (test_scores, _) = draw(n_test);
    let rows = vec![Vec::new(); ref_scores.len()];
    let data = FeatureMatrix::with_intercept(rows, ref_labels.clone(), ref_scores.clone(), false).expect("data");
    let cte = LogisticCte::fit(&data, &LogisticParams::default()).expect("fit");
    let youden = StaticThreshold::fit(&ref_scores, &ref_labels).expect("youden");
    let disagreements = test_scores
        .iter()
        .filter(|&&s| {
            let (p, _) = cte.predict(&[1.0], s).expect("width");
            label_of(p > 0.5) != youden.predict(s)
        })
        .count();
    (disagreements, test_scores.len())
}

/// The same comparison through the pipeline on the two-style benchmark.
fn benchmark_intercept_rate() -> f64 {
    let (mut dis, mut total) = (0, 0);
    for seed in 0..SEEDS {
        let bench = synth_benchmark(seed, N_PER_CELL).expect("benchmark");
        let repo = bench.repository().expect("repository");
        let config = PipelineConfig {
            mask: FeatureMask::none(),
            router: RouterMode::Disabled,
            seed,
            ..PipelineConfig::default()
        };
        let model = fit_pipeline(&repo, &config).expect("fit");
        let scores: Vec<f64> = bench.references.iter().map(|r| r.score).collect();
        let labels: Vec<Label> = bench.references.iter().map(|r| r.label).collect();
        let youden = StaticThreshold::fit(&scores, &labels).expect("youden");
        for t in &bench.test {
            let v = model.detect(&t.text, &t.embedding, &t.token_logprobs, t.score).expect("detect");
            dis += usize::from(v.label != youden.predict(t.score));
            total += 1;
        }
    }
    100.0 * dis as f64 / total as f64
}

fn criterion_7() -> Outcome {
    let (mut dis, mut total) = (0, 0);
    for seed in 0..5 {
        let (d, n) = intercept_vs_youden(700 + seed, 100_000, 10_000);
        dis += d;
        total += n;
    }
    let rate = 100.0 * dis as f64 / total as f64;
    let bench_rate = benchmark_intercept_rate();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let refs: Vec<(f64, Label)> = (0..200).map(|_| (normal(&mut rng), label_of(rng.random::<bool>()))).collect();
    let mut nearest_mismatch = 0;
    for _ in 0..2000 {
        let q = 1.5 * normal(&mut rng);
        let brute = refs
            .iter()
            .min_by(|a, b| (a.0 - q).abs().total_cmp(&(b.0 - q).abs()))
            .expect("refs")
            .1;
        nearest_mismatch += usize::from(nearest_vote(&refs, q, 1).expect("vote") != brute);
    }

    // (b, c, chi2, p) with p from scipy.stats.chi2.sf
    let fixtures = [
        (49, 0, 49.0, 2.559625087771672e-12),
        (10, 0, 10.0, 0.0015654022580025018),
        (7, 7, 0.0, 1.0),
        (6, 2, 2.0, 0.15729920705028105),
        (12, 3, 5.4, 0.02013675155034633),
        (5, 1, 16.0 / 6.0, 0.10247043485974942),
    ];
    let mut hand_ok = 0;
    for &(b, c, chi2, p) in &fixtures {
        let m = mcnemar_counts(b, c, false);
        if (m.chi2 - chi2).abs() <= 1e-12 && (m.p_value - p).abs() <= 1e-12 + 1e-9 * p {
            hand_ok += 1;
        }
    }
    // 49 items only the first method gets right, 0 the other way round,
    // 51 both right
    let labels = vec![Label::Human; 100];
    let a: Vec<Label> = labels.clone();
    let b: Vec<Label> = (0..100).map(|i| if i < 49 { Label::Ai } else { Label::Human }).collect();
    let paired = mcnemar(&a, &b, &labels, false).expect("paired");
    let paired_ok = paired.b == 49 && paired.c == 0 && paired.chi2 == 49.0;

    outcome(
        rate <= 1.0 && nearest_mismatch == 0 && hand_ok == fixtures.len() && paired_ok,
        format!(
            "intercept-only vs Youden {rate:.3} disagreements per 100 (need <= 1) on 5 x 20k one-style \
             equal-variance test points [two-style benchmark, 400 references: {bench_rate:.2} per 100]; \
             nearest k=1 mismatches {nearest_mismatch}/2000; McNemar hand fixtures {hand_ok}/{}; \
             b=49, c=0 from predictions gives chi2 {}",
            fixtures.len(),
            paired.chi2
        ),
    )
}

fn toks(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| (*w).to_owned()).collect()
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_owned());
        }
    };
    let folded = TokenizerConfig { case_fold: true };
    let raw = TokenizerConfig { case_fold: false };
    check("whitespace", tokenize("a b  c", raw).map(|s| s.tokens).ok() == Some(toks(&["a", "b", "c"])));
    check("case fold", tokenize("A a", folded).map(|s| s.tokens).ok() == Some(toks(&["a", "a"])));
    check("no fold", tokenize("A a", raw).map(|s| s.tokens).ok() == Some(toks(&["A", "a"])));
    check("empty", matches!(tokenize("", folded), Err(Error::EmptyText)));

    check("rep2 ababa", ngram_repetition(&toks(&["a", "b", "a", "b", "a"]), 2) == 1.0);
    check("rep2 abcd", ngram_repetition(&toks(&["a", "b", "c", "d"]), 2) == 0.0);
    check("rep2 short", ngram_repetition(&toks(&["a"]), 2) == 0.0);

    let seq = TokenSequence::new(toks(&["w", "x", "y", "z"]), Some(vec![-1.0, -3.0, -1.0, -3.0])).expect("seq");
    let c = extract_conditions(&seq, vec![]).expect("conditions");
    check(
        "wxyz",
        c.text_length == 4 && c.logprob_mean == -2.0 && c.logprob_var == 1.0 && c.ttr == 2.0 && c.rep2 == 0.0,
    );
    let seq = TokenSequence::new(toks(&["a", "a"]), Some(vec![-2.0, -2.0])).expect("seq");
    let c = extract_conditions(&seq, vec![]).expect("conditions");
    check(
        "aa",
        c.logprob_mean == -2.0 && c.logprob_var == 0.0 && c.ttr == 1.0 / 2.0_f64.sqrt(),
    );
    let seq = TokenSequence::new(toks(&["a"]), Some(vec![-5.0])).expect("seq");
    let c = extract_conditions(&seq, vec![]).expect("conditions");
    check(
        "single",
        c.text_length == 1 && c.logprob_var == 0.0 && c.rep2 == 0.0 && c.rep3 == 0.0 && c.ttr == 1.0,
    );
    let seq = TokenSequence::new(toks(&["a"]), None).expect("seq");
    check("missing logprobs", matches!(extract_conditions(&seq, vec![]), Err(Error::MissingLogprobs)));
    let total = 12;
    outcome(
        failures.is_empty(),
        format!("{}/{total} exact fixtures reproduce{}", total - failures.len(), if failures.is_empty() {
            String::new()
        } else {
            format!("; failing: {}", failures.join(", "))
        }),
    )
}

fn run_bin(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_moses"))
        .args(args)
        .env_remove("MOSES_SEED")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let d = dir.path();
    let s = |p: &Path| p.to_str().expect("utf-8 path").to_owned();
    let mut ok = run_bin(&["synth", "--seed", "9", "--n-per-cell", "50", "--out-dir", &s(d)]);
    let refs = s(&d.join("references.jsonl"));
    let test = s(&d.join("test.jsonl"));
    let mut identical = [true; 4];
    for (slot, kind) in ["logistic", "boosted"].into_iter().enumerate() {
        let runs: Vec<(Vec<u8>, Vec<u8>)> = (0..2)
            .map(|run| {
                let model = d.join(format!("{kind}-{run}.json"));
                let verdicts = d.join(format!("{kind}-{run}.jsonl"));
                ok &= run_bin(&["fit", "--repo", &refs, "--out", &s(&model), "--cte", kind, "--seed", "7", "--r", "8"]);
                ok &= run_bin(&["detect", "--model", &s(&model), "--input", &test, "--out", &s(&verdicts)]);
                (fs::read(&model).unwrap_or_default(), fs::read(&verdicts).unwrap_or_default())
            })
            .collect();
        identical[2 * slot] = !runs[0].0.is_empty() && runs[0].0 == runs[1].0;
        identical[2 * slot + 1] = !runs[0].1.is_empty() && runs[0].1 == runs[1].1;
    }
    outcome(
        ok && identical.iter().all(|&b| b),
        format!(
            "commands succeeded: {ok}; byte-identical logistic snapshot {}, verdicts {}; boosted snapshot {}, verdicts {}",
            identical[0], identical[1], identical[2], identical[3]
        ),
    )
}

fn criterion_10() -> Outcome {
    // log-prob mean carries label signal and nothing else
    let styles = default_styles()
        .into_iter()
        .map(|mut s| {
            s.logprob_center.human = s.logprob_center.ai + 0.6;
            s.logprob_center.loading = 0.0;
            s
        })
        .collect();
    let bench = synth_benchmark_with(10, N_PER_CELL, styles).expect("benchmark");
    let repo = bench.repository().expect("repository");
    let model = fit_pipeline(&repo, &benchmark_config(CteKind::Logistic, 10)).expect("fit");
    let mut positive = 0;
    let mut smallest = f64::INFINITY;
    for t in &bench.test {
        let c = model.conditions(&t.text, &t.embedding, &t.token_logprobs).expect("conditions");
        let attribution = model.attribute(&c, t.score).expect("attribute").expect("logistic");
        let value = attribution
            .iter()
            .find(|(name, _)| name == "logprob_mean")
            .expect("logprob_mean column")
            .1;
        positive += usize::from(value > 0.0);
        smallest = smallest.min(value);
    }
    outcome(
        positive == bench.test.len(),
        format!(
            "logprob_mean attribution positive on {positive}/{} queries across {} cached estimators (smallest {smallest:.3e})",
            bench.test.len(),
            model.cached_estimators()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("cross-style gain", criterion_1),
        ("low-resource gain", criterion_2),
        ("sinkhorn marginals and oracle", criterion_3),
        ("logistic gradient", criterion_4),
        ("boosted monotonicity", criterion_5),
        ("threshold variance", criterion_6),
        ("oracle equivalences", criterion_7),
        ("feature formulas", criterion_8),
        ("determinism", criterion_9),
        ("attribution signs", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        failed += usize::from(!result.pass);
        println!(
            "{} criterion {} ({name}): {}",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
