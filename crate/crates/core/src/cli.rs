//! The `moses` command line. Exit codes: 0 success, 1 usage error, 2 data or
//! validation error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::compression::DEFAULT_DIM;
use crate::cte::CteKind;
use crate::error::{Error, Result};
use crate::eval::synth::benchmark_config;
use crate::eval::{
    reports_csv, reports_table, run_point, run_suite, style_report, style_report_csv, synth_benchmark, Dataset,
    EvalReport, GridPoint, SplitPolicy, SuiteOptions,
};
use crate::features::{FeatureMask, TokenizerConfig};
use crate::pipeline::{fit_pipeline, PipelineConfig, PipelineModel, RouterMode};
use crate::repository::{parse_jsonl, write_atomic, Label, RawRecord, Repository};
use crate::router::PrototypeRef;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "moses", version, about = "Stylistics-conditional thresholds for AI-text detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and annotate a JSONL reference file into a repository snapshot.
    Ingest(IngestArgs),
    /// Fit prototypes and write a pipeline snapshot.
    Fit(FitArgs),
    /// Score a JSONL query stream, one verdict per input line.
    Detect(DetectArgs),
    /// Compare the pipeline with both baselines on one split.
    Eval(EvalArgs),
    /// Run an ablation grid around one configuration.
    Ablate(AblateArgs),
    /// Write the synthetic two-style benchmark.
    Synth(SynthArgs),
    /// Per-style score summaries as CSV.
    Report(ReportArgs),
}

/// Pipeline settings. Unset flags fall back to `--config`, then to defaults.
#[derive(Debug, Clone, Default, Args)]
struct ConfigArgs {
    /// TOML file with pipeline settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prototypes per style.
    #[arg(long)]
    k: Option<usize>,
    /// Prototypes activated per query.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    cte: Option<CteKind>,
    #[arg(long)]
    router: Option<RouterMode>,
    /// `all`, `none`, or a comma list of length, logprob_mean, logprob_var,
    /// rep2, rep3, ttr, semantic.
    #[arg(long)]
    mask: Option<FeatureMask>,
    /// Compressed embedding dimension.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, env = "MOSES_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    sinkhorn_iters: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    reg_lambda: Option<f64>,
    #[arg(long)]
    reg_gamma: Option<f64>,
    #[arg(long)]
    min_child_weight: Option<f64>,
    #[arg(long)]
    score_as_feature: Option<bool>,
    #[arg(long)]
    cache_size: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => read_config(path)?,
            None => PipelineConfig::default(),
        };
        set(&mut c.prototypes.k, self.k);
        set(&mut c.m, self.m);
        set(&mut c.cte, self.cte);
        set(&mut c.router, self.router);
        set(&mut c.mask, self.mask);
        set(&mut c.r, self.r);
        set(&mut c.seed, self.seed);
        set(&mut c.prototypes.momentum, self.momentum);
        set(&mut c.prototypes.epochs, self.epochs);
        set(&mut c.prototypes.sinkhorn.epsilon, self.epsilon);
        set(&mut c.prototypes.sinkhorn.max_iter, self.sinkhorn_iters);
        set(&mut c.logistic.l2, self.l2);
        set(&mut c.boosted.n_trees, self.n_trees);
        set(&mut c.boosted.max_depth, self.max_depth);
        set(&mut c.boosted.learning_rate, self.learning_rate);
        set(&mut c.boosted.reg_lambda, self.reg_lambda);
        set(&mut c.boosted.reg_gamma, self.reg_gamma);
        set(&mut c.boosted.min_child_weight, self.min_child_weight);
        set(&mut c.boosted.score_as_feature, self.score_as_feature);
        set(&mut c.cache_size, self.cache_size);
        c.validate()?;
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn read_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    r: usize,
    /// Keep token case when computing lexical conditions.
    #[arg(long)]
    no_case_fold: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Repository snapshot, or a `.jsonl` ingest file.
    #[arg(long)]
    repo: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitKind {
    Given,
    Random,
    LeaveStyleOut,
    LowResource,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Reference records (JSONL).
    #[arg(long)]
    references: PathBuf,
    /// Test records (JSONL); required unless the split draws its own.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitKind::Given)]
    split: SplitKind,
    #[arg(long, default_value_t = 0.5)]
    test_fraction: f64,
    /// Held-out style for `leave-style-out`.
    #[arg(long)]
    style: Option<String>,
    /// References kept per style for `low-resource`.
    #[arg(long, default_value_t = 200)]
    per_style: usize,
    /// Seed for random and low-resource splits; defaults to the pipeline seed.
    #[arg(long)]
    split_seed: Option<u64>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let references = read_records(&self.references)?;
        let test = match &self.test {
            Some(p) => read_records(p)?,
            None if matches!(self.split, SplitKind::Random | SplitKind::LeaveStyleOut) => Vec::new(),
            None => return Err(Error::invalid(format!("--test is required for split {:?}", self.split))),
        };
        Ok(Dataset { references, test })
    }

    fn policy(&self, seed: u64) -> Result<SplitPolicy> {
        let seed = self.split_seed.unwrap_or(seed);
        Ok(match self.split {
            SplitKind::Given => SplitPolicy::Given,
            SplitKind::Random => SplitPolicy::Random {
                test_fraction: self.test_fraction,
                seed,
            },
            SplitKind::LeaveStyleOut => SplitPolicy::LeaveStyleOut {
                style: self
                    .style
                    .clone()
                    .ok_or_else(|| Error::invalid("--style is required for leave-style-out"))?,
            },
            SplitKind::LowResource => SplitPolicy::LowResource {
                per_style: self.per_style,
                seed,
            },
        })
    }
}

/// Leave-style-out draws its test side from the reference file when no test
/// file is given.
fn prepare(data: Dataset, split: &SplitPolicy) -> Dataset {
    if data.test.is_empty() && matches!(split, SplitPolicy::LeaveStyleOut { .. }) {
        return Dataset {
            test: data.references.clone(),
            references: data.references,
        };
    }
    data
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record fit and per-query timings (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    /// Use the continuity-corrected McNemar statistic.
    #[arg(long)]
    mcnemar_corrected: bool,
}

impl OutputArgs {
    fn options(&self) -> SuiteOptions {
        SuiteOptions {
            timing: self.timing,
            mcnemar_corrected: self.mcnemar_corrected,
        }
    }

    fn render(&self, reports: &[EvalReport]) -> Result<String> {
        if self.json {
            let mut s = serde_json::to_string_pretty(reports)?;
            s.push('\n');
            Ok(s)
        } else if self.csv {
            reports_csv(reports)
        } else {
            Ok(reports_table(reports))
        }
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    Mask,
    Router,
    R,
    Cte,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Axes varied one at a time around the base configuration.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mask")]
    grid: Vec<Axis>,
    /// Compression dimensions for the `r` axis.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    r_values: Vec<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, env = "MOSES_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n_per_cell: usize,
    /// Receives references.jsonl, test.jsonl and benchmark.toml.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// JSONL with at least `style`, `label` and `score` per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Fit(a) => fit(a),
        Command::Detect(a) => detect(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_jsonl(file)?.into_iter().map(|(_, r)| r).collect())
}

fn load_repository(path: &Path, r: usize) -> Result<Repository> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        Repository::from_jsonl_path(path, r, TokenizerConfig::default())
    } else {
        Repository::load(path)
    }
}

#[derive(Serialize)]
struct IngestSummary {
    samples: usize,
    styles: Vec<StyleCount>,
    embedding_dim: usize,
    r: usize,
}

#[derive(Serialize)]
struct StyleCount {
    style: String,
    human: usize,
    ai: usize,
}

fn style_counts(repo: &Repository) -> Vec<StyleCount> {
    repo.styles
        .iter()
        .map(|s| {
            let human = repo.samples_of_style(s).filter(|x| x.label.is_human()).count();
            let total = repo.samples_of_style(s).count();
            StyleCount {
                style: s.clone(),
                human,
                ai: total - human,
            }
        })
        .collect()
}

fn ingest(a: IngestArgs) -> Result<i32> {
    if a.r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    let tokenizer = TokenizerConfig {
        case_fold: !a.no_case_fold,
    };
    let repo = Repository::from_jsonl_path(&a.input, a.r, tokenizer)?;
    repo.snapshot(&a.out)?;
    let summary = IngestSummary {
        samples: repo.len(),
        styles: style_counts(&repo),
        embedding_dim: repo.embedding_dim,
        r: repo.compression_dim(),
    };
    if a.json {
        println!("{}", serde_json::to_string(&summary)?);
    } else {
        println!(
            "ingested {} samples across {} styles into {}",
            summary.samples,
            summary.styles.len(),
            a.out.display()
        );
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FitSummary<'a> {
    samples: usize,
    prototypes: Vec<(String, usize)>,
    config: &'a PipelineConfig,
}

fn fit(a: FitArgs) -> Result<i32> {
    let config = a.config.resolve()?;
    let repo = load_repository(&a.repo, config.r)?;
    let model = fit_pipeline(&repo, &config)?;
    model.snapshot(&a.out)?;
    let summary = FitSummary {
        samples: model.repository.len(),
        prototypes: model.indexes.iter().map(|i| (i.style.clone(), i.k())).collect(),
        config: &model.config,
    };
    if a.json {
        println!("{}", serde_json::to_string(&summary)?);
    } else {
        let total: usize = summary.prototypes.iter().map(|p| p.1).sum();
        println!(
            "fitted {total} prototypes over {} samples into {}",
            summary.samples,
            a.out.display()
        );
    }
    Ok(EXIT_OK)
}

/// One detection request. Extra fields such as `label` are ignored.
#[derive(Debug, Deserialize)]
struct Query {
    id: String,
    text: String,
    embedding: Vec<f64>,
    token_logprobs: Vec<f64>,
    score: f64,
}

#[derive(Serialize)]
struct VerdictLine<'a> {
    id: &'a str,
    label: Label,
    probability: f64,
    confidence: f64,
    threshold_estimate: f64,
    threshold_variance: Option<f64>,
    activated_prototypes: &'a [PrototypeRef],
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    id: Option<&'a str>,
    line: usize,
    error: String,
}

/// On failure, returns the query id when it could be read.
fn detect_line(model: &PipelineModel, line: &str) -> std::result::Result<String, (Option<String>, String)> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| (None, e.to_string()))?;
    let id = value.get("id").and_then(|v| v.as_str()).map(str::to_owned);
    let fail = |msg: String| (id.clone(), msg);
    let q: Query = serde_json::from_value(value).map_err(|e| fail(e.to_string()))?;
    let v = model
        .detect(&q.text, &q.embedding, &q.token_logprobs, q.score)
        .map_err(|e| fail(e.to_string()))?;
    let out = VerdictLine {
        id: &q.id,
        label: v.label,
        probability: v.probability,
        confidence: v.confidence,
        threshold_estimate: v.threshold_estimate,
        threshold_variance: v.threshold_variance,
        activated_prototypes: &v.activation.prototypes,
    };
    serde_json::to_string(&out).map_err(|e| fail(e.to_string()))
}

fn detect(a: DetectArgs) -> Result<i32> {
    let model = PipelineModel::load(&a.model)?;
    let file = fs::File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let mut out = String::new();
    let mut failed = 0usize;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(&a.input, e))?;
        match detect_line(&model, &line) {
            Ok(json) => out.push_str(&json),
            Err((id, error)) => {
                failed += 1;
                eprintln!("line {line_no}: {error}");
                out.push_str(&serde_json::to_string(&ErrorLine {
                    id: id.as_deref(),
                    line: line_no,
                    error,
                })?);
            }
        }
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)?;
    if failed > 0 {
        eprintln!("error: {failed} input lines failed");
        return Ok(EXIT_DATA);
    }
    Ok(EXIT_OK)
}

fn eval(a: EvalArgs) -> Result<i32> {
    let config = a.config.resolve()?;
    let split = a.data.policy(config.seed)?;
    let data = prepare(a.data.load()?, &split);
    let point = GridPoint {
        name: "eval".into(),
        config,
        split,
    };
    let report = run_point(&data, &point, &a.output.options())?;
    emit(a.output.out.as_deref(), &a.output.render(&[report])?)?;
    Ok(EXIT_OK)
}

fn grid_points(base: &PipelineConfig, split: &SplitPolicy, axes: &[Axis], r_values: &[usize]) -> Vec<GridPoint> {
    let point = |name: String, config: PipelineConfig| GridPoint {
        name,
        config,
        split: split.clone(),
    };
    let mut grid = vec![point("base".into(), base.clone())];
    for axis in axes {
        match axis {
            Axis::Mask => {
                for (name, mask) in FeatureMask::leave_one_out_grid() {
                    if mask != base.mask {
                        grid.push(point(format!("mask={name}"), PipelineConfig { mask, ..base.clone() }));
                    }
                }
                if base.mask != FeatureMask::none() {
                    let mask = FeatureMask::none();
                    grid.push(point("mask=none".into(), PipelineConfig { mask, ..base.clone() }));
                }
            }
            Axis::Router => {
                for router in [RouterMode::MNearest, RouterMode::Classification, RouterMode::Disabled] {
                    if router != base.router {
                        grid.push(point(format!("router={router}"), PipelineConfig { router, ..base.clone() }));
                    }
                }
            }
            Axis::R => {
                for &r in r_values {
                    if r != base.r {
                        grid.push(point(format!("r={r}"), PipelineConfig { r, ..base.clone() }));
                    }
                }
            }
            Axis::Cte => {
                for cte in [CteKind::Logistic, CteKind::Boosted] {
                    if cte != base.cte {
                        grid.push(point(format!("cte={cte}"), PipelineConfig { cte, ..base.clone() }));
                    }
                }
            }
        }
    }
    grid
}

fn ablate(a: AblateArgs) -> Result<i32> {
    let base = a.config.resolve()?;
    if a.r_values.contains(&0) {
        return Err(Error::invalid("r values must be at least 1"));
    }
    let split = a.data.policy(base.seed)?;
    let data = prepare(a.data.load()?, &split);
    let grid = grid_points(&base, &split, &a.grid, &a.r_values);
    let reports = run_suite(&data, &grid, &a.output.options())?;
    emit(a.output.out.as_deref(), &a.output.render(&reports)?)?;
    Ok(EXIT_OK)
}

fn jsonl(records: &[RawRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

#[derive(Serialize)]
struct SynthSummary {
    references: usize,
    test: usize,
    bayes_accuracy: f64,
}

fn synth(a: SynthArgs) -> Result<i32> {
    let bench = synth_benchmark(a.seed, a.n_per_cell)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    write_atomic(&a.out_dir.join("references.jsonl"), jsonl(&bench.references)?.as_bytes())?;
    write_atomic(&a.out_dir.join("test.jsonl"), jsonl(&bench.test)?.as_bytes())?;
    let config = benchmark_config(CteKind::Logistic, a.seed);
    let toml = toml::to_string(&config).map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&a.out_dir.join("benchmark.toml"), toml.as_bytes())?;
    let summary = SynthSummary {
        references: bench.references.len(),
        test: bench.test.len(),
        bayes_accuracy: bench.bayes_accuracy(),
    };
    if a.json {
        println!("{}", serde_json::to_string(&summary)?);
    } else {
        println!(
            "wrote {} references and {} test samples to {} (bayes accuracy {:.4})",
            summary.references,
            summary.test,
            a.out_dir.display(),
            summary.bayes_accuracy
        );
    }
    Ok(EXIT_OK)
}

#[derive(Deserialize)]
struct Scored {
    style: String,
    label: Label,
    score: f64,
}

fn report(a: ReportArgs) -> Result<i32> {
    let file = fs::File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let mut rows = Vec::new();
    let mut errors = String::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&a.input, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Scored>(&line) {
            Ok(s) if s.score.is_finite() => rows.push(s),
            Ok(_) => {
                let _ = writeln!(errors, "line {}: field `score` is not finite", idx + 1);
            }
            Err(e) => {
                let _ = writeln!(errors, "line {}: {e}", idx + 1);
            }
        }
    }
    if !errors.is_empty() {
        eprint!("{errors}");
        return Err(Error::Parse(format!("{} malformed lines in {}", errors.lines().count(), a.input.display())));
    }
    let cells = style_report(rows.iter().map(|s| (s.style.as_str(), s.label, s.score)));
    emit(a.out.as_deref(), &style_report_csv(&cells)?)?;
    Ok(EXIT_OK)
}
