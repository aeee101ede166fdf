//! Metrics, significance tests, score summaries, the synthetic benchmark,
//! and grid evaluation.

pub mod metrics;
pub mod style;
pub mod suite;
pub mod synth;

pub use metrics::{evaluate, mcnemar, mcnemar_counts, Confusion, McNemar, Metrics};
pub use style::{style_report, style_report_csv, CellSummary};
pub use suite::{
    reports_csv, reports_table, run_point, run_suite, Dataset, EvalReport, GridPoint, MethodResult, SplitPolicy,
    SuiteOptions, Timing,
};
pub use synth::{benchmark_config, synth_benchmark, SynthBenchmark};
