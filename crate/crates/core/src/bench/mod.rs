//! Map-operation timing, rebuild-from-scratch baselines and trajectory accuracy.

mod accuracy;
mod baseline;
mod replay;
mod trace;

pub use accuracy::{compute_accuracy, AccuracyError, AccuracyReport};
pub use baseline::{brute_force_knn, StaticKdTree};
pub use replay::{
    bounds_of, corridor_trace, filler_points, fit_log, run_tree_benchmark, BaselineRecord, BenchSummary, LogFit,
    SizeBucket, TreeBenchParams, TreeBenchReport, Validation,
};
pub use trace::{write_bench_csv, BenchRecord, OpTrace, TraceError, TraceOp};
