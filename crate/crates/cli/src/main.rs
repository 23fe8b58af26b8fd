use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lio_core::bench::{
    corridor_trace, filler_points, run_tree_benchmark, write_bench_csv, OpTrace, TreeBenchParams, TreeBenchReport,
};
use lio_core::config::{describe_keys, RunConfig};
use lio_core::lio::{Dataset, LioEngine};
use lio_core::synth::SynthSpec;

#[derive(Parser)]
#[command(name = "lio", version, about = "Synthetic datasets, LiDAR-inertial odometry runs and map benchmarks")]
#[command(after_long_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a TOML spec (built-in defaults if omitted).
    Gen(GenArgs),
    /// Run odometry over a dataset directory.
    Run(RunArgs),
    /// Replay map operations against the ikd-tree and the rebuild-from-scratch baseline.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML); every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the seed from the spec or configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    dataset: PathBuf,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, require_equals = true)]
    parallel_rebuild: Option<Switch>,
    /// Also write the map-operation trace to `trace.csv`.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Trace CSV or dataset directory; a synthetic corridor trace when omitted.
    input: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, require_equals = true)]
    parallel_rebuild: Option<Switch>,
    /// Cross-check sampled kNN queries against brute force; exit non-zero on mismatch.
    #[arg(long)]
    validate: bool,
    /// Tree sizes to bucket latencies at, e.g. `1e4,1e5,1e6`.
    #[arg(long, value_delimiter = ',', value_parser = parse_size)]
    sizes: Option<Vec<usize>>,
    /// Points in the synthetic corridor trace.
    #[arg(long, default_value = "100000", value_parser = parse_size)]
    points: usize,
    /// Pre-load the map with this many points far from the trace.
    #[arg(long, default_value = "0", value_parser = parse_size)]
    filler: usize,
    /// Time a static rebuild every this many scans; 0 disables.
    #[arg(long, default_value_t = 10)]
    baseline_every: usize,
}

fn parse_size(s: &str) -> Result<usize, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s}"))?;
    if !(v >= 0.0 && v.is_finite() && v.fract() == 0.0) {
        return Err(format!("not a whole non-negative count: {s}"));
    }
    Ok(v as usize)
}

fn config_help() -> String {
    let keys = describe_keys();
    let width = keys.iter().map(|k| k.0.len()).max().unwrap_or(0);
    let mut s = String::from("Configuration keys (--config FILE, TOML; default in brackets):\n");
    for (key, default, meaning) in keys {
        s.push_str(&format!("  {key:<width$}  {meaning} [{default}]\n"));
    }
    s.push_str("\nFlags override values from the file.");
    s
}

fn load_config(common: &Common, parallel: Option<Switch>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(p) = parallel {
        cfg.tree.parallel_rebuild = p == Switch::On;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn gen(args: &GenArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            SynthSpec::from_toml(&text).with_context(|| path.display().to_string())?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    create_dir(&args.out)?;
    let data = spec.export(&args.out)?;
    println!(
        "wrote {} scans, {} IMU samples to {}",
        data.scans.len(),
        data.imu.len(),
        args.out.display()
    );
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = load_config(&args.common, args.parallel_rebuild)?;
    let data = Dataset::load(&args.dataset)?;
    let mut params = cfg.engine_params(Some(&data.meta));
    params.record_trace = args.trace;
    let out = LioEngine::run(&data, params)?;
    let dir = &args.common.out;
    let accuracy = out.write(dir, data.ground_truth.as_deref())?;
    if let Some(trace) = &out.trace {
        trace.save(&dir.join("trace.csv"))?;
    }
    println!("{} scans, {} map points", out.scans.len(), out.map_size.1);
    if let Some(a) = accuracy {
        println!("rmse {:.4} m, end-to-end {:.4} m over {:.1} m", a.rmse_m, a.end_to_end_m, a.length_m);
    }
    Ok(())
}

fn bench_trace(args: &BenchArgs, cfg: &RunConfig) -> Result<OpTrace> {
    let Some(input) = &args.input else {
        return Ok(corridor_trace(args.points, 1_000, 200, cfg.map.resolution, cfg.seed));
    };
    if input.is_dir() {
        let data = Dataset::load(input)?;
        let mut params = cfg.engine_params(Some(&data.meta));
        params.record_trace = true;
        let out = LioEngine::run(&data, params)?;
        return out.trace.context("engine recorded no trace");
    }
    Ok(OpTrace::load(input)?)
}

fn write_bench(dir: &Path, report: &TreeBenchReport) -> Result<()> {
    write_bench_csv(&dir.join("bench.csv"), &report.records)?;
    let mut w = csv::Writer::from_path(dir.join("buckets.csv"))?;
    for b in &report.summary.buckets {
        w.serialize(b)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("baseline.csv"))?;
    if report.baseline.is_empty() {
        w.write_record(["scan_index", "map_points", "ikd_update_us", "rebuild_us"])?;
    }
    for b in &report.baseline {
        w.serialize(b)?;
    }
    w.flush()?;
    let mut text = serde_json::to_string_pretty(&report.summary)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let cfg = load_config(&args.common, args.parallel_rebuild)?;
    let trace = bench_trace(args, &cfg)?;
    let filler = filler_points(args.filler, cfg.map.resolution, cfg.seed);
    let params = TreeBenchParams {
        balance: cfg.engine_params(None).balance,
        parallel_rebuild: cfg.tree.parallel_rebuild,
        sizes: args.sizes.clone().unwrap_or_else(|| TreeBenchParams::default().sizes),
        baseline_every: args.baseline_every,
        validate_samples: if args.validate { 1_000 } else { 0 },
        ..TreeBenchParams::default()
    };
    let report = run_tree_benchmark(&trace, &filler, &params)?;
    create_dir(&args.common.out)?;
    write_bench(&args.common.out, &report)?;

    let s = &report.summary;
    println!(
        "{} ops over {} scans; final tree {} ({} valid); insert {:.3} us, knn {:.3} us, box delete {:.3} us",
        s.ops, s.scans, s.final_tree_size, s.final_valid_count, s.insert_us_mean, s.knn_us_mean, s.boxdel_us_mean
    );
    for b in &s.buckets {
        println!(
            "  size {:>9}: {} inserts {:.3} us, {} knn {:.3} us",
            b.size, b.insert_count, b.insert_us, b.knn_count, b.knn_us
        );
    }
    if let (Some(ikd), Some(rebuild)) = (s.ikd_update_ms_per_scan, s.rebuild_ms_per_scan) {
        println!("  map update per scan: ikd-tree {ikd:.3} ms, static rebuild {rebuild:.3} ms");
    }
    if let Some(v) = s.validation {
        println!("  validation: {} kNN queries checked, {} mismatches", v.checked, v.mismatches);
        if v.mismatches > 0 {
            bail!("{} of {} validated kNN queries disagree with brute force", v.mismatches, v.checked);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // sources often repeat inside the message that wraps them
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
