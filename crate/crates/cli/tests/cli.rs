use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lio_core::lio::dataset::read_trajectory;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const STILL: &str = r#"
seed = 3
[trajectory]
duration = 2.0
kind = "spin"
rate_deg = [0.0, 0.0, 0.0]
"#;

const SMALL_LOOP: &str = r#"
seed = 5
[trajectory]
duration = 8.0
kind = "loop"
radius = 2.0
still_time = 1.0
"#;

fn lio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lio")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &TempDir, name: &str, spec: &str) -> std::path::PathBuf {
    let spec_path = dir.path().join(format!("{name}.toml"));
    fs::write(&spec_path, spec).unwrap();
    let out = dir.path().join(name);
    ok(&lio(&["gen", path(&spec_path), "--out", path(&out)]));
    out
}

fn tree_digest(dir: &Path) -> Vec<u8> {
    let mut files: Vec<_> = walk(dir);
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(dir).unwrap().to_string_lossy().as_bytes());
        h.update(fs::read(&f).unwrap());
    }
    h.finalize().to_vec()
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() { out.extend(walk(&p)) } else { out.push(p) }
    }
    out
}

#[test]
fn gen_minimal_spec_writes_scans() {
    let tmp = TempDir::new().unwrap();
    let ds = gen(&tmp, "still", STILL);
    assert!(ds.join("meta.json").is_file() && ds.join("imu.csv").is_file() && ds.join("gt_traj.csv").is_file());
    assert!(ds.join("scans/scan_000000.csv").is_file());
}

#[test]
fn gen_is_byte_identical_for_a_fixed_seed() {
    let tmp = TempDir::new().unwrap();
    let a = gen(&tmp, "a", STILL);
    let b = gen(&tmp, "b", STILL);
    assert_eq!(tree_digest(&a), tree_digest(&b));
    let c = tmp.path().join("c");
    ok(&lio(&["gen", path(&tmp.path().join("a.toml")), "--out", path(&c), "--seed", "4"]));
    assert_ne!(tree_digest(&a), tree_digest(&c));
}

#[test]
fn gen_rejects_unknown_key() {
    let tmp = TempDir::new().unwrap();
    let spec = tmp.path().join("bad.toml");
    fs::write(&spec, "seed = 1\nbogus = 2\n").unwrap();
    let out = lio(&["gen", path(&spec), "--out", path(&tmp.path().join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn run_stationary_stays_near_origin() {
    let tmp = TempDir::new().unwrap();
    let ds = gen(&tmp, "still", STILL);
    let out = tmp.path().join("out");
    ok(&lio(&["run", path(&ds), "--out", path(&out), "--parallel-rebuild=off"]));
    for f in ["traj.csv", "timing.csv", "bench.csv", "accuracy.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let traj = read_trajectory(&out.join("traj.csv")).unwrap();
    assert_eq!(traj.len(), 20);
    assert!(traj.iter().all(|p| p.pos.norm() < 0.05), "{:?}", traj.last());
}

#[test]
fn run_loop_writes_accuracy() {
    let tmp = TempDir::new().unwrap();
    let ds = gen(&tmp, "loop", SMALL_LOOP);
    let cfg = tmp.path().join("cfg.toml");
    fs::write(&cfg, "[filter]\nmax_iterations = 4\n").unwrap();
    let out = tmp.path().join("out");
    let stdout = ok(&lio(&["run", path(&ds), "--config", path(&cfg), "--out", path(&out), "--trace"]));
    assert!(stdout.contains("rmse"));
    let acc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("accuracy.json")).unwrap()).unwrap();
    for key in ["rmse_m", "end_to_end_m", "length_m"] {
        assert!(acc[key].as_f64().unwrap() >= 0.0);
    }
    assert!(acc["rmse_m"].as_f64().unwrap() < 0.2);
    let header = fs::read_to_string(out.join("bench.csv")).unwrap();
    assert!(header.starts_with("scan_index,tree_size,valid_count,insert_us_mean,knn_us_mean,boxdel_us_mean,peak_us,rebuilds"));
    assert!(out.join("trace.csv").is_file());

    let b = tmp.path().join("bench");
    let stdout = ok(&lio(&["bench", path(&out.join("trace.csv")), "--out", path(&b), "--validate", "--sizes", "1e3,2e3"]));
    assert!(stdout.contains("0 mismatches"));
}

#[test]
fn run_without_imu_fails() {
    let tmp = TempDir::new().unwrap();
    let ds = gen(&tmp, "still", STILL);
    fs::remove_file(ds.join("imu.csv")).unwrap();
    let out = lio(&["run", path(&ds), "--out", path(&tmp.path().join("out"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("imu.csv"));
}

#[test]
fn run_rejects_bad_config() {
    let tmp = TempDir::new().unwrap();
    let ds = gen(&tmp, "still", STILL);
    let cfg = tmp.path().join("cfg.toml");
    fs::write(&cfg, "[tree]\nalpha_bal = 0.2\n").unwrap();
    let out = lio(&["run", path(&ds), "--config", path(&cfg), "--out", path(&tmp.path().join("out"))]);
    assert!(!out.status.success());
}

#[test]
fn bench_synthetic_buckets_at_requested_sizes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("b");
    let start = std::time::Instant::now();
    let stdout = ok(&lio(&[
        "bench",
        "--out",
        path(&out),
        "--points",
        "3e4",
        "--sizes",
        "1e4,2e4",
        "--validate",
        "--parallel-rebuild=on",
    ]));
    assert!(start.elapsed().as_secs() < 60);
    assert!(stdout.contains("0 mismatches"));
    let buckets = fs::read_to_string(out.join("buckets.csv")).unwrap();
    let sizes: Vec<&str> = buckets.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(sizes, ["10000", "20000"]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["final_valid_count"], 30_000);
    assert!(out.join("bench.csv").is_file() && out.join("baseline.csv").is_file());
}

#[test]
fn bench_rejects_malformed_trace() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("t.csv");
    fs::write(&trace, "op,scan,x0,y0,z0,x1,y1,z1,k,value\nteleport,0,0,0,0,0,0,0,0,0\n").unwrap();
    let out = lio(&["bench", path(&trace), "--out", path(&tmp.path().join("b"))]);
    assert!(!out.status.success());
}

#[test]
fn help_lists_every_config_key() {
    let help = ok(&lio(&["--help"]));
    for (key, default, _) in lio_core::config::describe_keys() {
        assert!(help.contains(key) && help.contains(&default), "{key} missing from --help");
    }
}
