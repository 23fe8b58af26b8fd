use lio_core::bench::compute_accuracy;
use lio_core::config::RunConfig;
use lio_core::lio::{Dataset, EngineParams, LioEngine};
use lio_core::synth::{LoopSpec, SpinSpec, SynthSpec, TrajectoryKind, TrajectorySpec};
use tempfile::TempDir;

fn dataset(kind: TrajectoryKind, duration: f64, seed: u64) -> (SynthSpec, Dataset) {
    let spec = SynthSpec { seed, trajectory: TrajectorySpec { duration, kind }, ..SynthSpec::default() };
    let data = spec.generate().unwrap();
    (spec, data)
}

fn params(data: &Dataset) -> EngineParams {
    RunConfig::default().engine_params(Some(&data.meta))
}

fn still() -> TrajectoryKind {
    TrajectoryKind::Spin(SpinSpec::default())
}

fn short_loop() -> TrajectoryKind {
    TrajectoryKind::Loop(LoopSpec { radius: 2.0, still_time: 1.0, ..LoopSpec::default() })
}

#[test]
fn stationary_sensor_stays_put() {
    let (_, data) = dataset(still(), 3.0, 11);
    let out = LioEngine::run(&data, params(&data)).unwrap();
    assert_eq!(out.trajectory.len(), data.scans.len());
    for p in &out.trajectory {
        assert!(p.pos.norm() < 0.03, "t {} drifted to {}", p.t, p.pos);
        assert!(p.rot.angle() < 0.01);
    }
}

#[test]
fn first_scan_builds_the_map_and_later_scans_register() {
    let (_, data) = dataset(still(), 1.0, 12);
    let out = LioEngine::run(&data, params(&data)).unwrap();
    let first = &out.scans[0];
    assert!(first.inserted > 0);
    assert_eq!(first.iterations, 0);
    // a later point in an occupied cell may replace the earlier one
    assert!(first.bench.valid_count > 0 && first.bench.valid_count <= first.inserted);
    for s in &out.scans[1..] {
        assert!(s.iterations >= 1 && s.correspondences > 100, "scan {}: {} correspondences", s.index, s.correspondences);
    }
}

#[test]
fn final_covariance_is_symmetric_positive_definite() {
    let (_, data) = dataset(short_loop(), 6.0, 13);
    let out = LioEngine::run(&data, params(&data)).unwrap();
    let p = out.final_cov;
    assert!((p - p.transpose()).norm() <= 1e-9 * p.norm());
    assert!(p.symmetric_eigenvalues().min() > 0.0);
}

#[test]
fn short_loop_tracks_ground_truth() {
    let (_, data) = dataset(short_loop(), 8.0, 14);
    let out = LioEngine::run(&data, params(&data)).unwrap();
    let acc = compute_accuracy(&out.trajectory, data.ground_truth.as_deref().unwrap()).unwrap();
    assert!(acc.rmse_m < 0.1, "{acc:?}");
}

#[test]
fn parallel_rebuild_changes_nothing_but_timing() {
    let (_, data) = dataset(short_loop(), 4.0, 15);
    let mut p = params(&data);
    p.parallel_rebuild = false;
    let serial = LioEngine::run(&data, p).unwrap();
    p.parallel_rebuild = true;
    let parallel = LioEngine::run(&data, p).unwrap();
    assert_eq!(serial.map_size.1, parallel.map_size.1);
    for (a, b) in serial.trajectory.iter().zip(&parallel.trajectory) {
        assert!((a.pos - b.pos).norm() < 1e-9);
    }
}

#[test]
fn small_map_region_removes_points_it_leaves_behind() {
    let (_, data) = dataset(TrajectoryKind::Loop(LoopSpec::default()), 15.0, 16);
    let mut p = params(&data);
    p.fov_range = 8.0;
    p.map_length = 30.0;
    let mut engine = LioEngine::new(&data.meta, data.imu.clone(), p).unwrap();
    let mut deleted = 0;
    for scan in &data.scans {
        deleted += engine.process_scan(scan).unwrap().deleted;
    }
    assert!(deleted > 0);
    engine.map_mut().wait_for_rebuild();
    let bounds = engine.region().unwrap().bounds();
    let outside: Vec<_> = engine.map().flatten().into_iter().filter(|q| !bounds.contains(q)).collect();
    assert!(outside.is_empty(), "{} points outside {bounds:?}", outside.len());
}

#[test]
fn trace_replays_the_engine_map() {
    let (_, data) = dataset(short_loop(), 4.0, 17);
    let mut p = params(&data);
    p.record_trace = true;
    let out = LioEngine::run(&data, p).unwrap();
    let trace = out.trace.unwrap();
    let report = lio_core::bench::run_tree_benchmark(
        &trace,
        &[],
        &lio_core::bench::TreeBenchParams { warmup: false, parallel_rebuild: false, ..Default::default() },
    )
    .unwrap();
    assert_eq!(report.summary.final_valid_count, out.map_size.1);
    assert_eq!(report.summary.scans, data.scans.len());
}

#[test]
fn run_output_files_have_expected_shape() {
    let (_, data) = dataset(short_loop(), 3.0, 18);
    let out = LioEngine::run(&data, params(&data)).unwrap();
    let dir = TempDir::new().unwrap();
    let acc = out.write(dir.path(), data.ground_truth.as_deref()).unwrap().unwrap();
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();
    assert_eq!(read("traj.csv").lines().count(), data.scans.len() + 1);
    let timing = read("timing.csv");
    assert!(timing.starts_with("scan_index,t,points,correspondences,iterations,"));
    assert_eq!(timing.lines().count(), data.scans.len() + 1);
    assert_eq!(read("bench.csv").lines().count(), data.scans.len() + 1);
    let json: serde_json::Value = serde_json::from_str(&read("accuracy.json")).unwrap();
    assert!((json["rmse_m"].as_f64().unwrap() - acc.rmse_m).abs() < 1e-12);
    assert!(out.write(&dir.path().join("nogt"), None).unwrap().is_none());
    assert!(!dir.path().join("nogt/accuracy.json").exists());
}

#[test]
fn rejects_a_region_smaller_than_the_detection_ball() {
    let (_, data) = dataset(still(), 1.0, 19);
    let mut p = params(&data);
    p.map_length = (3.0 * p.gamma - 1.0) * p.fov_range;
    assert!(LioEngine::new(&data.meta, data.imu.clone(), p).is_err());
}
