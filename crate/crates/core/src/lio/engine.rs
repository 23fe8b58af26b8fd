use std::time::{Duration, Instant};

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::bench::{BenchRecord, OpTrace, TraceOp};
use crate::geometry::Point3;
use crate::ikd_tree::{BalanceParams, IkdTree, TreeError};
use crate::manifold::{idx, Covariance24, ImuSample, NavState, NoiseParams, PropagationError, Propagator, STANDARD_GRAVITY};

use super::dataset::{Dataset, DatasetMeta, Scan, StampedPose};
use super::map_region::{MapRegion, RegionTooSmall};
use super::update::{iterated_update, UpdateParams};
use super::{motion_compensate, temporal_downsample, to_world};

#[derive(Debug, Error)]
pub enum LioError {
    #[error(transparent)]
    Region(#[from] RegionTooSmall),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("no IMU samples cover scan {index} ({t_start:.3}..{t_end:.3} s)")]
    NoImu { index: usize, t_start: f64, t_end: f64 },
    #[error("no IMU samples in the initialization interval")]
    NoInitImu,
    #[error("filter diverged at scan {index} (t = {t:.3} s): position norm {norm:.1} m exceeds {bound} m")]
    Diverged { index: usize, t: f64, norm: f64, bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Prior standard deviations of the initial state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialSigma {
    pub rot: f64,
    pub pos: f64,
    pub vel: f64,
    pub bias_gyro: f64,
    pub bias_acc: f64,
    pub gravity: f64,
    pub extrinsic_rot: f64,
    pub extrinsic_pos: f64,
}

impl Default for InitialSigma {
    fn default() -> Self {
        Self {
            rot: 1e-2,
            pos: 1e-3,
            vel: 1e-2,
            bias_gyro: 1e-3,
            bias_acc: 1e-2,
            gravity: 1e-2,
            extrinsic_rot: 1e-3,
            extrinsic_pos: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineParams {
    /// Edge of the local map cube, m.
    pub map_length: f64,
    /// Map downsample cell edge, m.
    pub resolution: f64,
    /// Keep one raw point out of this many.
    pub temporal_downsample: usize,
    /// Sensor range used for the detection ball and the range gate, m.
    pub fov_range: f64,
    pub min_range: f64,
    pub gamma: f64,
    pub balance: BalanceParams,
    pub parallel_rebuild: bool,
    pub update: UpdateParams,
    pub noise: NoiseParams,
    pub initial_sigma: InitialSigma,
    /// Length of the assumed-still interval at the start of the IMU stream, s.
    pub init_still_time: f64,
    /// Abort when the position estimate leaves this ball around the origin, m.
    pub divergence_bound: f64,
    pub record_trace: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            map_length: 1000.0,
            resolution: 0.5,
            temporal_downsample: 4,
            fov_range: 100.0,
            min_range: 0.3,
            gamma: 1.5,
            balance: BalanceParams::default(),
            parallel_rebuild: true,
            update: UpdateParams::default(),
            noise: NoiseParams::default(),
            initial_sigma: InitialSigma::default(),
            init_still_time: 0.5,
            divergence_bound: 1e4,
            record_trace: false,
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<(), LioError> {
        let bad = |m: &str| Err(LioError::InvalidParams(m.into()));
        if !(self.resolution > 0.0) {
            return bad("resolution must be positive");
        }
        if self.temporal_downsample == 0 {
            return bad("temporal_downsample must be at least 1");
        }
        if !(self.min_range >= 0.0 && self.min_range < self.fov_range) {
            return bad("min_range must lie in [0, fov_range)");
        }
        if self.update.residual.k < 3 {
            return bad("k must be at least 3 to fit a plane");
        }
        if !(self.update.epsilon > 0.0) || self.update.max_iterations == 0 {
            return bad("epsilon must be positive and max_iterations at least 1");
        }
        if !(self.update.residual.range_sigma > 0.0) {
            return bad("range_sigma must be positive");
        }
        if !(self.init_still_time > 0.0 && self.divergence_bound > 0.0) {
            return bad("init_still_time and divergence_bound must be positive");
        }
        self.balance.validate().map_err(|e| LioError::InvalidParams(e.to_string()))?;
        self.noise.validate().map_err(LioError::InvalidParams)?;
        MapRegion::new(Point3::ORIGIN, self.map_length, self.gamma, self.fov_range)?;
        Ok(())
    }
}

/// Wall time of each stage for one scan.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTiming {
    pub propagate: Duration,
    pub compensate: Duration,
    pub update: Duration,
    pub map_insert: Duration,
    pub region: Duration,
}

impl StageTiming {
    pub fn total(&self) -> Duration {
        self.propagate + self.compensate + self.update + self.map_insert + self.region
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    pub index: usize,
    /// Scan end time, s.
    pub t: f64,
    pub points_used: usize,
    /// Propagated state before the update.
    pub prior: NavState,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
    pub correspondences: usize,
    pub inserted: usize,
    pub deleted: usize,
    pub timing: StageTiming,
    pub bench: BenchRecord,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Vec<StampedPose>,
    pub scans: Vec<ScanReport>,
    pub final_cov: Covariance24,
    pub map_size: (usize, usize),
    pub trace: Option<OpTrace>,
}

/// Per-scan odometry and mapping loop.
pub struct LioEngine {
    params: EngineParams,
    imu: Vec<ImuSample>,
    max_gap: f64,
    propagator: Propagator,
    state: NavState,
    cov: Covariance24,
    t: Option<f64>,
    tree: IkdTree,
    region: Option<MapRegion>,
    trace: Option<OpTrace>,
}

fn still_alignment(imu: &[ImuSample], duration: f64) -> Option<(Rotation3<f64>, Vector3<f64>, f64)> {
    let t0 = imu.first()?.t;
    let window: Vec<&ImuSample> = imu.iter().take_while(|s| s.t <= t0 + duration).collect();
    let n = window.len() as f64;
    let acc = window.iter().map(|s| s.acc_m).sum::<Vector3<f64>>() / n;
    let gyro = window.iter().map(|s| s.omega_m).sum::<Vector3<f64>>() / n;
    if !(acc.norm() > 0.0) {
        return None;
    }
    // world z is opposite to gravity; the still accelerometer measures +z
    let rot = Rotation3::rotation_between(&acc, &Vector3::z()).unwrap_or_else(|| {
        Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
    });
    Some((rot, gyro, acc.norm()))
}

impl LioEngine {
    pub fn new(meta: &DatasetMeta, imu: Vec<ImuSample>, params: EngineParams) -> Result<Self, LioError> {
        params.validate()?;
        let (rot, gyro_bias, acc_norm) = still_alignment(&imu, params.init_still_time).ok_or(LioError::NoInitImu)?;
        let gravity_norm = if (acc_norm - STANDARD_GRAVITY).abs() < 0.5 { STANDARD_GRAVITY } else { acc_norm };
        let state = NavState {
            rot,
            bias_gyro: gyro_bias,
            gravity: Vector3::new(0.0, 0.0, -gravity_norm),
            rot_il: meta.extrinsic.rotation().to_rotation_matrix(),
            pos_il: meta.extrinsic.translation(),
            ..NavState::default()
        };
        let s = params.initial_sigma;
        let mut cov = Covariance24::zeros();
        for (at, sigma) in [
            (idx::ROT, s.rot),
            (idx::POS, s.pos),
            (idx::VEL, s.vel),
            (idx::BIAS_GYRO, s.bias_gyro),
            (idx::BIAS_ACC, s.bias_acc),
            (idx::GRAVITY, s.gravity),
            (idx::ROT_IL, s.extrinsic_rot),
            (idx::POS_IL, s.extrinsic_pos),
        ] {
            for i in at..at + 3 {
                cov[(i, i)] = sigma * sigma;
            }
        }
        let tree = IkdTree::new(params.balance);
        Ok(Self {
            params,
            imu,
            max_gap: 2.0 / meta.imu_rate,
            propagator: Propagator::new(params.noise),
            state,
            cov,
            t: None,
            tree,
            region: None,
            trace: params.record_trace.then(OpTrace::default),
        })
    }

    pub fn state(&self) -> &NavState {
        &self.state
    }

    pub fn covariance(&self) -> &Covariance24 {
        &self.cov
    }

    pub fn map(&self) -> &IkdTree {
        &self.tree
    }

    pub fn map_mut(&mut self) -> &mut IkdTree {
        &mut self.tree
    }

    pub fn region(&self) -> Option<&MapRegion> {
        self.region.as_ref()
    }

    pub fn take_trace(&mut self) -> Option<OpTrace> {
        self.trace.take()
    }

    fn imu_window(&self, t_start: f64, t_end: f64) -> std::ops::Range<usize> {
        let first = self.imu.partition_point(|s| s.t <= t_start).saturating_sub(1);
        let last = self.imu.partition_point(|s| s.t < t_end);
        first..last.max(first)
    }

    pub fn process_scan(&mut self, scan: &Scan) -> Result<ScanReport, LioError> {
        let mut timing = StageTiming::default();
        let t_start = self.t.unwrap_or(scan.t_start);
        let stats_before = self.tree.stats().total_rebuilds();

        let clock = Instant::now();
        let window = &self.imu[self.imu_window(t_start, scan.t_end)];
        if window.is_empty() || window[0].t >= scan.t_end {
            return Err(LioError::NoImu { index: scan.index, t_start: scan.t_start, t_end: scan.t_end });
        }
        let prop = self.propagator.propagate(&self.state, &self.cov, window, t_start, scan.t_end)?;
        timing.propagate = clock.elapsed();

        let clock = Instant::now();
        let (lo, hi) = (self.params.min_range, self.params.fov_range);
        let raw: Vec<_> = temporal_downsample(&scan.points, self.params.temporal_downsample)
            .into_iter()
            .filter(|p| {
                let r = p.p.norm();
                r >= lo && r <= hi
            })
            .collect();
        let compensated = motion_compensate(&raw, &prop.poses, &prop.state, self.max_gap);
        let points: Vec<Vector3<f64>> = compensated.iter().map(|p| p.p).collect();
        timing.compensate = clock.elapsed();

        let clock = Instant::now();
        let first_scan = self.tree.size().1 == 0;
        let outcome = if first_scan {
            None
        } else {
            Some(iterated_update(&prop.state, &prop.cov, &points, &self.tree, &self.params.update))
        };
        let (state, cov) = match &outcome {
            Some(o) => (o.state, o.cov),
            None => (prop.state, prop.cov),
        };
        timing.update = clock.elapsed();

        let norm = state.pos.norm();
        if !state.is_finite() || norm > self.params.divergence_bound {
            return Err(LioError::Diverged { index: scan.index, t: scan.t_end, norm, bound: self.params.divergence_bound });
        }
        self.state = state;
        self.cov = cov;
        self.t = Some(scan.t_end);

        let clock = Instant::now();
        let world = to_world(&self.state, &points);
        let mut peak = Duration::ZERO;
        let mut inserted = 0;
        let parallel = self.params.parallel_rebuild;
        for p in &world {
            let op = Instant::now();
            if self.tree.insert_with_downsample(*p, self.params.resolution, parallel)? {
                inserted += 1;
            }
            peak = peak.max(op.elapsed());
        }
        timing.map_insert = clock.elapsed();
        if let Some(trace) = &mut self.trace {
            let res = &self.params.update.residual;
            if !first_scan {
                trace.ops.extend(
                    world.iter().map(|&target| TraceOp::Knn { scan: scan.index, target, k: res.k, max_dist: res.max_dist }),
                );
            }
            trace.ops.extend(
                world.iter().map(|&point| TraceOp::Insert { scan: scan.index, point, resolution: self.params.resolution }),
            );
        }

        let clock = Instant::now();
        let lidar = Point3::from_vector(&self.state.lidar_to_world(&Vector3::zeros()));
        let p = self.params;
        let region = match &mut self.region {
            Some(r) => r,
            None => self.region.insert(MapRegion::new(lidar, p.map_length, p.gamma, p.fov_range)?),
        };
        let moved = region.update(&lidar, &mut self.tree, parallel);
        timing.region = clock.elapsed();
        if let Some(trace) = &mut self.trace {
            trace.ops.extend(moved.slabs.iter().map(|&region| TraceOp::BoxDelete { scan: scan.index, region }));
        }

        let (tree_size, valid_count) = self.tree.size();
        let query = outcome.as_ref().map(|o| o.query).unwrap_or_default();
        let bench = BenchRecord {
            scan_index: scan.index,
            tree_size,
            valid_count,
            insert_us_mean: mean_us(timing.map_insert, world.len()),
            knn_us_mean: mean_us(query.knn_time, query.knn_calls),
            boxdel_us_mean: mean_us(timing.region, moved.slabs.len()),
            peak_us: peak.max(if moved.slabs.is_empty() { Duration::ZERO } else { timing.region }).as_secs_f64() * 1e6,
            rebuilds: (self.tree.stats().total_rebuilds() - stats_before) as usize,
        };
        Ok(ScanReport {
            index: scan.index,
            t: scan.t_end,
            points_used: points.len(),
            prior: prop.state,
            iterations: outcome.as_ref().map_or(0, |o| o.iterations),
            converged: outcome.as_ref().is_some_and(|o| o.converged),
            degenerate: outcome.as_ref().is_some_and(|o| o.degenerate),
            correspondences: outcome.as_ref().map_or(0, |o| o.correspondences),
            inserted,
            deleted: moved.deleted_points,
            timing,
            bench,
        })
    }

    pub fn pose(&self) -> StampedPose {
        StampedPose {
            t: self.t.unwrap_or(f64::NAN),
            pos: self.state.pos,
            rot: UnitQuaternion::from_rotation_matrix(&self.state.rot),
        }
    }

    /// Process every scan of `dataset` in order.
    pub fn run(dataset: &Dataset, params: EngineParams) -> Result<RunOutput, LioError> {
        let mut engine = LioEngine::new(&dataset.meta, dataset.imu.clone(), params)?;
        let mut trajectory = Vec::with_capacity(dataset.scans.len());
        let mut scans = Vec::with_capacity(dataset.scans.len());
        for scan in &dataset.scans {
            scans.push(engine.process_scan(scan)?);
            trajectory.push(engine.pose());
        }
        engine.tree.wait_for_rebuild();
        Ok(RunOutput {
            trajectory,
            scans,
            final_cov: engine.cov,
            map_size: engine.tree.size(),
            trace: engine.take_trace(),
        })
    }
}

fn mean_us(total: Duration, n: usize) -> f64 {
    if n == 0 { 0.0 } else { total.as_secs_f64() * 1e6 / n as f64 }
}
