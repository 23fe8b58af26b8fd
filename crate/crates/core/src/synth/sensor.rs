use std::f64::consts::PI;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::lio::ScanPoint;
use crate::manifold::{so3, ImuSample, NoiseParams, PoseSample, STANDARD_GRAVITY};

use super::trajectory::{TrajectorySpec, TruePose};
use super::world::WorldModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScanPattern {
    /// Azimuth-major sweep over `lines` elevation rows, like a spinning LiDAR.
    Raster { lines: usize },
    /// Non-repeating rose-curve pattern, like a solid-state LiDAR.
    Rosette { petals: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    pub imu_rate: f64,
    pub scan_rate: f64,
    pub points_per_scan: usize,
    /// Half-angles of the field of view, deg.
    pub h_fov_deg: f64,
    pub v_fov_deg: f64,
    pub max_range: f64,
    pub range_sigma: f64,
    /// Beam-direction noise, rad; zero disables it.
    pub direction_sigma: f64,
    pub noise: NoiseParams,
    pub initial_gyro_bias: [f64; 3],
    pub initial_acc_bias: [f64; 3],
    /// True LiDAR-to-IMU rotation `[w, x, y, z]` and translation, m.
    pub extrinsic_rotation: [f64; 4],
    pub extrinsic_translation: [f64; 3],
    pub scan: ScanPattern,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            imu_rate: 200.0,
            scan_rate: 10.0,
            points_per_scan: 2880,
            h_fov_deg: 180.0,
            v_fov_deg: 15.0,
            max_range: 100.0,
            range_sigma: 0.02,
            direction_sigma: 4e-3,
            noise: NoiseParams::default(),
            initial_gyro_bias: [1e-3, -1e-3, 5e-4],
            initial_acc_bias: [1e-2, -1e-2, 2e-2],
            extrinsic_rotation: [1.0, 0.0, 0.0, 0.0],
            extrinsic_translation: [0.05, 0.0, 0.1],
            scan: ScanPattern::Raster { lines: 18 },
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.imu_rate > 0.0 && self.scan_rate > 0.0) {
            return Err("sensor rates must be positive".into());
        }
        if self.points_per_scan == 0 {
            return Err("points_per_scan must be positive".into());
        }
        if !(self.range_sigma >= 0.0 && self.direction_sigma >= 0.0) {
            return Err("noise sigmas must be non-negative".into());
        }
        if !(self.h_fov_deg > 0.0 && self.h_fov_deg <= 180.0 && self.v_fov_deg > 0.0 && self.v_fov_deg < 90.0) {
            return Err("field of view half-angles must lie in (0, 180] and (0, 90) deg".into());
        }
        if !(self.max_range > 0.0) {
            return Err("max_range must be positive".into());
        }
        if let ScanPattern::Raster { lines } = self.scan {
            if lines == 0 || lines > self.points_per_scan {
                return Err("raster lines must lie in [1, points_per_scan]".into());
            }
        }
        self.noise.validate()
    }

    pub fn extrinsic(&self) -> (Rotation3<f64>, Vector3<f64>) {
        let [w, x, y, z] = self.extrinsic_rotation;
        let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
        (q.to_rotation_matrix(), Vector3::from(self.extrinsic_translation))
    }

    /// Beam direction of the `i`-th point of scan `scan`, LiDAR frame.
    pub fn direction(&self, scan: usize, i: usize) -> Vector3<f64> {
        let (h, v) = (self.h_fov_deg.to_radians(), self.v_fov_deg.to_radians());
        let n = self.points_per_scan;
        let (az, el) = match self.scan {
            ScanPattern::Raster { lines } => {
                let cols = n.div_ceil(lines);
                let (col, row) = (i / lines, i % lines);
                let az = -h + 2.0 * h * (col as f64 + 0.5) / cols as f64;
                let el = if lines == 1 { 0.0 } else { -v + 2.0 * v * row as f64 / (lines - 1) as f64 };
                (az, el)
            }
            ScanPattern::Rosette { petals } => {
                // one continuous rose curve, advanced by an irrational step so scans never repeat
                let psi = 2.0 * PI * ((scan * n + i) as f64 * 0.618_033_988_749_895 / 7.0);
                let rho = (petals * psi).sin();
                (h * rho * psi.cos(), v * rho * psi.sin())
            }
        };
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }
}

/// Bias values in effect from `t` until the next sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasSample {
    pub t: f64,
    pub gyro: Vector3<f64>,
    pub acc: Vector3<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Noise-free IMU reading for `[a, b]`: the rate and world acceleration
/// that a constant-input step over the interval must use to land exactly
/// on the true attitude and velocity at `b`.
pub fn interval_reading(a: &TruePose, b: &TruePose, dt: f64) -> (Vector3<f64>, Vector3<f64>) {
    let omega = so3::log(&(a.rot.inverse() * b.rot)) / dt;
    let acc_world = (b.vel - a.vel) / dt;
    (omega, acc_world)
}

fn gravity() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -STANDARD_GRAVITY)
}

/// IMU samples at `spec.imu_rate` over the trajectory duration, with
/// random-walk biases and white noise drawn from `seed`.
pub fn gen_imu(traj: &TrajectorySpec, spec: &SensorSpec, seed: u64) -> (Vec<ImuSample>, Vec<BiasSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let dt = 1.0 / spec.imu_rate;
    let n = (traj.duration * spec.imu_rate).round() as usize;
    let noise = &spec.noise;
    let (sg, sa) = (noise.gyro / dt.sqrt(), noise.acc / dt.sqrt());
    let (sbg, sba) = (noise.gyro_bias * dt.sqrt(), noise.acc_bias * dt.sqrt());
    let mut bg = Vector3::from(spec.initial_gyro_bias);
    let mut ba = Vector3::from(spec.initial_acc_bias);
    let mut imu = Vec::with_capacity(n + 1);
    let mut biases = Vec::with_capacity(n + 1);
    let mut a = traj.pose(0.0);
    for k in 0..=n {
        let t = k as f64 * dt;
        let b = traj.pose(t + dt);
        let (omega, acc_world) = interval_reading(&a, &b, dt);
        let specific = a.rot.inverse() * (acc_world - gravity());
        imu.push(ImuSample { t, omega_m: omega + bg + gaussian(&mut rng) * sg, acc_m: specific + ba + gaussian(&mut rng) * sa });
        biases.push(BiasSample { t, gyro: bg, acc: ba });
        bg += gaussian(&mut rng) * sbg;
        ba += gaussian(&mut rng) * sba;
        a = b;
    }
    (imu, biases)
}

/// True kinematic segments between `t0` and `t1` at the IMU rate, in the
/// form motion compensation consumes.
pub fn true_pose_samples(traj: &TrajectorySpec, imu_rate: f64, t0: f64, t1: f64) -> Vec<PoseSample> {
    let dt = 1.0 / imu_rate;
    let mut k = (t0 * imu_rate).floor() as i64;
    let mut out = Vec::new();
    loop {
        let ta = k as f64 * dt;
        if ta >= t1 {
            break;
        }
        let (a, b) = (traj.pose(ta), traj.pose(ta + dt));
        let (omega, acc) = interval_reading(&a, &b, dt);
        let start = ta.max(t0);
        let lead = start - ta;
        let (rot, pos) = (a.rot * so3::exp(&(omega * lead)), a.pos + a.vel * lead + 0.5 * lead * lead * acc);
        out.push(PoseSample { t: start, rot, pos, vel: a.vel + acc * lead, omega, acc });
        k += 1;
    }
    let end = traj.pose(t1);
    let last = *out.last().expect("t1 > t0");
    out.push(PoseSample { t: t1, rot: end.rot, pos: end.pos, vel: end.vel, ..last });
    out
}

/// One LiDAR return with the surface it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPoint {
    pub point: ScanPoint,
    pub surface: usize,
}

/// Cast every beam of scan `index` from the true LiDAR pose at its own
/// sample time. Beams that miss, or hit beyond `max_range`, are dropped.
pub fn gen_scan(
    traj: &TrajectorySpec,
    world: &WorldModel,
    spec: &SensorSpec,
    index: usize,
    seed: u64,
) -> Vec<LabeledPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let (rot_il, pos_il) = spec.extrinsic();
    let period = 1.0 / spec.scan_rate;
    let t0 = index as f64 * period;
    let n = spec.points_per_scan;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = t0 + period * i as f64 / n as f64;
        let pose = traj.pose(t);
        let mut dir_l = spec.direction(index, i);
        if spec.direction_sigma > 0.0 {
            dir_l = (dir_l + gaussian(&mut rng) * spec.direction_sigma).normalize();
        }
        let range_noise: f64 = rng.sample::<f64, _>(StandardNormal) * spec.range_sigma;
        let origin = pose.pos + pose.rot * pos_il;
        let dir_w = pose.rot * rot_il * dir_l;
        let Some(hit) = world.cast(&origin, &dir_w) else {
            continue;
        };
        if hit.range > spec.max_range {
            continue;
        }
        let range = hit.range + range_noise;
        out.push(LabeledPoint { point: ScanPoint { p: dir_l * range, t, intensity: 0.0 }, surface: hit.surface });
    }
    out
}
