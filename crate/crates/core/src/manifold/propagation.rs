use nalgebra::{Matrix3, Rotation3, SMatrix, Vector3};
use thiserror::Error;

use super::so3;
use super::state::{idx, Covariance24, NavState, NoiseParams, NoiseVector, TangentVector, DIM, NOISE_DIM};

/// One IMU reading: body angular rate and specific force.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub omega_m: Vector3<f64>,
    pub acc_m: Vector3<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("IMU timestamps must increase strictly: {prev} then {next}")]
    NonMonotone { prev: f64, next: f64 },
}

pub type NoiseJacobian = SMatrix<f64, DIM, NOISE_DIM>;

#[inline]
fn set3(m: &mut Covariance24, r: usize, c: usize, b: &Matrix3<f64>) {
    m.fixed_view_mut::<3, 3>(r, c).copy_from(b);
}

/// Continuous-time kinematics `f(x, u, w)` as integrated over one step of
/// `dt`. The position row carries the `½·dt·a` term so that `x ⊞ dt·f` is
/// exact for constant acceleration over the step.
pub fn kinematics_f(x: &NavState, u: &ImuSample, w: &NoiseVector, dt: f64) -> TangentVector {
    let n = |at: usize| w.fixed_rows::<3>(at).into_owned();
    let acc_world = x.rot * (u.acc_m - x.bias_acc - n(idx::N_ACC)) + x.gravity;
    let mut f = TangentVector::zeros();
    f.fixed_rows_mut::<3>(idx::ROT).copy_from(&(u.omega_m - x.bias_gyro - n(idx::N_GYRO)));
    f.fixed_rows_mut::<3>(idx::POS).copy_from(&(x.vel + 0.5 * dt * acc_world));
    f.fixed_rows_mut::<3>(idx::VEL).copy_from(&acc_world);
    f.fixed_rows_mut::<3>(idx::BIAS_GYRO).copy_from(&n(idx::N_BIAS_GYRO));
    f.fixed_rows_mut::<3>(idx::BIAS_ACC).copy_from(&n(idx::N_BIAS_ACC));
    f
}

/// One noise-free step `x ⊞ (dt·f(x, u, 0))`.
#[inline]
pub fn step(x: &NavState, u: &ImuSample, dt: f64) -> NavState {
    x.boxplus(&(dt * kinematics_f(x, u, &NoiseVector::zeros(), dt)))
}

/// Error-state transition and noise Jacobians of [`step`] evaluated at `x`.
pub fn jacobians(x: &NavState, u: &ImuSample, dt: f64) -> (Covariance24, NoiseJacobian) {
    let omega = (u.omega_m - x.bias_gyro) * dt;
    let acc = u.acc_m - x.bias_acc;
    let r = x.rot.matrix();
    let ra_hat = r * so3::hat(&acc);
    let jr = so3::right_jacobian(&omega);
    let i3 = Matrix3::identity();
    let half_dt2 = 0.5 * dt * dt;

    let mut fx = Covariance24::identity();
    set3(&mut fx, idx::ROT, idx::ROT, so3::exp(&-omega).matrix());
    set3(&mut fx, idx::ROT, idx::BIAS_GYRO, &(-jr * dt));
    set3(&mut fx, idx::POS, idx::ROT, &(-half_dt2 * ra_hat));
    set3(&mut fx, idx::POS, idx::VEL, &(i3 * dt));
    set3(&mut fx, idx::POS, idx::BIAS_ACC, &(-half_dt2 * r));
    set3(&mut fx, idx::POS, idx::GRAVITY, &(i3 * half_dt2));
    set3(&mut fx, idx::VEL, idx::ROT, &(-dt * ra_hat));
    set3(&mut fx, idx::VEL, idx::BIAS_ACC, &(-dt * r));
    set3(&mut fx, idx::VEL, idx::GRAVITY, &(i3 * dt));

    let mut fw = NoiseJacobian::zeros();
    fw.fixed_view_mut::<3, 3>(idx::ROT, idx::N_GYRO).copy_from(&(-jr * dt));
    fw.fixed_view_mut::<3, 3>(idx::POS, idx::N_ACC).copy_from(&(-half_dt2 * r));
    fw.fixed_view_mut::<3, 3>(idx::VEL, idx::N_ACC).copy_from(&(-dt * r));
    fw.fixed_view_mut::<3, 3>(idx::BIAS_GYRO, idx::N_BIAS_GYRO).copy_from(&(i3 * dt));
    fw.fixed_view_mut::<3, 3>(idx::BIAS_ACC, idx::N_BIAS_ACC).copy_from(&(i3 * dt));
    (fx, fw)
}

#[inline]
pub fn symmetrize(p: &mut Covariance24) {
    *p = 0.5 * (*p + p.transpose());
}

/// Kinematic snapshot at the start of a constant-input segment, used to
/// interpolate the pose at any instant inside the segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseSample {
    pub t: f64,
    pub rot: Rotation3<f64>,
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
    /// Bias-corrected body rate.
    pub omega: Vector3<f64>,
    /// World-frame acceleration including gravity.
    pub acc: Vector3<f64>,
}

impl PoseSample {
    fn at(x: &NavState, u: &ImuSample, t: f64) -> Self {
        Self {
            t,
            rot: x.rot,
            pos: x.pos,
            vel: x.vel,
            omega: u.omega_m - x.bias_gyro,
            acc: x.rot * (u.acc_m - x.bias_acc) + x.gravity,
        }
    }

    /// IMU pose at `t`, extrapolating this segment's motion.
    pub fn pose_at(&self, t: f64) -> (Rotation3<f64>, Vector3<f64>) {
        let dt = t - self.t;
        (self.rot * so3::exp(&(self.omega * dt)), self.pos + self.vel * dt + 0.5 * dt * dt * self.acc)
    }
}

#[derive(Clone, Debug)]
pub struct Propagated {
    pub state: NavState,
    pub cov: Covariance24,
    /// Segment starts in time order, ending with a sample at the final time.
    pub poses: Vec<PoseSample>,
}

/// Forward propagation with periodic re-orthonormalization of rotations.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub noise: NoiseParams,
    steps: u64,
}

const ORTHONORMALIZE_EVERY: u64 = 1000;

impl Propagator {
    pub fn new(noise: NoiseParams) -> Self {
        Self { noise, steps: 0 }
    }

    /// Propagate from `t_start` to `t_end`. Each sample's input holds until
    /// the next sample's timestamp; the first sample also covers any gap
    /// before it and the last one holds up to `t_end`.
    pub fn propagate(
        &mut self,
        state: &NavState,
        cov: &Covariance24,
        imu: &[ImuSample],
        t_start: f64,
        t_end: f64,
    ) -> Result<Propagated, PropagationError> {
        for w in imu.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(PropagationError::NonMonotone { prev: w[0].t, next: w[1].t });
            }
        }
        let mut x = *state;
        let mut p = *cov;
        let mut poses = Vec::with_capacity(imu.len() + 1);
        let mut t = t_start;
        let mut active = imu.first();
        for (i, u) in imu.iter().enumerate() {
            if t >= t_end {
                break;
            }
            let seg_end = imu.get(i + 1).map_or(t_end, |next| next.t.min(t_end));
            if seg_end <= t {
                continue;
            }
            let dt = seg_end - t;
            active = Some(u);
            poses.push(PoseSample::at(&x, u, t));
            let (fx, fw) = jacobians(&x, u, dt);
            let q = self.noise.discrete_covariance(dt);
            p = fx * p * fx.transpose() + fw * q * fw.transpose();
            symmetrize(&mut p);
            x = step(&x, u, dt);
            self.steps += 1;
            if self.steps % ORTHONORMALIZE_EVERY == 0 {
                x = x.orthonormalized();
            }
            t = seg_end;
        }
        if let Some(u) = active {
            poses.push(PoseSample::at(&x, u, t));
        }
        Ok(Propagated { state: x, cov: p, poses })
    }
}
