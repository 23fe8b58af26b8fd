use nalgebra::{Matrix3, Rotation3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::so3;

pub const DIM: usize = 24;
pub const NOISE_DIM: usize = 12;

/// Offsets of each 3-block in the tangent vector.
pub mod idx {
    pub const ROT: usize = 0;
    pub const POS: usize = 3;
    pub const VEL: usize = 6;
    pub const BIAS_GYRO: usize = 9;
    pub const BIAS_ACC: usize = 12;
    pub const GRAVITY: usize = 15;
    pub const ROT_IL: usize = 18;
    pub const POS_IL: usize = 21;

    /// Offsets of the noise blocks: gyro, accel, gyro-bias walk, accel-bias walk.
    pub const N_GYRO: usize = 0;
    pub const N_ACC: usize = 3;
    pub const N_BIAS_GYRO: usize = 6;
    pub const N_BIAS_ACC: usize = 9;
}

pub type TangentVector = SVector<f64, DIM>;
pub type Covariance24 = SMatrix<f64, DIM, DIM>;
pub type NoiseVector = SVector<f64, NOISE_DIM>;

/// IMU pose, velocity, biases, gravity and the LiDAR-to-IMU extrinsic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavState {
    pub rot: Rotation3<f64>,
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub bias_gyro: Vector3<f64>,
    pub bias_acc: Vector3<f64>,
    pub gravity: Vector3<f64>,
    pub rot_il: Rotation3<f64>,
    pub pos_il: Vector3<f64>,
}

pub const STANDARD_GRAVITY: f64 = 9.81;

impl Default for NavState {
    fn default() -> Self {
        Self {
            rot: Rotation3::identity(),
            pos: Vector3::zeros(),
            vel: Vector3::zeros(),
            bias_gyro: Vector3::zeros(),
            bias_acc: Vector3::zeros(),
            gravity: Vector3::new(0.0, 0.0, -STANDARD_GRAVITY),
            rot_il: Rotation3::identity(),
            pos_il: Vector3::zeros(),
        }
    }
}

#[inline]
fn block(v: &TangentVector, at: usize) -> Vector3<f64> {
    v.fixed_rows::<3>(at).into_owned()
}

impl NavState {
    /// `x ⊞ δ`: rotations compose on the right with `exp(δ_rot)`, the rest adds.
    pub fn boxplus(&self, d: &TangentVector) -> NavState {
        NavState {
            rot: self.rot * so3::exp(&block(d, idx::ROT)),
            pos: self.pos + block(d, idx::POS),
            vel: self.vel + block(d, idx::VEL),
            bias_gyro: self.bias_gyro + block(d, idx::BIAS_GYRO),
            bias_acc: self.bias_acc + block(d, idx::BIAS_ACC),
            gravity: self.gravity + block(d, idx::GRAVITY),
            rot_il: self.rot_il * so3::exp(&block(d, idx::ROT_IL)),
            pos_il: self.pos_il + block(d, idx::POS_IL),
        }
    }

    /// `self ⊟ other`, the tangent vector taking `other` to `self`.
    pub fn boxminus(&self, other: &NavState) -> TangentVector {
        let mut d = TangentVector::zeros();
        d.fixed_rows_mut::<3>(idx::ROT).copy_from(&so3::log(&(other.rot.inverse() * self.rot)));
        d.fixed_rows_mut::<3>(idx::POS).copy_from(&(self.pos - other.pos));
        d.fixed_rows_mut::<3>(idx::VEL).copy_from(&(self.vel - other.vel));
        d.fixed_rows_mut::<3>(idx::BIAS_GYRO).copy_from(&(self.bias_gyro - other.bias_gyro));
        d.fixed_rows_mut::<3>(idx::BIAS_ACC).copy_from(&(self.bias_acc - other.bias_acc));
        d.fixed_rows_mut::<3>(idx::GRAVITY).copy_from(&(self.gravity - other.gravity));
        d.fixed_rows_mut::<3>(idx::ROT_IL).copy_from(&so3::log(&(other.rot_il.inverse() * self.rot_il)));
        d.fixed_rows_mut::<3>(idx::POS_IL).copy_from(&(self.pos_il - other.pos_il));
        d
    }

    pub fn orthonormalized(&self) -> NavState {
        NavState { rot: so3::orthonormalize(&self.rot), rot_il: so3::orthonormalize(&self.rot_il), ..*self }
    }

    /// LiDAR-frame point to the world frame.
    #[inline]
    pub fn lidar_to_world(&self, p_l: &Vector3<f64>) -> Vector3<f64> {
        self.rot * (self.rot_il * p_l + self.pos_il) + self.pos
    }

    pub fn is_finite(&self) -> bool {
        let v = |x: &Vector3<f64>| x.iter().all(|c| c.is_finite());
        let m = |r: &Rotation3<f64>| r.matrix().iter().all(|c| c.is_finite());
        m(&self.rot)
            && v(&self.pos)
            && v(&self.vel)
            && v(&self.bias_gyro)
            && v(&self.bias_acc)
            && v(&self.gravity)
            && m(&self.rot_il)
            && v(&self.pos_il)
    }
}

/// Derivative of `(x̂ᵏ ⊞ x̃) ⊟ x̂` with respect to `x̃` at zero: identity
/// except the rotation blocks, which are `J_r(δθ)⁻¹` for `δθ = x̂ᵏ ⊟ x̂`.
pub fn iterate_jacobian(iterate: &NavState, prior: &NavState) -> Covariance24 {
    let d = iterate.boxminus(prior);
    let mut j = Covariance24::identity();
    j.fixed_view_mut::<3, 3>(idx::ROT, idx::ROT)
        .copy_from(&so3::right_jacobian_inv(&block(&d, idx::ROT)));
    j.fixed_view_mut::<3, 3>(idx::ROT_IL, idx::ROT_IL)
        .copy_from(&so3::right_jacobian_inv(&block(&d, idx::ROT_IL)));
    j
}

/// White-noise densities of the IMU and its bias random walks, per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// rad/s/√Hz
    pub gyro: f64,
    /// m/s²/√Hz
    pub acc: f64,
    /// rad/s²/√Hz
    pub gyro_bias: f64,
    /// m/s³/√Hz
    pub acc_bias: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { gyro: 1e-3, acc: 1e-2, gyro_bias: 1e-5, acc_bias: 1e-4 }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("gyro", self.gyro), ("acc", self.acc), ("gyro_bias", self.gyro_bias), ("acc_bias", self.acc_bias)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("noise density {name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// Covariance of the per-step noise vector for a step of `dt` seconds.
    /// The step integrates `dt·w`, so a density `σ` becomes `σ²/dt`.
    pub fn discrete_covariance(&self, dt: f64) -> SMatrix<f64, NOISE_DIM, NOISE_DIM> {
        let mut q = SMatrix::<f64, NOISE_DIM, NOISE_DIM>::zeros();
        for (at, s) in [
            (idx::N_GYRO, self.gyro),
            (idx::N_ACC, self.acc),
            (idx::N_BIAS_GYRO, self.gyro_bias),
            (idx::N_BIAS_ACC, self.acc_bias),
        ] {
            q.fixed_view_mut::<3, 3>(at, at).copy_from(&(Matrix3::identity() * (s * s / dt)));
        }
        q
    }
}
