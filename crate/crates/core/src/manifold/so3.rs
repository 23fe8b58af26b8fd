//! SO(3) helpers on top of `nalgebra::Rotation3`.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

const SMALL_ANGLE: f64 = 1e-4;

#[inline]
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues exponential.
#[inline]
pub fn exp(theta: &Vector3<f64>) -> Rotation3<f64> {
    Rotation3::new(*theta)
}

/// Rotation vector with angle in `[0, π]`.
///
/// Goes through the quaternion, whose half-angle `atan2` stays accurate for
/// tiny rotations where the trace-based `acos` loses half the digits.
#[inline]
pub fn log(r: &Rotation3<f64>) -> Vector3<f64> {
    UnitQuaternion::from_rotation_matrix(r).scaled_axis()
}

/// Left Jacobian `J_l(θ)`, so that `exp(θ + δ) ≈ exp(J_l δ) exp(θ)`.
pub fn left_jacobian(theta: &Vector3<f64>) -> Matrix3<f64> {
    let a = theta.norm();
    let w = hat(theta);
    let w2 = w * w;
    if a < SMALL_ANGLE {
        return Matrix3::identity() + 0.5 * w + w2 / 6.0;
    }
    let a2 = a * a;
    Matrix3::identity() + (1.0 - a.cos()) / a2 * w + (a - a.sin()) / (a2 * a) * w2
}

pub fn left_jacobian_inv(theta: &Vector3<f64>) -> Matrix3<f64> {
    let a = theta.norm();
    let w = hat(theta);
    let w2 = w * w;
    if a < SMALL_ANGLE {
        return Matrix3::identity() - 0.5 * w + w2 / 12.0;
    }
    let a2 = a * a;
    let c = 1.0 / a2 - (1.0 + a.cos()) / (2.0 * a * a.sin());
    Matrix3::identity() - 0.5 * w + c * w2
}

/// Right Jacobian `J_r(θ) = J_l(−θ)`.
#[inline]
pub fn right_jacobian(theta: &Vector3<f64>) -> Matrix3<f64> {
    left_jacobian(&-theta)
}

#[inline]
pub fn right_jacobian_inv(theta: &Vector3<f64>) -> Matrix3<f64> {
    left_jacobian_inv(&-theta)
}

/// Project back onto SO(3) after accumulated round-off.
pub fn orthonormalize(r: &Rotation3<f64>) -> Rotation3<f64> {
    let mut out = *r;
    out.renormalize();
    out
}

/// `‖RᵀR − I‖∞` and `|det R − 1|`, the larger of the two.
pub fn orthonormality_error(r: &Rotation3<f64>) -> f64 {
    let m = r.matrix();
    let e = (m.transpose() * m - Matrix3::identity()).abs().max();
    e.max((m.determinant() - 1.0).abs())
}
