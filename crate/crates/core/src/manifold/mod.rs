//! Navigation state on SO(3)×R¹⁵×SO(3)×R³ and its IMU-driven propagation.

mod propagation;
pub mod so3;
mod state;

pub use propagation::{
    jacobians, kinematics_f, step, symmetrize, ImuSample, NoiseJacobian, PoseSample, Propagated, PropagationError,
    Propagator,
};
pub use state::{
    idx, iterate_jacobian, Covariance24, NavState, NoiseParams, NoiseVector, TangentVector, DIM, NOISE_DIM,
    STANDARD_GRAVITY,
};

#[cfg(test)]
pub(crate) mod testing {
    use nalgebra::Vector3;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    use super::{so3, ImuSample, NavState, TangentVector, DIM};

    pub fn random_vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
    }

    pub fn random_rotation_vector(rng: &mut ChaCha8Rng, max_norm: f64) -> Vector3<f64> {
        loop {
            let v = random_vec3(rng, 1.0);
            if v.norm() <= 1.0 {
                return v * max_norm;
            }
        }
    }

    pub fn random_state(rng: &mut ChaCha8Rng) -> NavState {
        NavState {
            rot: so3::exp(&random_rotation_vector(rng, 3.0)),
            pos: random_vec3(rng, 10.0),
            vel: random_vec3(rng, 2.0),
            bias_gyro: random_vec3(rng, 0.01),
            bias_acc: random_vec3(rng, 0.1),
            gravity: Vector3::new(0.0, 0.0, -9.81) + random_vec3(rng, 0.1),
            rot_il: so3::exp(&random_rotation_vector(rng, 0.5)),
            pos_il: random_vec3(rng, 0.2),
        }
    }

    pub fn random_tangent(rng: &mut ChaCha8Rng, rot_norm: f64) -> TangentVector {
        let mut d = TangentVector::from_fn(|_, _| rng.random_range(-1.0..1.0));
        for at in [0, 18] {
            d.fixed_rows_mut::<3>(at).copy_from(&random_rotation_vector(rng, rot_norm));
        }
        debug_assert_eq!(d.len(), DIM);
        d
    }

    pub fn random_imu(rng: &mut ChaCha8Rng, t: f64) -> ImuSample {
        ImuSample { t, omega_m: random_vec3(rng, 2.0), acc_m: Vector3::new(0.0, 0.0, 9.81) + random_vec3(rng, 3.0) }
    }
}
