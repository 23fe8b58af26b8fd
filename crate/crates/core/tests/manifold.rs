mod common;

use common::{random_state, random_tangent, random_vec3, rel_err};
use lio_core::manifold::{
    idx, iterate_jacobian, jacobians, so3, step, Covariance24, ImuSample, NavState, NoiseParams, Propagator, TangentVector,
    DIM, STANDARD_GRAVITY,
};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit(j: usize, e: f64) -> TangentVector {
    let mut d = TangentVector::zeros();
    d[j] = e;
    d
}

proptest! {
    #[test]
    fn boxminus_inverts_boxplus(seed in any::<u64>(), scale in 0.0..1.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_state(&mut rng);
        let d = random_tangent(&mut rng, scale);
        let back = x.boxplus(&d).boxminus(&x);
        prop_assert!((back - d).norm() < 1e-9 * (1.0 + d.norm()), "{}", (back - d).norm());
    }

    #[test]
    fn boxplus_keeps_rotations_orthonormal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = random_state(&mut rng);
        for _ in 0..50 {
            x = x.boxplus(&random_tangent(&mut rng, 1.0));
        }
        prop_assert!(so3::orthonormality_error(&x.rot) < 1e-9);
        prop_assert!(so3::orthonormality_error(&x.rot_il) < 1e-9);
    }

    #[test]
    fn so3_log_of_exp_is_identity_inside_pi(v in prop::array::uniform3(-1.8..1.8f64)) {
        let v = Vector3::from(v);
        prop_assert!((so3::log(&so3::exp(&v)) - v).norm() < 1e-9);
    }
}

#[test]
fn iterate_jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let prior = random_state(&mut rng);
        let iterate = prior.boxplus(&random_tangent(&mut rng, 0.5));
        let j = iterate_jacobian(&iterate, &prior);
        let h = 1e-6;
        let mut num = Covariance24::zeros();
        for c in 0..DIM {
            let col = (iterate.boxplus(&unit(c, h)).boxminus(&prior) - iterate.boxplus(&unit(c, -h)).boxminus(&prior)) / (2.0 * h);
            num.set_column(c, &col);
        }
        assert!(rel_err(j.as_slice(), num.as_slice()) < 1e-6);
    }
}

#[test]
fn transition_jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..20 {
        let x = random_state(&mut rng);
        let u = ImuSample { t: 0.0, omega_m: random_vec3(&mut rng, 3.0), acc_m: random_vec3(&mut rng, 12.0) };
        let dt = 0.005;
        let (fx, _) = jacobians(&x, &u, dt);
        let base = step(&x, &u, dt);
        let h = 1e-6;
        let mut num = Covariance24::zeros();
        for c in 0..DIM {
            let col = (step(&x.boxplus(&unit(c, h)), &u, dt).boxminus(&base)
                - step(&x.boxplus(&unit(c, -h)), &u, dt).boxminus(&base))
                / (2.0 * h);
            num.set_column(c, &col);
        }
        assert!(rel_err(fx.as_slice(), num.as_slice()) < 1e-4);
    }
}

#[test]
fn propagated_covariance_stays_symmetric_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let x = random_state(&mut rng);
    let imu: Vec<ImuSample> = (0..2000)
        .map(|i| ImuSample {
            t: i as f64 * 0.005,
            omega_m: random_vec3(&mut rng, 1.0),
            acc_m: Vector3::new(0.0, 0.0, STANDARD_GRAVITY) + random_vec3(&mut rng, 2.0),
        })
        .collect();
    let p0 = Covariance24::identity() * 1e-6;
    let mut prop = Propagator::new(NoiseParams::default());
    let out = prop.propagate(&x, &p0, &imu, 0.0, 10.0).unwrap();
    assert!((out.cov - out.cov.transpose()).norm() < 1e-12 * out.cov.norm());
    let eig = out.cov.symmetric_eigenvalues();
    assert!(eig.min() > 0.0, "min eigenvalue {}", eig.min());
    // unobserved position and attitude uncertainty grows
    assert!(out.cov[(idx::POS, idx::POS)] > p0[(idx::POS, idx::POS)]);
    assert!(out.cov[(idx::ROT + 2, idx::ROT + 2)] > p0[(idx::ROT + 2, idx::ROT + 2)]);
    assert!(out.poses.windows(2).all(|w| w[1].t > w[0].t));
}

#[test]
fn free_fall_with_perfect_gravity_is_exact() {
    let x = NavState { vel: Vector3::new(1.0, 0.0, 2.0), ..NavState::default() };
    let imu: Vec<ImuSample> = (0..100)
        .map(|i| ImuSample { t: i as f64 * 0.01, omega_m: Vector3::zeros(), acc_m: Vector3::zeros() })
        .collect();
    let out = Propagator::new(NoiseParams::default()).propagate(&x, &Covariance24::zeros(), &imu, 0.0, 1.0).unwrap();
    let g = x.gravity;
    let want = x.vel + 0.5 * g;
    assert!((out.state.pos - want).norm() < 1e-12, "{}", out.state.pos);
    assert!((out.state.vel - (x.vel + g)).norm() < 1e-12);
}

#[test]
fn rejects_non_increasing_timestamps() {
    let u = |t: f64| ImuSample { t, omega_m: Vector3::zeros(), acc_m: Vector3::zeros() };
    let mut p = Propagator::new(NoiseParams::default());
    assert!(p.propagate(&NavState::default(), &Covariance24::zeros(), &[u(0.0), u(0.0)], 0.0, 0.1).is_err());
}
