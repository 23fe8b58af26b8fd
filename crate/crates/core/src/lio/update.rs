use nalgebra::{DMatrix, DVector, SMatrix};

use crate::ikd_tree::IkdTree;
use crate::manifold::{idx, so3, symmetrize, Covariance24, NavState, TangentVector, DIM};

use super::residual::{compute_residuals, QueryStats, ResidualParams};

type Info24 = SMatrix<f64, DIM, DIM>;

/// Inverse of a covariance, adding a small ridge when it is not positive
/// definite.
fn information(p: &Covariance24) -> Info24 {
    if let Some(c) = p.cholesky() {
        return c.inverse();
    }
    let ridge = 1e-9 * (p.trace().abs() / DIM as f64).max(1e-12);
    log::warn!("covariance not positive definite; regularizing with ridge {ridge:e}");
    let mut q = *p;
    for i in 0..DIM {
        q[(i, i)] += ridge;
    }
    match q.cholesky() {
        Some(c) => c.inverse(),
        None => q.pseudo_inverse(1e-12).unwrap_or_else(|_| Info24::zeros()),
    }
}

/// `K = (HᵀR⁻¹H + P⁻¹)⁻¹ HᵀR⁻¹`, inverting only a state-sized matrix.
pub fn kalman_gain(h: &DMatrix<f64>, r_diag: &DVector<f64>, p: &Covariance24) -> DMatrix<f64> {
    assert_eq!(h.ncols(), DIM, "measurement Jacobian must have {DIM} columns");
    assert_eq!(h.nrows(), r_diag.len());
    if h.nrows() == 0 {
        return DMatrix::zeros(DIM, 0);
    }
    let mut ht_rinv = h.transpose();
    for (j, r) in r_diag.iter().enumerate() {
        ht_rinv.column_mut(j).scale_mut(1.0 / r);
    }
    let s = &ht_rinv * h + DMatrix::from_iterator(DIM, DIM, information(p).iter().copied());
    let s_inv = s
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| s.pseudo_inverse(1e-12).expect("state-sized system"));
    s_inv * ht_rinv
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateParams {
    pub residual: ResidualParams,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub min_correspondences: usize,
}

impl Default for UpdateParams {
    fn default() -> Self {
        Self { residual: ResidualParams::default(), epsilon: 1e-3, max_iterations: 5, min_correspondences: 20 }
    }
}

#[derive(Clone, Debug)]
pub struct UpdateOutcome {
    pub state: NavState,
    pub cov: Covariance24,
    pub iterations: usize,
    pub converged: bool,
    /// Too few correspondences: the prior was returned unchanged.
    pub degenerate: bool,
    pub correspondences: usize,
    /// Value of the MAP cost after each iteration's linearization point.
    pub costs: Vec<f64>,
    pub query: QueryStats,
}

fn inverse_iterate_jacobian(iterate: &NavState, prior: &NavState) -> Covariance24 {
    let d = iterate.boxminus(prior);
    let mut j = Covariance24::identity();
    for at in [idx::ROT, idx::ROT_IL] {
        let theta = d.fixed_rows::<3>(at).into_owned();
        j.fixed_view_mut::<3, 3>(at, at).copy_from(&so3::right_jacobian(&theta));
    }
    j
}

/// Iterated error-state update of `prior` against the map, re-searching
/// neighbors at every iterate.
pub fn iterated_update(
    prior: &NavState,
    prior_cov: &Covariance24,
    points: &[nalgebra::Vector3<f64>],
    tree: &IkdTree,
    params: &UpdateParams,
) -> UpdateOutcome {
    let prior_info = information(prior_cov);
    let mut outcome = UpdateOutcome {
        state: *prior,
        cov: *prior_cov,
        iterations: 0,
        converged: false,
        degenerate: false,
        correspondences: 0,
        costs: Vec::new(),
        query: QueryStats::default(),
    };
    let mut iterate = *prior;
    let mut last_gain_terms: Option<(Info24, Covariance24)> = None;

    for _ in 0..params.max_iterations.max(1) {
        let corr = compute_residuals(&iterate, points, tree, &params.residual, &mut outcome.query);
        outcome.iterations += 1;
        outcome.correspondences = corr.len();
        if corr.len() < params.min_correspondences.max(1) {
            log::warn!(
                "only {} correspondences (need {}); keeping the propagated state",
                corr.len(),
                params.min_correspondences
            );
            outcome.state = *prior;
            outcome.cov = *prior_cov;
            outcome.degenerate = true;
            return outcome;
        }

        let j_inv = inverse_iterate_jacobian(&iterate, prior);
        let p = j_inv * prior_cov * j_inv.transpose();
        let p_info = information(&p);

        let mut hth = Info24::zeros();
        let mut htz = TangentVector::zeros();
        let mut measurement_cost = 0.0;
        for c in &corr {
            let ht = c.jacobian.transpose();
            hth += ht * c.jacobian / c.noise;
            htz += ht * (c.residual / c.noise);
            measurement_cost += c.residual * c.residual / c.noise;
        }
        let offset = iterate.boxminus(prior);
        outcome.costs.push(offset.dot(&(prior_info * offset)) + measurement_cost);

        let s = hth + p_info;
        let s_inv = s.cholesky().map(|c| c.inverse()).unwrap_or_else(|| information(&s));
        let kh = s_inv * hth;
        let kz = s_inv * htz;
        let delta = -kz - (Covariance24::identity() - kh) * (j_inv * offset);
        iterate = iterate.boxplus(&delta);
        last_gain_terms = Some((kh, p));
        if delta.norm() < params.epsilon {
            outcome.converged = true;
            break;
        }
    }

    if let Some((kh, p)) = last_gain_terms {
        let mut cov = (Covariance24::identity() - kh) * p;
        symmetrize(&mut cov);
        outcome.cov = cov;
    }
    outcome.state = iterate;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng) -> Covariance24 {
        let a = Covariance24::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + Covariance24::identity() * 0.1
    }

    fn conventional(h: &DMatrix<f64>, r: &DVector<f64>, p: &Covariance24) -> DMatrix<f64> {
        let p = DMatrix::from_iterator(DIM, DIM, p.iter().copied());
        let s = h * &p * h.transpose() + DMatrix::from_diagonal(r);
        &p * h.transpose() * s.try_inverse().unwrap()
    }

    #[test]
    fn identity_case() {
        let h = DMatrix::identity(DIM, DIM);
        let r = DVector::from_element(DIM, 1.0);
        let k = kalman_gain(&h, &r, &Covariance24::identity());
        assert!((k - DMatrix::identity(DIM, DIM) * 0.5).abs().max() < 1e-12);
    }

    #[test]
    fn empty_measurement() {
        let k = kalman_gain(&DMatrix::zeros(0, DIM), &DVector::zeros(0), &Covariance24::identity());
        assert_eq!(k.shape(), (DIM, 0));
    }

    #[test]
    fn matches_conventional_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for m in [1usize, 24, 200] {
            let h = DMatrix::from_fn(m, DIM, |_, _| rng.random_range(-1.0..1.0));
            let r = DVector::from_fn(m, |_, _| rng.random_range(0.1..2.0));
            let p = random_spd(&mut rng);
            let a = kalman_gain(&h, &r, &p);
            let b = conventional(&h, &r, &p);
            let rel = (&a - &b).norm() / b.norm();
            assert!(rel < 1e-8, "m={m} rel={rel}");
        }
    }

    #[test]
    fn singular_covariance_is_regularized() {
        let mut p = Covariance24::identity();
        p[(0, 0)] = 0.0;
        let h = DMatrix::identity(DIM, DIM);
        let k = kalman_gain(&h, &DVector::from_element(DIM, 1.0), &p);
        assert!(k.iter().all(|v| v.is_finite()));
        assert!(k[(0, 0)].abs() < 1e-6);
    }
}
