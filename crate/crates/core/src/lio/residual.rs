use std::time::{Duration, Instant};

use nalgebra::{RowSVector, Vector3};

use crate::geometry::Point3;
use crate::ikd_tree::IkdTree;
use crate::manifold::{idx, so3, NavState, DIM};

use super::plane::{fit_plane, PlanePatch};

pub type JacobianRow = RowSVector<f64, DIM>;

/// One point-to-plane constraint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub index: usize,
    pub residual: f64,
    pub jacobian: JacobianRow,
    /// Measurement variance, m².
    pub noise: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualParams {
    pub k: usize,
    pub max_dist: f64,
    pub plane_threshold: f64,
    pub max_residual: f64,
    pub range_sigma: f64,
}

impl Default for ResidualParams {
    fn default() -> Self {
        Self {
            k: 5,
            max_dist: 3.0,
            plane_threshold: 0.1,
            max_residual: 0.1,
            range_sigma: 0.02,
        }
    }
}

/// Time and count of the kNN queries issued while building residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QueryStats {
    pub knn_calls: usize,
    pub knn_time: Duration,
}

/// Signed distance of the projected LiDAR point from `plane`.
#[inline]
pub fn point_residual(state: &NavState, p_lidar: &Vector3<f64>, plane: &PlanePatch) -> f64 {
    plane.signed_distance(&state.lidar_to_world(p_lidar))
}

/// Derivative of [`point_residual`] with respect to the error state. Only
/// the attitude, position and extrinsic blocks are non-zero.
pub fn measurement_row(state: &NavState, p_lidar: &Vector3<f64>, normal: &Vector3<f64>) -> JacobianRow {
    let p_imu = state.rot_il * p_lidar + state.pos_il;
    let r = state.rot.matrix();
    let ut = normal.transpose();
    let mut row = JacobianRow::zeros();
    row.fixed_columns_mut::<3>(idx::ROT).copy_from(&(-ut * r * so3::hat(&p_imu)));
    row.fixed_columns_mut::<3>(idx::POS).copy_from(&ut);
    row.fixed_columns_mut::<3>(idx::ROT_IL)
        .copy_from(&(-ut * r * state.rot_il.matrix() * so3::hat(p_lidar)));
    row.fixed_columns_mut::<3>(idx::POS_IL).copy_from(&(ut * r));
    row
}

/// Project every point with `state`, fit a plane to its map neighbors and
/// keep the points that land on a valid plane within `max_residual`.
pub fn compute_residuals(
    state: &NavState,
    points: &[Vector3<f64>],
    tree: &IkdTree,
    params: &ResidualParams,
    stats: &mut QueryStats,
) -> Vec<Correspondence> {
    let noise = params.range_sigma * params.range_sigma;
    let mut out = Vec::with_capacity(points.len());
    let mut neighbors = Vec::with_capacity(params.k);
    for (index, p_l) in points.iter().enumerate() {
        let p_w = state.lidar_to_world(p_l);
        let start = Instant::now();
        let found = tree.knn_search(&Point3::from_vector(&p_w), params.k, Some(params.max_dist));
        stats.knn_time += start.elapsed();
        stats.knn_calls += 1;
        let Ok(found) = found else {
            continue;
        };
        if found.len() < params.k {
            continue;
        }
        neighbors.clear();
        neighbors.extend(found.iter().map(|n| n.point.to_vector()));
        let plane = fit_plane(&neighbors, params.plane_threshold);
        if !plane.valid {
            continue;
        }
        let residual = plane.signed_distance(&p_w);
        if residual.abs() > params.max_residual {
            continue;
        }
        out.push(Correspondence { index, residual, jacobian: measurement_row(state, p_l, &plane.normal), noise });
    }
    out
}
