//! Scan-to-map registration and the per-scan odometry loop.

mod compensation;
pub mod dataset;
mod engine;
mod map_region;
mod output;
mod plane;
mod residual;
mod update;

use nalgebra::Vector3;

use crate::geometry::Point3;
use crate::ikd_tree::{IkdTree, TreeError};
use crate::manifold::NavState;

pub use compensation::motion_compensate;
pub use dataset::{Dataset, DatasetError, DatasetMeta, Extrinsic, Scan, StampedPose};
pub use engine::{EngineParams, InitialSigma, LioEngine, LioError, RunOutput, ScanReport, StageTiming};
pub use output::OutputError;
pub use map_region::{MapRegion, RegionTooSmall, RegionUpdate};
pub use plane::{fit_plane, PlanePatch};
pub use residual::{compute_residuals, measurement_row, point_residual, Correspondence, JacobianRow, QueryStats, ResidualParams};
pub use update::{iterated_update, kalman_gain, UpdateOutcome, UpdateParams};

/// One LiDAR return, in the sensor frame at its own sample time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub p: Vector3<f64>,
    pub t: f64,
    pub intensity: f64,
}

/// Keep one point out of every `keep_every` in acquisition order.
pub fn temporal_downsample(scan: &[ScanPoint], keep_every: usize) -> Vec<ScanPoint> {
    scan.iter().step_by(keep_every.max(1)).copied().collect()
}

/// World-frame position of every point under `state`.
pub fn to_world(state: &NavState, points: &[Vector3<f64>]) -> Vec<Point3> {
    points.iter().map(|p| Point3::from_vector(&state.lidar_to_world(p))).collect()
}

/// Insert the scan into the map at `state`, downsampled at `resolution`.
/// Returns the number of points that changed the map.
pub fn register_scan(
    state: &NavState,
    points: &[Vector3<f64>],
    tree: &mut IkdTree,
    resolution: f64,
    parallel: bool,
) -> Result<usize, TreeError> {
    let mut changed = 0;
    for p in to_world(state, points) {
        if tree.insert_with_downsample(p, resolution, parallel)? {
            changed += 1;
        }
    }
    Ok(changed)
}
