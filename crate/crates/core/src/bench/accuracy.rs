use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::lio::StampedPose;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub rmse_m: f64,
    pub end_to_end_m: f64,
    pub length_m: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AccuracyError {
    #[error("estimated and ground-truth trajectories do not overlap in time")]
    NoOverlap,
}

/// Ground-truth position at `t`, linearly interpolated.
fn gt_position(gt: &[StampedPose], t: f64) -> Option<Vector3<f64>> {
    let (first, last) = (gt.first()?, gt.last()?);
    let tol = 1e-9;
    if t < first.t - tol || t > last.t + tol {
        return None;
    }
    let k = gt.partition_point(|p| p.t < t - tol);
    if k == 0 {
        return Some(first.pos);
    }
    let Some(b) = gt.get(k) else {
        return Some(last.pos);
    };
    let a = &gt[k - 1];
    if (b.t - t).abs() <= tol {
        return Some(b.pos);
    }
    let s = (t - a.t) / (b.t - a.t);
    Some(a.pos + (b.pos - a.pos) * s)
}

fn gt_rotation(gt: &[StampedPose], t: f64) -> UnitQuaternion<f64> {
    let k = gt.partition_point(|p| p.t < t - 1e-9).min(gt.len() - 1);
    let a = &gt[k.saturating_sub(1)];
    let b = &gt[k];
    if b.t <= a.t {
        return b.rot;
    }
    let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
    a.rot.slerp(&b.rot, s)
}

/// RMSE of time-aligned positions after mapping the first estimated pose
/// onto the ground truth, end-to-end error and ground-truth path length.
pub fn compute_accuracy(traj: &[StampedPose], gt: &[StampedPose]) -> Result<AccuracyReport, AccuracyError> {
    let pairs: Vec<(&StampedPose, Vector3<f64>)> =
        traj.iter().filter_map(|p| gt_position(gt, p.t).map(|g| (p, g))).collect();
    let (first, g0) = pairs.first().ok_or(AccuracyError::NoOverlap)?;
    let align_rot = gt_rotation(gt, first.t) * first.rot.inverse();
    let align_pos = g0 - align_rot * first.pos;
    let errors: Vec<f64> = pairs.iter().map(|(p, g)| (align_rot * p.pos + align_pos - g).norm()).collect();
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    let (t0, t1) = (first.t, pairs.last().unwrap().0.t);
    let mut length = 0.0;
    let mut prev = *g0;
    for p in gt.iter().filter(|p| p.t > t0 && p.t <= t1) {
        length += (p.pos - prev).norm();
        prev = p.pos;
    }
    Ok(AccuracyReport { rmse_m: rmse, end_to_end_m: *errors.last().unwrap(), length_m: length })
}
