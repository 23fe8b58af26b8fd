use crate::manifold::{NavState, PoseSample};

use super::ScanPoint;

/// Re-express every point in the LiDAR frame at the scan end, using the
/// propagated per-segment motion in `poses` and the extrinsic of `end`.
///
/// A point inside a segment longer than `max_gap` seconds falls back to the
/// nearest segment endpoint pose instead of extrapolating.
pub fn motion_compensate(scan: &[ScanPoint], poses: &[PoseSample], end: &NavState, max_gap: f64) -> Vec<ScanPoint> {
    if poses.is_empty() {
        return scan.to_vec();
    }
    let end_rot_inv = end.rot.inverse();
    let il_inv = end.rot_il.inverse();
    let mut warned = false;
    scan.iter()
        .map(|sp| {
            let k = poses.partition_point(|s| s.t <= sp.t).saturating_sub(1);
            let seg = &poses[k];
            let next = poses.get(k + 1);
            let gap = next.map_or(0.0, |n| n.t - seg.t);
            let (rot, pos) = if gap > max_gap {
                if !warned {
                    log::warn!("IMU gap of {gap:.4} s inside scan; using nearest pose");
                    warned = true;
                }
                let n = next.expect("gap implies a successor");
                if sp.t - seg.t <= n.t - sp.t { (seg.rot, seg.pos) } else { (n.rot, n.pos) }
            } else {
                seg.pose_at(sp.t)
            };
            let p_i = end.rot_il * sp.p + end.pos_il;
            let world = rot * p_i + pos;
            let in_end_imu = end_rot_inv * (world - end.pos);
            ScanPoint { p: il_inv * (in_end_imu - end.pos_il), ..*sp }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use crate::manifold::{Covariance24, ImuSample, NoiseParams, Propagator, STANDARD_GRAVITY};

    fn still(t: f64, omega: Vector3<f64>) -> ImuSample {
        ImuSample { t, omega_m: omega, acc_m: Vector3::new(0.0, 0.0, STANDARD_GRAVITY) }
    }

    fn scan(n: usize) -> Vec<ScanPoint> {
        (0..n)
            .map(|i| ScanPoint { p: Vector3::new(5.0, i as f64 * 0.1, 1.0), t: i as f64 * 0.1 / n as f64, intensity: 0.0 })
            .collect()
    }

    #[test]
    fn no_motion_is_identity() {
        let imu: Vec<ImuSample> = (0..20).map(|i| still(i as f64 * 0.005, Vector3::zeros())).collect();
        let mut prop = Propagator::new(NoiseParams::default());
        let out = prop.propagate(&NavState::default(), &Covariance24::identity(), &imu, 0.0, 0.1).unwrap();
        let raw = scan(50);
        let comp = motion_compensate(&raw, &out.poses, &out.state, 0.02);
        for (a, b) in raw.iter().zip(&comp) {
            assert!((a.p - b.p).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_velocity_shift() {
        let v = Vector3::new(2.0, -1.0, 0.5);
        let state = NavState { vel: v, ..NavState::default() };
        let imu: Vec<ImuSample> = (0..20).map(|i| still(i as f64 * 0.005, Vector3::zeros())).collect();
        let mut prop = Propagator::new(NoiseParams::default());
        let out = prop.propagate(&state, &Covariance24::identity(), &imu, 0.0, 0.1).unwrap();
        let raw = scan(10);
        let comp = motion_compensate(&raw, &out.poses, &out.state, 0.02);
        for (a, b) in raw.iter().zip(&comp) {
            let tau = 0.1 - a.t;
            assert!((b.p - (a.p - v * tau)).norm() < 1e-6);
        }
    }

    #[test]
    fn gap_falls_back_to_nearest_pose() {
        let imu = vec![still(0.0, Vector3::new(0.0, 0.0, 1.0)), still(0.09, Vector3::new(0.0, 0.0, 1.0))];
        let mut prop = Propagator::new(NoiseParams::default());
        let out = prop.propagate(&NavState::default(), &Covariance24::identity(), &imu, 0.0, 0.1).unwrap();
        let raw = vec![ScanPoint { p: Vector3::new(1.0, 0.0, 0.0), t: 0.01, intensity: 0.0 }];
        let comp = motion_compensate(&raw, &out.poses, &out.state, 0.01);
        // nearest pose is the scan start, rotated 0.1 rad from the end
        let expect = crate::manifold::so3::exp(&Vector3::new(0.0, 0.0, -0.1)) * raw[0].p;
        assert!((comp[0].p - expect).norm() < 1e-9);
    }
}
