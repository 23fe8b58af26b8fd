//! Deterministic synthetic worlds, trajectories, IMU streams and LiDAR scans
//! with ground truth.

mod sensor;
mod trajectory;
mod world;

use std::path::Path;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::lio::{Dataset, DatasetError, DatasetMeta, Extrinsic, Scan, StampedPose};
use crate::manifold::NavState;

pub use sensor::{gen_imu, gen_scan, interval_reading, true_pose_samples, BiasSample, LabeledPoint, ScanPattern, SensorSpec};
pub use trajectory::{LoopSpec, SpinSpec, TrajectoryKind, TrajectorySpec, TruePose};
pub use world::{Hit, Rectangle, RoomSpec, WorldModel};

/// Everything needed to generate one dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub seed: u64,
    pub world: RoomSpec,
    pub trajectory: TrajectorySpec,
    pub sensor: SensorSpec,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("cannot parse spec: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let spec: SynthSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.world.validate().map_err(SynthError::Invalid)?;
        self.trajectory.validate().map_err(SynthError::Invalid)?;
        self.sensor.validate().map_err(SynthError::Invalid)?;
        if self.num_scans() == 0 {
            return Err(SynthError::Invalid("duration shorter than one scan period".into()));
        }
        Ok(())
    }

    pub fn num_scans(&self) -> usize {
        (self.trajectory.duration * self.sensor.scan_rate + 1e-9).floor() as usize
    }

    /// True navigation state at `t`, with the generation-side biases zeroed.
    pub fn true_state(&self, t: f64) -> NavState {
        let pose = self.trajectory.pose(t);
        let (rot_il, pos_il) = self.sensor.extrinsic();
        NavState { rot: pose.rot, pos: pose.pos, vel: pose.vel, rot_il, pos_il, ..NavState::default() }
    }

    pub fn meta(&self) -> DatasetMeta {
        let (rot_il, pos_il) = self.sensor.extrinsic();
        DatasetMeta {
            scan_rate: self.sensor.scan_rate,
            imu_rate: self.sensor.imu_rate,
            scan_start_time: 0.0,
            num_scans: self.num_scans(),
            extrinsic: Extrinsic::from_parts(&UnitQuaternion::from_rotation_matrix(&rot_il), &pos_il),
            noise: self.sensor.noise,
            range_sigma: self.sensor.range_sigma,
        }
    }

    /// Ground-truth IMU pose at every scan end.
    pub fn ground_truth(&self) -> Vec<StampedPose> {
        let meta = self.meta();
        (0..meta.num_scans)
            .map(|i| {
                let t = meta.scan_interval(i).1;
                let p = self.trajectory.pose(t);
                StampedPose { t, pos: p.pos, rot: UnitQuaternion::from_rotation_matrix(&p.rot) }
            })
            .collect()
    }

    pub fn generate(&self) -> Result<Dataset, SynthError> {
        self.validate()?;
        let world = self.world.build();
        let meta = self.meta();
        let (imu, _) = gen_imu(&self.trajectory, &self.sensor, self.seed);
        let scans = (0..meta.num_scans)
            .map(|i| {
                let (t_start, t_end) = meta.scan_interval(i);
                let points = gen_scan(&self.trajectory, &world, &self.sensor, i, self.seed)
                    .into_iter()
                    .map(|lp| lp.point)
                    .collect();
                Scan { index: i, t_start, t_end, points }
            })
            .collect();
        Ok(Dataset { meta, imu, scans, ground_truth: Some(self.ground_truth()) })
    }

    pub fn export(&self, dir: &Path) -> Result<Dataset, SynthError> {
        let data = self.generate()?;
        data.save(dir)?;
        Ok(data)
    }
}
