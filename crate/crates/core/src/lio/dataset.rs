//! On-disk dataset layout:
//!
//! ```text
//! <dir>/meta.json            rates, scan timing, extrinsic guess, noise
//! <dir>/imu.csv              t,wx,wy,wz,ax,ay,az
//! <dir>/scans/scan_<i>.csv   t,x,y,z,intensity   (LiDAR frame)
//! <dir>/gt_traj.csv          t,px,py,pz,qw,qx,qy,qz   (optional)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifold::{ImuSample, NoiseParams};

use super::ScanPoint;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Format(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> DatasetError + '_ {
    move |source| DatasetError::Csv { path: path.to_path_buf(), source }
}

/// LiDAR-to-IMU transform: unit quaternion `[w, x, y, z]` and translation (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extrinsic {
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

impl Default for Extrinsic {
    fn default() -> Self {
        Self { rotation: [1.0, 0.0, 0.0, 0.0], translation: [0.0; 3] }
    }
}

impl Extrinsic {
    pub fn from_parts(rot: &UnitQuaternion<f64>, translation: &Vector3<f64>) -> Self {
        let q = rot.quaternion();
        Self { rotation: [q.w, q.i, q.j, q.k], translation: [translation.x, translation.y, translation.z] }
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotation;
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    /// Hz
    pub scan_rate: f64,
    /// Hz
    pub imu_rate: f64,
    /// Start time of scan 0, seconds.
    pub scan_start_time: f64,
    pub num_scans: usize,
    pub extrinsic: Extrinsic,
    pub noise: NoiseParams,
    /// Range noise standard deviation, m.
    pub range_sigma: f64,
}

impl DatasetMeta {
    pub fn scan_interval(&self, index: usize) -> (f64, f64) {
        let period = 1.0 / self.scan_rate;
        (self.scan_start_time + index as f64 * period, self.scan_start_time + (index + 1) as f64 * period)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        if !(self.scan_rate > 0.0 && self.imu_rate > 0.0) {
            return Err(DatasetError::Format("meta.json: rates must be positive".into()));
        }
        if !(self.range_sigma >= 0.0) {
            return Err(DatasetError::Format("meta.json: range_sigma must be non-negative".into()));
        }
        self.noise.validate().map_err(|e| DatasetError::Format(format!("meta.json: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub points: Vec<ScanPoint>,
}

/// Timestamped IMU pose in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StampedPose {
    pub t: f64,
    pub pos: Vector3<f64>,
    pub rot: UnitQuaternion<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub imu: Vec<ImuSample>,
    pub scans: Vec<Scan>,
    pub ground_truth: Option<Vec<StampedPose>>,
}

#[derive(Serialize, Deserialize)]
struct ImuRow {
    t: f64,
    wx: f64,
    wy: f64,
    wz: f64,
    ax: f64,
    ay: f64,
    az: f64,
}

#[derive(Serialize, Deserialize)]
struct PointRow {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
    intensity: f64,
}

#[derive(Serialize, Deserialize)]
struct PoseRow {
    t: f64,
    px: f64,
    py: f64,
    pz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    rdr.deserialize().collect::<Result<Vec<T>, _>>().map_err(csv_err(path))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut empty = true;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
        empty = false;
    }
    if empty {
        // keep the header so empty files still parse
        return fs::write(path, header_for::<T>()).map_err(io_err(path));
    }
    w.flush().map_err(io_err(path))
}

fn header_for<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    if name.ends_with("PointRow") {
        "t,x,y,z,intensity\n"
    } else if name.ends_with("ImuRow") {
        "t,wx,wy,wz,ax,ay,az\n"
    } else {
        "t,px,py,pz,qw,qx,qy,qz\n"
    }
}

pub fn scan_file_name(index: usize) -> String {
    format!("scan_{index:06}.csv")
}

pub fn write_trajectory(path: &Path, poses: &[StampedPose]) -> Result<(), DatasetError> {
    write_rows(
        path,
        poses.iter().map(|p| {
            let q = p.rot.quaternion();
            PoseRow { t: p.t, px: p.pos.x, py: p.pos.y, pz: p.pos.z, qw: q.w, qx: q.i, qy: q.j, qz: q.k }
        }),
    )
}

pub fn read_trajectory(path: &Path) -> Result<Vec<StampedPose>, DatasetError> {
    Ok(read_rows::<PoseRow>(path)?
        .into_iter()
        .map(|r| StampedPose {
            t: r.t,
            pos: Vector3::new(r.px, r.py, r.pz),
            rot: UnitQuaternion::from_quaternion(Quaternion::new(r.qw, r.qx, r.qy, r.qz)),
        })
        .collect())
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let meta_path = dir.join("meta.json");
        let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let meta: DatasetMeta =
            serde_json::from_str(&text).map_err(|source| DatasetError::Json { path: meta_path.clone(), source })?;
        meta.validate()?;

        let imu_path = dir.join("imu.csv");
        if !imu_path.is_file() {
            return Err(DatasetError::Format(format!("missing {}", imu_path.display())));
        }
        let imu: Vec<ImuSample> = read_rows::<ImuRow>(&imu_path)?
            .into_iter()
            .map(|r| ImuSample { t: r.t, omega_m: Vector3::new(r.wx, r.wy, r.wz), acc_m: Vector3::new(r.ax, r.ay, r.az) })
            .collect();
        if let Some(w) = imu.windows(2).find(|w| !(w[1].t > w[0].t)) {
            return Err(DatasetError::Format(format!("imu.csv: timestamps not increasing at t={}", w[1].t)));
        }

        let scan_dir = dir.join("scans");
        let mut files: Vec<(usize, PathBuf)> = Vec::new();
        for entry in fs::read_dir(&scan_dir).map_err(io_err(&scan_dir))? {
            let path = entry.map_err(io_err(&scan_dir))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(index) = name.strip_prefix("scan_").and_then(|r| r.strip_suffix(".csv")) else {
                continue;
            };
            let index: usize = index
                .parse()
                .map_err(|_| DatasetError::Format(format!("bad scan file name {name}")))?;
            files.push((index, path));
        }
        files.sort();
        if files.len() != meta.num_scans || files.iter().enumerate().any(|(i, (idx, _))| i != *idx) {
            return Err(DatasetError::Format(format!(
                "expected scans 0..{} in {}, found {}",
                meta.num_scans,
                scan_dir.display(),
                files.len()
            )));
        }
        let mut scans = Vec::with_capacity(files.len());
        for (index, path) in files {
            let (t_start, t_end) = meta.scan_interval(index);
            let points = read_rows::<PointRow>(&path)?
                .into_iter()
                .map(|r| ScanPoint { p: Vector3::new(r.x, r.y, r.z), t: r.t, intensity: r.intensity })
                .collect();
            scans.push(Scan { index, t_start, t_end, points });
        }

        let gt_path = dir.join("gt_traj.csv");
        let ground_truth = if gt_path.is_file() { Some(read_trajectory(&gt_path)?) } else { None };
        Ok(Self { meta, imu, scans, ground_truth })
    }

    pub fn save(&self, dir: &Path) -> Result<(), DatasetError> {
        let scan_dir = dir.join("scans");
        fs::create_dir_all(&scan_dir).map_err(io_err(&scan_dir))?;
        let meta_path = dir.join("meta.json");
        let mut text = serde_json::to_string_pretty(&self.meta)
            .map_err(|source| DatasetError::Json { path: meta_path.clone(), source })?;
        text.push('\n');
        fs::write(&meta_path, text).map_err(io_err(&meta_path))?;

        write_rows(
            &dir.join("imu.csv"),
            self.imu.iter().map(|s| ImuRow {
                t: s.t,
                wx: s.omega_m.x,
                wy: s.omega_m.y,
                wz: s.omega_m.z,
                ax: s.acc_m.x,
                ay: s.acc_m.y,
                az: s.acc_m.z,
            }),
        )?;
        for scan in &self.scans {
            write_rows(
                &scan_dir.join(scan_file_name(scan.index)),
                scan.points.iter().map(|p| PointRow { t: p.t, x: p.p.x, y: p.p.y, z: p.p.z, intensity: p.intensity }),
            )?;
        }
        if let Some(gt) = &self.ground_truth {
            write_trajectory(&dir.join("gt_traj.csv"), gt)?;
        }
        Ok(())
    }
}
