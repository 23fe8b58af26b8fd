use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::bench::{compute_accuracy, write_bench_csv, AccuracyError, AccuracyReport, BenchRecord};

use super::dataset::{write_trajectory, DatasetError, StampedPose};
use super::engine::RunOutput;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Accuracy(#[from] AccuracyError),
}

#[derive(Serialize)]
struct TimingRow {
    scan_index: usize,
    t: f64,
    points: usize,
    correspondences: usize,
    iterations: usize,
    propagate_ms: f64,
    compensate_ms: f64,
    update_ms: f64,
    map_insert_ms: f64,
    region_ms: f64,
    total_ms: f64,
}

const TIMING_HEADER: &str = "scan_index,t,points,correspondences,iterations,propagate_ms,compensate_ms,update_ms,map_insert_ms,region_ms,total_ms\n";

impl RunOutput {
    pub fn bench_records(&self) -> Vec<BenchRecord> {
        self.scans.iter().map(|s| s.bench).collect()
    }

    /// Write `traj.csv`, `timing.csv`, `bench.csv` and, when ground truth is
    /// given, `accuracy.json` into `dir`.
    pub fn write(&self, dir: &Path, ground_truth: Option<&[StampedPose]>) -> Result<Option<AccuracyReport>, OutputError> {
        fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })?;
        write_trajectory(&dir.join("traj.csv"), &self.trajectory)?;

        let path = dir.join("timing.csv");
        let csv_err = |source| OutputError::Csv { path: path.clone(), source };
        if self.scans.is_empty() {
            fs::write(&path, TIMING_HEADER).map_err(|source| OutputError::Io { path: path.clone(), source })?;
        } else {
            let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
            let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
            for s in &self.scans {
                w.serialize(TimingRow {
                    scan_index: s.index,
                    t: s.t,
                    points: s.points_used,
                    correspondences: s.correspondences,
                    iterations: s.iterations,
                    propagate_ms: ms(s.timing.propagate),
                    compensate_ms: ms(s.timing.compensate),
                    update_ms: ms(s.timing.update),
                    map_insert_ms: ms(s.timing.map_insert),
                    region_ms: ms(s.timing.region),
                    total_ms: ms(s.timing.total()),
                })
                .map_err(csv_err)?;
            }
            w.flush().map_err(|source| OutputError::Io { path: path.clone(), source })?;
        }

        let path = dir.join("bench.csv");
        write_bench_csv(&path, &self.bench_records()).map_err(|source| OutputError::Csv { path, source })?;

        let Some(gt) = ground_truth else {
            return Ok(None);
        };
        let report = compute_accuracy(&self.trajectory, gt)?;
        let path = dir.join("accuracy.json");
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|source| OutputError::Io { path, source })?;
        Ok(Some(report))
    }
}
