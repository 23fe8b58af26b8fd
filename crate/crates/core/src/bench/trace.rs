use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{AlignedCuboid, Point3};

/// One map operation issued by an odometry run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceOp {
    Insert { scan: usize, point: Point3, resolution: f64 },
    BoxDelete { scan: usize, region: AlignedCuboid },
    Knn { scan: usize, target: Point3, k: usize, max_dist: f64 },
}

impl TraceOp {
    pub fn scan(&self) -> usize {
        match *self {
            TraceOp::Insert { scan, .. } | TraceOp::BoxDelete { scan, .. } | TraceOp::Knn { scan, .. } => scan,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OpTrace {
    pub ops: Vec<TraceOp>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: row {row}: {msg}")]
    Malformed { path: PathBuf, row: usize, msg: String },
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    op: String,
    scan: usize,
    x0: f64,
    y0: f64,
    z0: f64,
    x1: f64,
    y1: f64,
    z1: f64,
    k: usize,
    value: f64,
}

impl OpTrace {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, op: TraceOp) {
        self.ops.push(op);
    }

    /// Ops grouped by scan index, in order.
    pub fn by_scan(&self) -> Vec<(usize, &[TraceOp])> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.ops.len() {
            let scan = self.ops[start].scan();
            let len = self.ops[start..].iter().take_while(|o| o.scan() == scan).count();
            out.push((scan, &self.ops[start..start + len]));
            start += len;
        }
        out
    }

    /// CSV columns `op,scan,x0,y0,z0,x1,y1,z1,k,value`. Inserts use the
    /// first corner and `value` = resolution, deletes both corners, kNN
    /// queries the first corner, `k` and `value` = max distance.
    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        let err = |source| TraceError::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        if self.ops.is_empty() {
            w.write_record(["op", "scan", "x0", "y0", "z0", "x1", "y1", "z1", "k", "value"]).map_err(err)?;
        }
        for op in &self.ops {
            let row = match *op {
                TraceOp::Insert { scan, point, resolution } => TraceRow {
                    op: "insert".into(),
                    scan,
                    x0: point.x,
                    y0: point.y,
                    z0: point.z,
                    x1: 0.0,
                    y1: 0.0,
                    z1: 0.0,
                    k: 0,
                    value: resolution,
                },
                TraceOp::BoxDelete { scan, region } => TraceRow {
                    op: "delete".into(),
                    scan,
                    x0: region.min_vertex.x,
                    y0: region.min_vertex.y,
                    z0: region.min_vertex.z,
                    x1: region.max_vertex.x,
                    y1: region.max_vertex.y,
                    z1: region.max_vertex.z,
                    k: 0,
                    value: 0.0,
                },
                TraceOp::Knn { scan, target, k, max_dist } => TraceRow {
                    op: "knn".into(),
                    scan,
                    x0: target.x,
                    y0: target.y,
                    z0: target.z,
                    x1: 0.0,
                    y1: 0.0,
                    z1: 0.0,
                    k,
                    value: max_dist,
                },
            };
            w.serialize(row).map_err(err)?;
        }
        w.flush().map_err(|e| err(e.into()))
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let err = |source| TraceError::Csv { path: path.to_path_buf(), source };
        let mut rdr = csv::Reader::from_path(path).map_err(err)?;
        let mut ops = Vec::new();
        for (i, row) in rdr.deserialize::<TraceRow>().enumerate() {
            let r = row.map_err(err)?;
            let bad = |msg: &str| TraceError::Malformed { path: path.to_path_buf(), row: i + 1, msg: msg.into() };
            let first = Point3::new(r.x0, r.y0, r.z0);
            let op = match r.op.as_str() {
                "insert" => {
                    if !(r.value > 0.0) {
                        return Err(bad("insert needs a positive resolution"));
                    }
                    TraceOp::Insert { scan: r.scan, point: first, resolution: r.value }
                }
                "delete" => {
                    let region = AlignedCuboid::new(first, Point3::new(r.x1, r.y1, r.z1))
                        .ok_or_else(|| bad("delete box has min > max"))?;
                    TraceOp::BoxDelete { scan: r.scan, region }
                }
                "knn" => {
                    if r.k == 0 {
                        return Err(bad("knn needs k >= 1"));
                    }
                    TraceOp::Knn { scan: r.scan, target: first, k: r.k, max_dist: r.value }
                }
                other => return Err(bad(&format!("unknown op {other:?}"))),
            };
            ops.push(op);
        }
        Ok(Self { ops })
    }
}

/// Per-scan map-operation statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub scan_index: usize,
    pub tree_size: usize,
    pub valid_count: usize,
    pub insert_us_mean: f64,
    pub knn_us_mean: f64,
    pub boxdel_us_mean: f64,
    pub peak_us: f64,
    pub rebuilds: usize,
}

pub fn write_bench_csv(path: &Path, records: &[BenchRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        w.write_record([
            "scan_index",
            "tree_size",
            "valid_count",
            "insert_us_mean",
            "knn_us_mean",
            "boxdel_us_mean",
            "peak_us",
            "rebuilds",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
