use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{AlignedCuboid, Point3};
use crate::ikd_tree::{BalanceParams, IkdTree, TreeError};

use super::baseline::{brute_force_knn, StaticKdTree};
use super::trace::{BenchRecord, OpTrace, TraceOp};

#[derive(Clone, Debug, PartialEq)]
pub struct TreeBenchParams {
    pub balance: BalanceParams,
    pub parallel_rebuild: bool,
    /// Tree sizes to bucket latencies at.
    pub sizes: Vec<usize>,
    /// Relative half-width of each size bucket.
    pub window: f64,
    /// Run one untimed replay before the timed one.
    pub warmup: bool,
    /// Time a rebuild-from-scratch static tree every this many scans; 0 disables.
    pub baseline_every: usize,
    /// Number of kNN queries checked against brute force in a separate
    /// untimed replay; 0 disables.
    pub validate_samples: usize,
}

impl Default for TreeBenchParams {
    fn default() -> Self {
        Self {
            balance: BalanceParams::default(),
            parallel_rebuild: true,
            sizes: vec![10_000, 100_000, 1_000_000],
            window: 0.05,
            warmup: true,
            baseline_every: 0,
            validate_samples: 0,
        }
    }
}

/// Mean latencies of the operations issued while the tree size was within
/// the window around `size`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SizeBucket {
    pub size: usize,
    pub insert_count: usize,
    pub insert_us: f64,
    pub knn_count: usize,
    pub knn_us: f64,
    pub boxdel_count: usize,
    pub boxdel_us: f64,
}

/// Least-squares `y = intercept + slope·ln n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
}

pub fn fit_log(samples: &[(f64, f64)]) -> Option<LogFit> {
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|(s, _)| s.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(samples).map(|(x, s)| (x - mx) * (s.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = samples.iter().map(|s| (s.1 - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(samples).map(|(x, s)| (s.1 - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(LogFit { intercept, slope, r2 })
}

/// Per-scan map-update cost of both structures on one sampled scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub scan_index: usize,
    pub map_points: usize,
    pub ikd_update_us: f64,
    pub rebuild_us: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub checked: usize,
    pub mismatches: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub scans: usize,
    pub ops: usize,
    pub final_tree_size: usize,
    pub final_valid_count: usize,
    pub insert_us_mean: f64,
    pub knn_us_mean: f64,
    pub boxdel_us_mean: f64,
    /// Mean over every insert and box delete.
    pub update_us_mean: f64,
    pub update_us_peak: f64,
    /// Insert plus box-delete time per scan, ms.
    pub scan_update_ms_mean: f64,
    pub scan_update_ms_peak: f64,
    pub rebuilds: usize,
    pub buckets: Vec<SizeBucket>,
    pub insert_fit: Option<LogFit>,
    pub knn_fit: Option<LogFit>,
    /// Mean per-scan map update, ms, over the baseline-sampled scans.
    pub ikd_update_ms_per_scan: Option<f64>,
    pub rebuild_ms_per_scan: Option<f64>,
    pub validation: Option<Validation>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TreeBenchReport {
    pub records: Vec<BenchRecord>,
    pub baseline: Vec<BaselineRecord>,
    pub summary: BenchSummary,
}

#[derive(Default)]
struct Accum {
    count: usize,
    total_us: f64,
}

impl Accum {
    fn add(&mut self, us: f64) {
        self.count += 1;
        self.total_us += us;
    }

    fn mean(&self) -> f64 {
        if self.count == 0 { 0.0 } else { self.total_us / self.count as f64 }
    }
}

fn apply(tree: &mut IkdTree, op: &TraceOp, parallel: bool) -> Result<(), TreeError> {
    match *op {
        TraceOp::Insert { point, resolution, .. } => {
            tree.insert_with_downsample(point, resolution, parallel)?;
        }
        TraceOp::BoxDelete { region, .. } => {
            tree.box_delete(&region, parallel);
        }
        TraceOp::Knn { target, k, max_dist, .. } => {
            tree.knn_search(&target, k, Some(max_dist))?;
        }
    }
    Ok(())
}

fn fresh_tree(initial: &[Point3], params: &TreeBenchParams) -> Result<IkdTree, TreeError> {
    IkdTree::build(initial, params.balance)
}

/// Replay `trace` on an ikd-tree built over `initial`, timing every
/// operation, and optionally compare against a static tree rebuilt from
/// scratch and a brute-force oracle.
pub fn run_tree_benchmark(
    trace: &OpTrace,
    initial: &[Point3],
    params: &TreeBenchParams,
) -> Result<TreeBenchReport, TreeError> {
    let parallel = params.parallel_rebuild;
    if params.warmup && !trace.is_empty() {
        let mut tree = fresh_tree(initial, params)?;
        for op in &trace.ops {
            apply(&mut tree, op, parallel)?;
        }
        tree.wait_for_rebuild();
    }

    let mut tree = fresh_tree(initial, params)?;
    let mut buckets: Vec<(SizeBucket, [Accum; 3])> =
        params.sizes.iter().map(|&size| (SizeBucket { size, ..Default::default() }, Default::default())).collect();
    let mut totals: [Accum; 3] = Default::default();
    let mut updates = Accum::default();
    let mut peak = 0.0f64;
    let mut scan_updates = Accum::default();
    let mut scan_update_peak = 0.0f64;
    let mut records = Vec::new();
    let mut baseline = Vec::new();
    let mut rebuilds_before = tree.stats().total_rebuilds();

    for (n, (scan, ops)) in trace.by_scan().into_iter().enumerate() {
        let mut per: [Accum; 3] = Default::default();
        let mut scan_peak = 0.0f64;
        for op in ops {
            let size = tree.size().0;
            let kind = match op {
                TraceOp::Insert { .. } => 0,
                TraceOp::Knn { .. } => 1,
                TraceOp::BoxDelete { .. } => 2,
            };
            let start = Instant::now();
            apply(&mut tree, op, parallel)?;
            let us = start.elapsed().as_secs_f64() * 1e6;
            per[kind].add(us);
            totals[kind].add(us);
            if kind != 1 {
                updates.add(us);
                scan_peak = scan_peak.max(us);
            }
            for (b, acc) in &mut buckets {
                let s = b.size as f64;
                if (size as f64) >= s * (1.0 - params.window) && (size as f64) <= s * (1.0 + params.window) {
                    acc[kind].add(us);
                }
            }
        }
        peak = peak.max(scan_peak);
        let scan_update = (per[0].total_us + per[2].total_us) / 1e3;
        scan_updates.add(scan_update);
        scan_update_peak = scan_update_peak.max(scan_update);
        let (tree_size, valid_count) = tree.size();
        let total_rebuilds = tree.stats().total_rebuilds();
        records.push(BenchRecord {
            scan_index: scan,
            tree_size,
            valid_count,
            insert_us_mean: per[0].mean(),
            knn_us_mean: per[1].mean(),
            boxdel_us_mean: per[2].mean(),
            peak_us: scan_peak,
            rebuilds: (total_rebuilds - rebuilds_before) as usize,
        });
        rebuilds_before = total_rebuilds;

        if params.baseline_every > 0 && n % params.baseline_every == 0 {
            let points = tree.flatten();
            let start = Instant::now();
            let static_tree = StaticKdTree::build(&points);
            let rebuild_us = start.elapsed().as_secs_f64() * 1e6;
            std::hint::black_box(&static_tree);
            baseline.push(BaselineRecord {
                scan_index: scan,
                map_points: points.len(),
                ikd_update_us: per[0].total_us + per[2].total_us,
                rebuild_us,
            });
        }
    }
    tree.wait_for_rebuild();
    let (final_tree_size, final_valid_count) = tree.size();
    let rebuilds = records.iter().map(|r| r.rebuilds).sum();
    drop(tree);

    let validation = if params.validate_samples > 0 { Some(validate(trace, initial, params)?) } else { None };

    let buckets: Vec<SizeBucket> = buckets
        .into_iter()
        .map(|(mut b, acc)| {
            b.insert_count = acc[0].count;
            b.insert_us = acc[0].mean();
            b.knn_count = acc[1].count;
            b.knn_us = acc[1].mean();
            b.boxdel_count = acc[2].count;
            b.boxdel_us = acc[2].mean();
            b
        })
        .collect();
    let fit = |pick: fn(&SizeBucket) -> (usize, f64)| {
        let pts: Vec<(f64, f64)> =
            buckets.iter().map(pick).filter(|(c, _)| *c > 0).zip(&buckets).map(|((_, y), b)| (b.size as f64, y)).collect();
        if pts.len() == buckets.len() { fit_log(&pts) } else { None }
    };
    let insert_fit = fit(|b| (b.insert_count, b.insert_us));
    let knn_fit = fit(|b| (b.knn_count, b.knn_us));
    let mean_ms = |f: fn(&BaselineRecord) -> f64| {
        (!baseline.is_empty()).then(|| baseline.iter().map(f).sum::<f64>() / baseline.len() as f64 / 1e3)
    };
    let summary = BenchSummary {
        scans: records.len(),
        ops: trace.ops.len(),
        final_tree_size,
        final_valid_count,
        insert_us_mean: totals[0].mean(),
        knn_us_mean: totals[1].mean(),
        boxdel_us_mean: totals[2].mean(),
        update_us_mean: updates.mean(),
        update_us_peak: peak,
        scan_update_ms_mean: scan_updates.mean(),
        scan_update_ms_peak: scan_update_peak,
        rebuilds,
        buckets,
        insert_fit,
        knn_fit,
        ikd_update_ms_per_scan: mean_ms(|b| b.ikd_update_us),
        rebuild_ms_per_scan: mean_ms(|b| b.rebuild_us),
        validation,
    };
    Ok(TreeBenchReport { records, baseline, summary })
}

fn validate(trace: &OpTrace, initial: &[Point3], params: &TreeBenchParams) -> Result<Validation, TreeError> {
    let knn_total = trace.ops.iter().filter(|o| matches!(o, TraceOp::Knn { .. })).count();
    let every = (knn_total / params.validate_samples.max(1)).max(1);
    let mut tree = fresh_tree(initial, params)?;
    let mut out = Validation::default();
    let mut seen = 0usize;
    for op in &trace.ops {
        if let TraceOp::Knn { target, k, max_dist, .. } = *op {
            seen += 1;
            if seen % every == 0 {
                let got: Vec<f64> = tree.knn_search(&target, k, Some(max_dist))?.iter().map(|n| n.distance).collect();
                let want: Vec<f64> =
                    brute_force_knn(&tree.flatten(), &target, k, Some(max_dist)).iter().map(|n| n.distance).collect();
                out.checked += 1;
                if got != want {
                    out.mismatches += 1;
                }
            }
            continue;
        }
        apply(&mut tree, op, params.parallel_rebuild)?;
    }
    Ok(out)
}

/// Growth trace along a 4 m square corridor running
/// in +x: each scan inserts `points_per_scan` wall points in the next
/// slice and queries `knn_per_scan` of them, until about `total` points.
pub fn corridor_trace(total: usize, points_per_scan: usize, knn_per_scan: usize, resolution: f64, seed: u64) -> OpTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = 4.0;
    // interior cells across one wall; the outermost are left to the adjacent walls
    let across = ((width / resolution).round() as usize).saturating_sub(2).max(1);
    let per_ring = 4 * across;
    let depth_cells = points_per_scan.div_ceil(per_ring).max(1);
    let near = 0.5 * resolution;
    let far = width - 0.5 * resolution;
    let mut trace = OpTrace::default();
    let scans = total.div_ceil(points_per_scan.max(1));
    for scan in 0..scans {
        let mut inserted = Vec::with_capacity(points_per_scan);
        for k in 0..points_per_scan {
            let (wall, cell) = (k % 4, k / 4);
            let xc = scan * depth_cells + cell / across;
            let sc = 1 + cell % across;
            let [a, b] = std::array::from_fn(|_| rng.random_range(0.1..0.9));
            let x = (xc as f64 + a) * resolution;
            let s = (sc as f64 + b) * resolution;
            let p = match wall {
                0 => Point3::new(x, s - 0.5 * width, near),
                1 => Point3::new(x, s - 0.5 * width, far),
                2 => Point3::new(x, near - 0.5 * width, s),
                _ => Point3::new(x, far - 0.5 * width, s),
            };
            inserted.push(p);
            trace.push(TraceOp::Insert { scan, point: p, resolution });
        }
        for _ in 0..knn_per_scan {
            let p = inserted[rng.random_range(0..inserted.len())];
            let target = Point3::new(
                p.x + rng.random_range(-0.1..0.1),
                p.y + rng.random_range(-0.1..0.1),
                p.z + rng.random_range(-0.1..0.1),
            );
            trace.push(TraceOp::Knn { scan, target, k: 5, max_dist: 3.0 });
        }
    }
    trace
}

/// `count` points, one per `resolution` cell, filling a slab far from the
/// origin so that they never interact with a trace recorded near it.
pub fn filler_points(count: usize, resolution: f64, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (count as f64 / 4.0).sqrt().ceil() as usize;
    let mut out = Vec::with_capacity(count);
    'fill: for layer in 0..4 {
        for i in 0..side {
            for j in 0..side {
                if out.len() == count {
                    break 'fill;
                }
                let [a, b, c]: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.9));
                out.push(Point3::new(
                    5_000.0 + (i as f64 + a) * resolution,
                    5_000.0 + (j as f64 + b) * resolution,
                    (layer as f64 + c) * resolution,
                ));
            }
        }
    }
    out
}

/// Box covering every point of `points`, if any.
pub fn bounds_of(points: &[Point3]) -> Option<AlignedCuboid> {
    let mut it = points.iter();
    let mut b = AlignedCuboid::from_point(*it.next()?);
    for p in it {
        b.extend(p);
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_gives_empty_report() {
        let r = run_tree_benchmark(&OpTrace::default(), &[], &TreeBenchParams::default()).unwrap();
        assert!(r.records.is_empty());
        assert_eq!(r.summary.ops, 0);
        assert!(r.summary.insert_fit.is_none());
    }

    #[test]
    fn log_fit_recovers_exact_curve() {
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5, 1e6].iter().map(|&n: &f64| (n, 0.5 + 0.2 * n.ln())).collect();
        let f = fit_log(&pts).unwrap();
        assert!((f.slope - 0.2).abs() < 1e-12 && (f.intercept - 0.5).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(fit_log(&pts[..1]).is_none());
    }

    #[test]
    fn corridor_grows_to_total() {
        let trace = corridor_trace(20_000, 1_000, 100, 0.1, 1);
        let params = TreeBenchParams { sizes: vec![5_000, 15_000], warmup: false, validate_samples: 50, ..Default::default() };
        let r = run_tree_benchmark(&trace, &[], &params).unwrap();
        assert_eq!(r.records.len(), 20);
        assert_eq!(r.summary.final_valid_count, 20_000);
        assert!(r.summary.buckets.iter().all(|b| b.insert_count > 0 && b.knn_count > 0));
        assert_eq!(r.summary.validation, Some(Validation { checked: 50, mismatches: 0 }));
    }

    #[test]
    fn filler_is_one_point_per_cell() {
        let pts = filler_points(1_000, 0.5, 3);
        assert_eq!(pts.len(), 1_000);
        let mut cells: Vec<_> = pts.iter().map(|p| ((p.x / 0.5).floor() as i64, (p.y / 0.5).floor() as i64, (p.z / 0.5).floor() as i64)).collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 1_000);
        assert!(bounds_of(&pts).unwrap().min_vertex.x >= 5_000.0);
    }

    #[test]
    fn baseline_sampled() {
        let trace = corridor_trace(5_000, 500, 10, 0.1, 2);
        let params = TreeBenchParams { sizes: vec![], warmup: false, baseline_every: 5, ..Default::default() };
        let r = run_tree_benchmark(&trace, &[], &params).unwrap();
        assert_eq!(r.baseline.len(), 2);
        assert!(r.summary.rebuild_ms_per_scan.unwrap() > 0.0);
    }
}
