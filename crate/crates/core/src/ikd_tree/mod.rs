//! Incremental k-d tree with lazy deletion, on-tree downsampling and
//! partial rebuilds, optionally offloaded to a background thread.
//!
//! Points live on every node. Deletions only set labels; labeled nodes are
//! dropped the next time a rebuild flattens their subtree. After each
//! update the touched subtrees are checked against the size and deletion
//! criteria of [`BalanceParams`] and rebuilt when they fail.
//!
//! With the parallel switch on, a failing subtree of at least `n_max`
//! nodes is rebuilt on a second thread. Updates that reach it meanwhile are
//! applied to the live tree and also queued, then replayed onto the new
//! subtree before it is swapped in. Queries through [`TreeReader`] keep
//! running during the rebuild and see either the old or the new subtree.

mod dump;
mod node;
mod ops;
mod rebuild;
mod region;

use std::sync::Arc;
use std::thread::{self, JoinHandle};

use parking_lot::{Condvar, Mutex, RwLock, RwLockReadGuard};
use thiserror::Error;

use crate::geometry::{dist_sq, AlignedCuboid, Point3};

pub use node::{violates_criterion, SubtreeCounts};
pub use region::{GridCell, Region};

use node::{Link, Side};
use ops::{KnnState, UpdateCtx};
use rebuild::LoggedOp;
use region::DeleteRegion;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("downsample resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("k must be at least 1")]
    ZeroNeighbors,
    #[error("maximum search distance must be non-negative, got {0}")]
    InvalidMaxDistance(f64),
    #[error("point has a non-finite coordinate: {0:?}")]
    NonFinitePoint(Point3),
    #[error("invalid balance parameters: {0}")]
    InvalidParams(String),
}

/// Rebalancing thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceParams {
    /// Largest allowed child share of a subtree, in `(0.5, 1)`.
    pub alpha_bal: f64,
    /// Largest allowed share of deleted nodes, in `(0, 1)`.
    pub alpha_del: f64,
    /// Subtrees at least this large are rebuilt in the background when the
    /// parallel switch is on.
    pub n_max: usize,
}

impl Default for BalanceParams {
    fn default() -> Self {
        Self { alpha_bal: 0.6, alpha_del: 0.5, n_max: 1500 }
    }
}

impl BalanceParams {
    pub fn new(alpha_bal: f64, alpha_del: f64, n_max: usize) -> Result<Self, TreeError> {
        let p = Self { alpha_bal, alpha_del, n_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if !(self.alpha_bal > 0.5 && self.alpha_bal < 1.0) {
            return Err(TreeError::InvalidParams(format!("alpha_bal {} outside (0.5, 1)", self.alpha_bal)));
        }
        if !(self.alpha_del > 0.0 && self.alpha_del < 1.0) {
            return Err(TreeError::InvalidParams(format!("alpha_del {} outside (0, 1)", self.alpha_del)));
        }
        if self.n_max == 0 {
            return Err(TreeError::InvalidParams("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// One kNN result; `distance` is Euclidean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub point: Point3,
    pub distance: f64,
}

/// Rebuild counters since the tree was created.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TreeStats {
    pub sync_rebuilds: u64,
    pub parallel_rebuilds_started: u64,
    pub parallel_rebuilds_completed: u64,
    /// Violations left alone because a background rebuild owned an
    /// overlapping subtree or was already running.
    pub deferred_rebalances: u64,
}

impl TreeStats {
    pub fn total_rebuilds(&self) -> u64 {
        self.sync_rebuilds + self.parallel_rebuilds_started
    }

    fn absorb(&mut self, other: &TreeStats) {
        self.sync_rebuilds += other.sync_rebuilds;
        self.deferred_rebalances += other.deferred_rebalances;
    }
}

struct Inner {
    root: Link,
    in_flight: Option<Vec<Side>>,
    stats: TreeStats,
}

pub(crate) struct Shared {
    tree: RwLock<Inner>,
    logger: Mutex<Vec<LoggedOp>>,
    paused: Mutex<bool>,
    resume: Condvar,
}

impl Shared {
    fn wait_while_paused(&self) {
        let mut paused = self.paused.lock();
        while *paused {
            self.resume.wait(&mut paused);
        }
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.tree.read()
    }
}

/// The single writer handle. Updates take `&mut self`; use
/// [`IkdTree::reader`] for queries from other threads.
pub struct IkdTree {
    shared: Arc<Shared>,
    params: BalanceParams,
    worker: Option<JoinHandle<()>>,
    checks: bool,
}

/// Cloneable query handle usable from any thread.
#[derive(Clone)]
pub struct TreeReader {
    shared: Arc<Shared>,
}

/// Holds background rebuilds between taking their snapshot and building
/// the replacement until dropped. Dropping the tree while a guard is alive
/// blocks.
pub struct RebuildPause {
    shared: Arc<Shared>,
}

impl Drop for RebuildPause {
    fn drop(&mut self) {
        *self.shared.paused.lock() = false;
        self.shared.resume.notify_all();
    }
}

/// Writes performed during one public update, under the tree write lock.
struct Session<'a> {
    root: &'a mut Link,
    ctx: UpdateCtx<'a>,
    logger: &'a Mutex<Vec<LoggedOp>>,
}

impl Session<'_> {
    fn insert(&mut self, p: Point3) {
        if let Some(path) = self.ctx.in_flight {
            if ops::insert_passes(self.root, path, &p) {
                self.logger.lock().push(LoggedOp::Insert(p));
            }
        }
        ops::insert(self.root, p, None, &mut self.ctx);
    }

    fn delete(&mut self, region: DeleteRegion) -> usize {
        if let Some(path) = self.ctx.in_flight {
            if ops::delete_reaches(self.root, path, &region) {
                self.logger.lock().push(LoggedOp::Delete(region));
            }
        }
        ops::box_delete(self.root, &region, &mut self.ctx)
    }
}

fn check_point(p: &Point3) -> Result<(), TreeError> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(TreeError::NonFinitePoint(*p))
    }
}

impl IkdTree {
    pub fn new(params: BalanceParams) -> Self {
        Self {
            shared: Arc::new(Shared {
                tree: RwLock::new(Inner { root: None, in_flight: None, stats: TreeStats::default() }),
                logger: Mutex::new(Vec::new()),
                paused: Mutex::new(false),
                resume: Condvar::new(),
            }),
            params,
            worker: None,
            checks: false,
        }
    }

    /// Balanced tree over `points`; duplicates are kept.
    pub fn build(points: &[Point3], params: BalanceParams) -> Result<Self, TreeError> {
        params.validate()?;
        points.iter().try_for_each(check_point)?;
        let tree = Self::new(params);
        let mut pts = points.to_vec();
        tree.shared.tree.write().root = node::build(&mut pts);
        Ok(tree)
    }

    pub fn params(&self) -> &BalanceParams {
        &self.params
    }

    /// Verify cached attributes against a full recount after every update
    /// and panic on mismatch. Costs O(n) per update.
    pub fn set_consistency_checks(&mut self, on: bool) {
        self.checks = on;
    }

    pub fn reader(&self) -> TreeReader {
        TreeReader { shared: Arc::clone(&self.shared) }
    }

    fn mutate<T>(&mut self, parallel: bool, f: impl FnOnce(&mut Session) -> T) -> T {
        let (out, start) = {
            let mut guard = self.shared.tree.write();
            let Inner { root, in_flight, stats } = &mut *guard;
            let mut session = Session {
                root,
                ctx: UpdateCtx::new(&self.params, parallel, in_flight.as_deref(), stats),
                logger: &self.shared.logger,
            };
            let out = f(&mut session);
            let pending = session.ctx.pending.take();
            drop(session);
            if let Some(path) = &pending {
                *in_flight = Some(path.clone());
                stats.parallel_rebuilds_started += 1;
            }
            (out, pending)
        };
        if let Some(path) = start {
            self.join_worker();
            self.worker = Some(rebuild::spawn(Arc::clone(&self.shared), path, self.params));
        }
        if self.checks {
            if let Err(e) = self.check_consistency() {
                panic!("tree attributes inconsistent: {e}");
            }
        }
        out
    }

    /// Append a leaf where the ordering rule sends `p`.
    pub fn insert_point(&mut self, p: Point3, parallel: bool) -> Result<(), TreeError> {
        check_point(&p)?;
        self.mutate(parallel, |s| s.insert(p));
        Ok(())
    }

    /// Insert `p` keeping at most one valid point in its grid cell of edge
    /// `resolution`: whichever of the cell's points and `p` lies nearest the
    /// cell center. Existing points win ties. Returns whether `p` was kept.
    pub fn insert_with_downsample(&mut self, p: Point3, resolution: f64, parallel: bool) -> Result<bool, TreeError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(TreeError::InvalidResolution(resolution));
        }
        check_point(&p)?;
        let cell = GridCell::containing(&p, resolution);
        let center = cell.center();
        let kept = self.mutate(parallel, |s| {
            let mut occupants = Vec::new();
            ops::box_search(s.root, &cell, &mut occupants);
            let mut best: Option<(f64, Point3)> = None;
            for q in &occupants {
                let d = dist_sq(q, &center);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, *q));
                }
            }
            match best {
                Some((bd, winner)) if dist_sq(&p, &center) >= bd => {
                    if occupants.len() > 1 {
                        s.delete(DeleteRegion::Cell(cell));
                        s.insert(winner);
                    }
                    false
                }
                _ => {
                    if !occupants.is_empty() {
                        s.delete(DeleteRegion::Cell(cell));
                    }
                    s.insert(p);
                    true
                }
            }
        });
        Ok(kept)
    }

    /// Label every valid point inside `region` deleted; returns how many.
    pub fn box_delete(&mut self, region: &AlignedCuboid, parallel: bool) -> usize {
        let region = *region;
        self.mutate(parallel, |s| s.delete(DeleteRegion::Cuboid(region)))
    }

    pub fn box_search(&self, region: &AlignedCuboid) -> Vec<Point3> {
        box_search(&self.shared, region)
    }

    pub fn knn_search(&self, target: &Point3, k: usize, max_dist: Option<f64>) -> Result<Vec<Neighbor>, TreeError> {
        knn_search(&self.shared, target, k, max_dist)
    }

    /// `(treesize, valid_count)` of the whole tree.
    pub fn size(&self) -> (usize, usize) {
        size(&self.shared)
    }

    pub fn height(&self) -> usize {
        node::height(&self.shared.read().root)
    }

    /// All valid points.
    pub fn flatten(&self) -> Vec<Point3> {
        flatten(&self.shared)
    }

    pub fn stats(&self) -> TreeStats {
        self.shared.read().stats
    }

    pub fn rebuild_in_progress(&self) -> bool {
        self.shared.read().in_flight.is_some()
    }

    /// Block until any background rebuild has been swapped in.
    pub fn wait_for_rebuild(&mut self) {
        self.join_worker();
    }

    /// Stall background rebuilds after their snapshot so a test can issue
    /// updates that must be logged and replayed.
    pub fn pause_rebuilds(&self) -> RebuildPause {
        *self.shared.paused.lock() = true;
        RebuildPause { shared: Arc::clone(&self.shared) }
    }

    /// Compare every cached attribute with a full recount.
    pub fn check_consistency(&self) -> Result<(), String> {
        node::check_consistency(&self.shared.read().root)
    }

    /// Points stored at nodes that fail a balance criterion although a
    /// rebuild would change them. Empty whenever the tree is settled.
    pub fn unsettled_nodes(&self) -> Vec<Point3> {
        let mut out = Vec::new();
        node::unsettled_nodes(&self.shared.read().root, &self.params, &mut out);
        out
    }

    pub fn debug_dump(&self) -> String {
        dump::dump(&self.shared.read().root)
    }

    fn join_worker(&mut self) {
        if let Some(handle) = self.worker.take() {
            if let Err(panic) = handle.join() {
                if !thread::panicking() {
                    std::panic::resume_unwind(panic);
                }
            }
        }
    }
}

impl Default for IkdTree {
    fn default() -> Self {
        Self::new(BalanceParams::default())
    }
}

impl Drop for IkdTree {
    fn drop(&mut self) {
        self.join_worker();
    }
}

impl std::fmt::Debug for IkdTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (treesize, valid) = self.size();
        f.debug_struct("IkdTree")
            .field("treesize", &treesize)
            .field("valid", &valid)
            .field("params", &self.params)
            .finish()
    }
}

impl TreeReader {
    pub fn box_search(&self, region: &AlignedCuboid) -> Vec<Point3> {
        box_search(&self.shared, region)
    }

    pub fn knn_search(&self, target: &Point3, k: usize, max_dist: Option<f64>) -> Result<Vec<Neighbor>, TreeError> {
        knn_search(&self.shared, target, k, max_dist)
    }

    pub fn size(&self) -> (usize, usize) {
        size(&self.shared)
    }

    pub fn flatten(&self) -> Vec<Point3> {
        flatten(&self.shared)
    }
}

fn box_search(shared: &Shared, region: &AlignedCuboid) -> Vec<Point3> {
    let mut out = Vec::new();
    ops::box_search(&shared.read().root, region, &mut out);
    out
}

fn knn_search(shared: &Shared, target: &Point3, k: usize, max_dist: Option<f64>) -> Result<Vec<Neighbor>, TreeError> {
    if k == 0 {
        return Err(TreeError::ZeroNeighbors);
    }
    check_point(target)?;
    let max_dist_sq = match max_dist {
        Some(d) if d >= 0.0 => d * d,
        Some(d) => return Err(TreeError::InvalidMaxDistance(d)),
        None => f64::INFINITY,
    };
    let mut state = KnnState {
        target: *target,
        k,
        max_dist_sq,
        heap: std::collections::BinaryHeap::with_capacity(k + 1),
    };
    ops::knn(&shared.read().root, &mut state);
    Ok(state
        .heap
        .into_sorted_vec()
        .into_iter()
        .map(|c| Neighbor { point: c.point, distance: c.dist_sq.sqrt() })
        .collect())
}

fn size(shared: &Shared) -> (usize, usize) {
    shared.read().root.as_deref().map_or((0, 0), |n| (n.size, n.size - n.invalid))
}

fn flatten(shared: &Shared) -> Vec<Point3> {
    let mut out = Vec::new();
    node::flatten(&shared.read().root, &mut out);
    out
}
