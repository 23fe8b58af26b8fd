use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::{dist_sq, min_dist_sq_to_cuboid, CuboidRelation, Point3};

use super::node::{self, Link, Node, Side};
use super::region::Region;
use super::{BalanceParams, TreeStats};

/// Per-operation state threaded through the recursive updates.
pub(crate) struct UpdateCtx<'a> {
    pub params: &'a BalanceParams,
    pub parallel: bool,
    /// Path of the subtree a background rebuild currently owns.
    pub in_flight: Option<&'a [Side]>,
    /// Path of a large violating subtree to hand to the background thread
    /// once this operation completes.
    pub pending: Option<Vec<Side>>,
    pub path: Vec<Side>,
    pub stats: &'a mut TreeStats,
}

impl<'a> UpdateCtx<'a> {
    pub fn new(
        params: &'a BalanceParams,
        parallel: bool,
        in_flight: Option<&'a [Side]>,
        stats: &'a mut TreeStats,
    ) -> Self {
        Self { params, parallel, in_flight, pending: None, path: Vec::with_capacity(64), stats }
    }

    fn related(&self, other: &[Side]) -> bool {
        let n = other.len().min(self.path.len());
        other[..n] == self.path[..n]
    }

    fn blocked(&self) -> bool {
        self.in_flight.is_some_and(|f| self.related(f))
            || self.pending.as_deref().is_some_and(|p| self.related(p))
    }
}

/// Replace the subtree with a freshly built one over its valid points.
pub(crate) fn rebuild_now(link: &mut Link) {
    let mut points = Vec::with_capacity(node::size(link));
    node::flatten(link, &mut points);
    *link = node::build(&mut points);
}

fn rebalance(link: &mut Link, ctx: &mut UpdateCtx) {
    let Some(n) = link.as_deref() else {
        return;
    };
    if !n.violates(ctx.params) || n.irreducible() {
        return;
    }
    if ctx.blocked() {
        ctx.stats.deferred_rebalances += 1;
        return;
    }
    if n.size < ctx.params.n_max || !ctx.parallel {
        rebuild_now(link);
        ctx.stats.sync_rebuilds += 1;
    } else if ctx.in_flight.is_some() || ctx.pending.is_some() {
        // only one background rebuild at a time
        ctx.stats.deferred_rebalances += 1;
    } else {
        ctx.pending = Some(ctx.path.clone());
    }
}

pub(crate) fn insert(link: &mut Link, p: Point3, father_axis: Option<u8>, ctx: &mut UpdateCtx) {
    let Some(n) = link.as_deref_mut() else {
        let axis = father_axis.map_or(0, |a| (a + 1) % 3);
        *link = Some(Box::new(Node::leaf(p, axis)));
        return;
    };
    n.push_down();
    let side = if p[n.axis as usize] < n.point[n.axis as usize] { Side::Left } else { Side::Right };
    let axis = n.axis;
    ctx.path.push(side);
    insert(n.child_mut(side), p, Some(axis), ctx);
    ctx.path.pop();
    n.update();
    rebalance(link, ctx);
}

pub(crate) fn box_delete<R: Region>(link: &mut Link, region: &R, ctx: &mut UpdateCtx) -> usize {
    let Some(n) = link.as_deref_mut() else {
        return 0;
    };
    if n.tree_deleted {
        return 0;
    }
    match region.relate(&n.range) {
        CuboidRelation::Disjoint => 0,
        CuboidRelation::Contained => {
            let removed = n.size - n.invalid;
            n.deleted = true;
            n.tree_deleted = true;
            n.push_down = true;
            n.invalid = n.size;
            removed
        }
        CuboidRelation::Overlapping => {
            let mut removed = 0;
            if !n.deleted && region.contains(&n.point) {
                n.deleted = true;
                removed = 1;
            }
            for side in [Side::Left, Side::Right] {
                ctx.path.push(side);
                removed += box_delete(n.child_mut(side), region, ctx);
                ctx.path.pop();
            }
            n.update();
            rebalance(link, ctx);
            removed
        }
    }
}

pub(crate) fn box_search<R: Region>(link: &Link, region: &R, out: &mut Vec<Point3>) {
    let Some(n) = link.as_deref() else {
        return;
    };
    if n.tree_deleted {
        return;
    }
    match region.relate(&n.range) {
        CuboidRelation::Disjoint => {}
        CuboidRelation::Contained => node::flatten(link, out),
        CuboidRelation::Overlapping => {
            if !n.deleted && region.contains(&n.point) {
                out.push(n.point);
            }
            box_search(&n.left, region, out);
            box_search(&n.right, region, out);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate {
    pub dist_sq: f64,
    pub point: Point3,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq.total_cmp(&other.dist_sq)
    }
}

/// Bounded max-heap holding the best `k` candidates seen so far.
pub(crate) struct KnnState {
    pub target: Point3,
    pub k: usize,
    pub max_dist_sq: f64,
    pub heap: BinaryHeap<Candidate>,
}

impl KnnState {
    fn worst(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.dist_sq)
        }
    }

    fn prunes(&self, lower_bound: f64) -> bool {
        lower_bound > self.max_dist_sq || lower_bound >= self.worst()
    }

    fn offer(&mut self, point: Point3) {
        let d = dist_sq(&self.target, &point);
        if d > self.max_dist_sq {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(Candidate { dist_sq: d, point });
        } else if d < self.worst() {
            self.heap.pop();
            self.heap.push(Candidate { dist_sq: d, point });
        }
    }
}

pub(crate) fn knn(link: &Link, state: &mut KnnState) {
    let Some(n) = link.as_deref() else {
        return;
    };
    if n.tree_deleted || state.prunes(min_dist_sq_to_cuboid(&state.target, &n.range)) {
        return;
    }
    if !n.deleted {
        state.offer(n.point);
    }
    let (near, far) = {
        let dl = n.left.as_ref().map_or(f64::INFINITY, |c| min_dist_sq_to_cuboid(&state.target, &c.range));
        let dr = n.right.as_ref().map_or(f64::INFINITY, |c| min_dist_sq_to_cuboid(&state.target, &c.range));
        if dl <= dr { (&n.left, &n.right) } else { (&n.right, &n.left) }
    };
    knn(near, state);
    knn(far, state);
}

/// Swap the subtree at `path` for `replacement`, refreshing every ancestor
/// on the way back up. Returns the detached subtree.
pub(crate) fn replace_at(link: &mut Link, path: &[Side], replacement: Link) -> Link {
    match path.split_first() {
        None => std::mem::replace(link, replacement),
        Some((&side, rest)) => {
            let n = link.as_deref_mut().expect("rebuild path left the tree");
            n.push_down();
            let old = replace_at(n.child_mut(side), rest, replacement);
            n.update();
            old
        }
    }
}

pub(crate) fn subtree_at<'a>(link: &'a Link, path: &[Side]) -> &'a Link {
    path.iter().fold(link, |l, &side| l.as_deref().expect("rebuild path left the tree").child(side))
}

/// Whether inserting `p` from the root descends through the node at `path`.
pub(crate) fn insert_passes(root: &Link, path: &[Side], p: &Point3) -> bool {
    let mut link = root;
    for &side in path {
        let Some(n) = link.as_deref() else {
            return false;
        };
        let go = if p[n.axis as usize] < n.point[n.axis as usize] { Side::Left } else { Side::Right };
        if go != side {
            return false;
        }
        link = n.child(side);
    }
    true
}

/// Whether a delete of `region` can touch the subtree at `path`.
pub(crate) fn delete_reaches<R: Region>(root: &Link, path: &[Side], region: &R) -> bool {
    subtree_at(root, path)
        .as_deref()
        .is_some_and(|n| region.relate(&n.range) != CuboidRelation::Disjoint)
}
