use std::collections::BinaryHeap;

use crate::geometry::{dist_sq, Point3};
use crate::ikd_tree::Neighbor;

/// Exhaustive kNN: the `k` nearest points within `max_dist` (inclusive),
/// nearest first.
pub fn brute_force_knn(points: &[Point3], target: &Point3, k: usize, max_dist: Option<f64>) -> Vec<Neighbor> {
    assert!(k >= 1, "k must be at least 1");
    let limit = max_dist.map_or(f64::INFINITY, |d| d * d);
    let mut all: Vec<(f64, Point3)> =
        points.iter().map(|p| (dist_sq(p, target), *p)).filter(|(d, _)| *d <= limit).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.truncate(k);
    all.into_iter().map(|(d, point)| Neighbor { point, distance: d.sqrt() }).collect()
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate(f64, Point3);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Static k-d tree rebuilt from scratch whenever the map changes. Points
/// are permuted in place so that every subrange is a balanced subtree with
/// its median at the middle.
#[derive(Clone, Debug, Default)]
pub struct StaticKdTree {
    points: Vec<Point3>,
    axes: Vec<u8>,
}

impl StaticKdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut tree = Self { points: points.to_vec(), axes: vec![0; points.len()] };
        let n = tree.points.len();
        tree.build_range(0, n);
        tree
    }

    fn build_range(&mut self, lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        let slice = &self.points[lo..hi];
        let mut best = (0usize, f64::NEG_INFINITY);
        for axis in 0..3 {
            let (mn, mx) = slice
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[axis]), b.max(p[axis])));
            if mx - mn > best.1 {
                best = (axis, mx - mn);
            }
        }
        let axis = best.0;
        let mid = (hi - lo) / 2;
        self.points[lo..hi].select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
        self.axes[lo + mid] = axis as u8;
        self.build_range(lo, lo + mid);
        self.build_range(lo + mid + 1, hi);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same contract as [`brute_force_knn`].
    pub fn knn(&self, target: &Point3, k: usize, max_dist: Option<f64>) -> Vec<Neighbor> {
        assert!(k >= 1, "k must be at least 1");
        let limit = max_dist.map_or(f64::INFINITY, |d| d * d);
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, self.points.len(), target, k, limit, &mut heap);
        let mut out: Vec<Neighbor> =
            heap.into_iter().map(|Candidate(d, point)| Neighbor { point, distance: d.sqrt() }).collect();
        out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
        out
    }

    fn search(&self, lo: usize, hi: usize, target: &Point3, k: usize, limit: f64, heap: &mut BinaryHeap<Candidate>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        let d = dist_sq(&p, target);
        if d <= limit && (heap.len() < k || d < heap.peek().map_or(f64::INFINITY, |c| c.0)) {
            heap.push(Candidate(d, p));
            if heap.len() > k {
                heap.pop();
            }
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axes[mid] as usize;
        let diff = target[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, target, k, limit, heap);
        let bound = if heap.len() < k { limit } else { heap.peek().map_or(limit, |c| c.0.min(limit)) };
        if diff * diff <= bound {
            self.search(far.0, far.1, target, k, limit, heap);
        }
    }
}
