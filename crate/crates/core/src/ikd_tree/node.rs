use crate::geometry::{AlignedCuboid, Point3};

use super::BalanceParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Side {
    Left,
    Right,
}

pub(crate) type Link = Option<Box<Node>>;

/// One stored point plus the bookkeeping of the subtree rooted here.
///
/// `push_down` marks that a whole-subtree delete label has not yet been
/// copied onto the children; it implies `tree_deleted`.
#[derive(Debug)]
pub(crate) struct Node {
    pub point: Point3,
    pub axis: u8,
    pub left: Link,
    pub right: Link,
    pub size: usize,
    pub invalid: usize,
    pub deleted: bool,
    pub tree_deleted: bool,
    pub push_down: bool,
    pub range: AlignedCuboid,
}

/// Size bookkeeping read by the balance criteria.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubtreeCounts {
    pub treesize: usize,
    pub left_size: usize,
    pub right_size: usize,
    pub invalidnum: usize,
}

/// True iff either child holds at least `α_bal·(S−1)` nodes or at least
/// `α_del·S` nodes are invalid.
pub fn violates_criterion(counts: &SubtreeCounts, params: &BalanceParams) -> bool {
    let s = counts.treesize as f64;
    let limit = params.alpha_bal * (s - 1.0);
    counts.left_size as f64 >= limit
        || counts.right_size as f64 >= limit
        || counts.invalidnum as f64 >= params.alpha_del * s
}

impl Node {
    /// Fresh leaf with the attribute values of a newly inserted node.
    pub fn leaf(point: Point3, axis: u8) -> Self {
        Self {
            point,
            axis,
            left: None,
            right: None,
            size: 1,
            invalid: 0,
            deleted: false,
            tree_deleted: false,
            push_down: false,
            range: AlignedCuboid::from_point(point),
        }
    }

    #[inline]
    pub fn child(&self, side: Side) -> &Link {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    #[inline]
    pub fn child_mut(&mut self, side: Side) -> &mut Link {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// Copy a pending whole-subtree delete label onto both children.
    #[inline]
    pub fn push_down(&mut self) {
        if !self.push_down {
            return;
        }
        for child in [&mut self.left, &mut self.right].into_iter().flatten() {
            child.deleted = true;
            child.tree_deleted = true;
            child.push_down = true;
            child.invalid = child.size;
        }
        self.push_down = false;
    }

    /// Recompute size, invalid count, range and the subtree label from the
    /// children. The children must already be up to date.
    #[inline]
    pub fn update(&mut self) {
        debug_assert!(!self.push_down || self.left.is_none() && self.right.is_none() || self.tree_deleted);
        let mut size = 1;
        let mut invalid = usize::from(self.deleted);
        let mut range = AlignedCuboid::from_point(self.point);
        let mut all_deleted = self.deleted;
        for child in [&self.left, &self.right].into_iter().flatten() {
            size += child.size;
            invalid += child.invalid;
            range.merge(&child.range);
            all_deleted &= child.tree_deleted;
        }
        self.size = size;
        if self.push_down {
            // children are stale; the pending label says everything is gone
            self.invalid = size;
            self.tree_deleted = true;
        } else {
            self.invalid = invalid;
            self.tree_deleted = all_deleted;
        }
        self.range = range;
    }

    pub fn counts(&self) -> SubtreeCounts {
        SubtreeCounts {
            treesize: self.size,
            left_size: size(&self.left),
            right_size: size(&self.right),
            invalidnum: self.invalid,
        }
    }

    #[inline]
    pub fn violates(&self, params: &BalanceParams) -> bool {
        violates_criterion(&self.counts(), params)
    }

    /// A rebuild cannot improve this subtree: nothing to purge and the
    /// children already differ in size by at most one.
    pub fn irreducible(&self) -> bool {
        self.invalid == 0 && size(&self.left).abs_diff(size(&self.right)) <= 1
    }
}

#[inline]
pub(crate) fn size(link: &Link) -> usize {
    link.as_ref().map_or(0, |n| n.size)
}

pub(crate) fn height(link: &Link) -> usize {
    link.as_ref()
        .map_or(0, |n| 1 + height(&n.left).max(height(&n.right)))
}

/// Build a balanced subtree split at the lower median of the widest axis.
/// Points equal to the split value may land on either side.
pub(crate) fn build(points: &mut [Point3]) -> Link {
    if points.is_empty() {
        return None;
    }
    let mut bounds = AlignedCuboid::from_point(points[0]);
    for p in points.iter().skip(1) {
        bounds.extend(p);
    }
    let mut axis = 0;
    for a in 1..3 {
        if bounds.extent(a) > bounds.extent(axis) {
            axis = a;
        }
    }
    let mid = (points.len() - 1) / 2;
    points.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));

    let (left, rest) = points.split_at_mut(mid);
    let (pivot, right) = rest.split_first_mut().expect("non-empty");
    let mut node = Node::leaf(*pivot, axis as u8);
    node.left = build(left);
    node.right = build(right);
    node.update();
    Some(Box::new(node))
}

/// Append every valid point of the subtree; fully deleted subtrees are
/// skipped without descending.
pub(crate) fn flatten(link: &Link, out: &mut Vec<Point3>) {
    let Some(node) = link.as_deref() else {
        return;
    };
    if node.tree_deleted {
        return;
    }
    flatten(&node.left, out);
    if !node.deleted {
        out.push(node.point);
    }
    flatten(&node.right, out);
}

/// Attribute values recomputed from scratch, honoring labels that are still
/// waiting to be pushed down.
#[derive(Debug, Clone, Copy)]
struct Recount {
    size: usize,
    invalid: usize,
    tree_deleted: bool,
}

/// Walk the whole subtree and compare cached attributes with a full recount.
pub(crate) fn check_consistency(link: &Link) -> Result<(), String> {
    fn walk(link: &Link, inherited: bool, depth: usize) -> Result<Recount, String> {
        let Some(node) = link.as_deref() else {
            return Ok(Recount { size: 0, invalid: 0, tree_deleted: true });
        };
        let here = format!("node {:?} at depth {depth}", node.point);
        if node.push_down && !node.tree_deleted {
            return Err(format!("{here}: pending label without treedeleted"));
        }
        let effective_td = inherited || node.tree_deleted;
        let effective_del = effective_td || node.deleted;
        let pass_down = inherited || node.push_down;
        let l = walk(&node.left, pass_down, depth + 1)?;
        let r = walk(&node.right, pass_down, depth + 1)?;

        let size = 1 + l.size + r.size;
        if node.size != size {
            return Err(format!("{here}: treesize {} but recount {size}", node.size));
        }
        let invalid = usize::from(effective_del) + l.invalid + r.invalid;
        if !inherited && node.invalid != invalid {
            return Err(format!("{here}: invalidnum {} but recount {invalid}", node.invalid));
        }
        if effective_td && (!l.tree_deleted || !r.tree_deleted || !effective_del) {
            return Err(format!("{here}: treedeleted over live descendants"));
        }
        if !inherited && node.tree_deleted != (effective_del && l.tree_deleted && r.tree_deleted) {
            return Err(format!("{here}: treedeleted flag disagrees with children"));
        }

        let mut range = AlignedCuboid::from_point(node.point);
        let axis = node.axis as usize;
        if let Some(c) = node.left.as_deref() {
            range.merge(&c.range);
            if c.range.max_vertex[axis] > node.point[axis] {
                return Err(format!("{here}: left subtree above split value"));
            }
        }
        if let Some(c) = node.right.as_deref() {
            range.merge(&c.range);
            if c.range.min_vertex[axis] < node.point[axis] {
                return Err(format!("{here}: right subtree below split value"));
            }
        }
        if range != node.range {
            return Err(format!("{here}: range {:?} but recount {range:?}", node.range));
        }
        Ok(Recount { size, invalid, tree_deleted: effective_td })
    }
    walk(link, false, 0).map(|_| ())
}

/// Nodes that break a balance criterion although a rebuild would have
/// changed something: not irreducible and not a whole-deleted subtree
/// waiting for an ancestor to purge it.
pub(crate) fn unsettled_nodes(link: &Link, params: &BalanceParams, out: &mut Vec<Point3>) {
    let Some(node) = link.as_deref() else {
        return;
    };
    let c = node.counts();
    let limit = params.alpha_bal * (c.treesize as f64 - 1.0);
    let unbalanced = (c.left_size as f64 >= limit || c.right_size as f64 >= limit)
        && c.left_size.abs_diff(c.right_size) > 1;
    let overdeleted = c.invalidnum as f64 >= params.alpha_del * c.treesize as f64 && !node.tree_deleted;
    if unbalanced || overdeleted {
        out.push(node.point);
    }
    unsettled_nodes(&node.left, params, out);
    unsettled_nodes(&node.right, params, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> BalanceParams {
        BalanceParams::default()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
            .collect()
    }

    #[test]
    fn criterion_examples() {
        let p = params();
        let c = |treesize, left_size, right_size, invalidnum| SubtreeCounts { treesize, left_size, right_size, invalidnum };
        assert!(violates_criterion(&c(3, 2, 0, 0), &p));
        assert!(!violates_criterion(&c(3, 1, 1, 0), &p));
        // 5 >= 0.5 * 10 sits exactly on the boundary
        assert!(violates_criterion(&c(10, 5, 4, 5), &p));
        assert!(!violates_criterion(&c(10, 5, 4, 4), &p));
    }

    #[test]
    fn leaf_update() {
        let mut n = Node::leaf(Point3::new(1.0, 2.0, 3.0), 0);
        n.update();
        assert_eq!((n.size, n.invalid, n.tree_deleted), (1, 0, false));
        assert_eq!(n.range, AlignedCuboid::from_point(Point3::new(1.0, 2.0, 3.0)));
    }

    #[test]
    fn deleted_node_over_deleted_children_is_tree_deleted() {
        let mut n = Node::leaf(Point3::new(1.0, 0.0, 0.0), 0);
        let mut l = Node::leaf(Point3::new(0.0, 0.0, 0.0), 1);
        let mut r = Node::leaf(Point3::new(2.0, 0.0, 0.0), 1);
        for c in [&mut l, &mut r] {
            c.deleted = true;
            c.tree_deleted = true;
            c.update();
        }
        n.left = Some(Box::new(l));
        n.right = Some(Box::new(r));
        n.deleted = true;
        n.update();
        assert!(n.tree_deleted);
        assert_eq!((n.size, n.invalid), (3, 3));
    }

    #[test]
    fn build_is_balanced_and_consistent() {
        for &n in &[1usize, 2, 3, 7, 100, 1000] {
            let mut pts = random_points(n, n as u64);
            let root = build(&mut pts);
            assert_eq!(size(&root), n);
            check_consistency(&root).unwrap();
            let bound = (n as f64).log2().ceil() as usize + 1;
            assert!(height(&root) <= bound, "n={n} height={} bound={bound}", height(&root));
        }
    }

    #[test]
    fn build_singleton() {
        let p = Point3::ORIGIN;
        let root = build(&mut [p]).unwrap();
        assert_eq!(root.size, 1);
        assert_eq!(root.range, AlignedCuboid::from_point(p));
        assert!(root.left.is_none() && root.right.is_none());
    }

    #[test]
    fn build_splits_ties_evenly() {
        let mut pts: Vec<Point3> = (0..9).map(|i| Point3::new((i % 3) as f64, i as f64 * 0.01, 0.0)).collect();
        pts.extend((0..9).map(|i| Point3::new(1.0, 5.0 + i as f64 * 0.01, 0.0)));
        let root = build(&mut pts);
        check_consistency(&root).unwrap();
        assert_eq!(size(&root), 18);

        // a wall: every point shares the widest axis's median value
        let mut wall: Vec<Point3> = (0..401).map(|i| Point3::new(if i % 2 == 0 { 0.0 } else { 9.0 }, i as f64 * 1e-3, 0.0)).collect();
        wall.extend(std::iter::repeat_n(Point3::new(0.0, 0.2, 0.0), 100));
        let root = build(&mut wall);
        check_consistency(&root).unwrap();
        let r = root.unwrap();
        assert!(size(&r.left).abs_diff(size(&r.right)) <= 1);
    }

    #[test]
    fn flatten_skips_deleted() {
        let mut pts = random_points(50, 3);
        let mut root = build(&mut pts.clone());
        fn mark(link: &mut Link, i: &mut usize) {
            if let Some(n) = link.as_deref_mut() {
                mark(&mut n.left, i);
                mark(&mut n.right, i);
                if *i % 3 == 0 {
                    n.deleted = true;
                }
                *i += 1;
                n.update();
            }
        }
        let mut i = 0;
        mark(&mut root, &mut i);
        check_consistency(&root).unwrap();

        // oracle: plain recursive enumeration filtering on the flag
        fn enumerate(link: &Link, out: &mut Vec<Point3>) {
            if let Some(n) = link.as_deref() {
                if !n.deleted {
                    out.push(n.point);
                }
                enumerate(&n.left, out);
                enumerate(&n.right, out);
            }
        }
        let mut expect = Vec::new();
        enumerate(&root, &mut expect);
        let mut got = Vec::new();
        flatten(&root, &mut got);
        let key = |p: &Point3| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
        expect.sort_by_key(key);
        got.sort_by_key(key);
        assert_eq!(got, expect);

        pts.clear();
        let mut all = build(&mut random_points(10, 4));
        let r = all.as_deref_mut().unwrap();
        r.deleted = true;
        r.tree_deleted = true;
        r.push_down = true;
        r.invalid = r.size;
        flatten(&all, &mut pts);
        assert!(pts.is_empty());
        check_consistency(&all).unwrap();
    }
}
