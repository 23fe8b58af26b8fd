use crate::geometry::{cuboid_relate, AlignedCuboid, CuboidRelation, Point3};

/// A query volume the tree can prune against using subtree ranges.
pub trait Region {
    /// How a subtree range sits relative to this region.
    fn relate(&self, range: &AlignedCuboid) -> CuboidRelation;
    fn contains(&self, p: &Point3) -> bool;
}

impl Region for AlignedCuboid {
    #[inline]
    fn relate(&self, range: &AlignedCuboid) -> CuboidRelation {
        cuboid_relate(range, self)
    }

    #[inline]
    fn contains(&self, p: &Point3) -> bool {
        AlignedCuboid::contains(self, p)
    }
}

/// Half-open downsample cell `[i·l, (i+1)·l)` on each axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub index: [i64; 3],
    pub edge: f64,
}

impl GridCell {
    /// The cell owning `p`; `edge` must be positive.
    pub fn containing(p: &Point3, edge: f64) -> Self {
        Self {
            index: [cell_index(p.x, edge), cell_index(p.y, edge), cell_index(p.z, edge)],
            edge,
        }
    }

    pub fn center(&self) -> Point3 {
        let c = |i: i64| (i as f64 + 0.5) * self.edge;
        Point3::new(c(self.index[0]), c(self.index[1]), c(self.index[2]))
    }

    /// Closed cuboid covering the cell; it also touches the next cell's
    /// lower faces, so membership goes through [`Region::contains`].
    pub fn bounds(&self) -> AlignedCuboid {
        let lo = |i: i64| i as f64 * self.edge;
        AlignedCuboid {
            min_vertex: Point3::new(lo(self.index[0]), lo(self.index[1]), lo(self.index[2])),
            max_vertex: Point3::new(lo(self.index[0] + 1), lo(self.index[1] + 1), lo(self.index[2] + 1)),
        }
    }
}

#[inline]
pub(crate) fn cell_index(v: f64, edge: f64) -> i64 {
    (v / edge).floor() as i64
}

impl Region for GridCell {
    // Cell indices are monotone in the coordinate, so comparing the indices
    // of the range corners is exact.
    fn relate(&self, range: &AlignedCuboid) -> CuboidRelation {
        let mut contained = true;
        for axis in 0..3 {
            let lo = cell_index(range.min_vertex[axis], self.edge);
            let hi = cell_index(range.max_vertex[axis], self.edge);
            let i = self.index[axis];
            if hi < i || lo > i {
                return CuboidRelation::Disjoint;
            }
            if lo != i || hi != i {
                contained = false;
            }
        }
        if contained {
            CuboidRelation::Contained
        } else {
            CuboidRelation::Overlapping
        }
    }

    #[inline]
    fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| cell_index(p[a], self.edge) == self.index[a])
    }
}

/// Deletion volumes recorded while a background rebuild runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum DeleteRegion {
    Cuboid(AlignedCuboid),
    Cell(GridCell),
}

impl Region for DeleteRegion {
    fn relate(&self, range: &AlignedCuboid) -> CuboidRelation {
        match self {
            DeleteRegion::Cuboid(c) => Region::relate(c, range),
            DeleteRegion::Cell(c) => c.relate(range),
        }
    }

    fn contains(&self, p: &Point3) -> bool {
        match self {
            DeleteRegion::Cuboid(c) => Region::contains(c, p),
            DeleteRegion::Cell(c) => c.contains(p),
        }
    }
}
