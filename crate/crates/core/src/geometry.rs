//! Points and axis-aligned cuboids shared by the map and the filter.

use std::ops::{Index, IndexMut};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// A point in 3-D space, meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    #[inline]
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Index<usize> for Point3 {
    type Output = f64;

    #[inline]
    fn index(&self, axis: usize) -> &f64 {
        match axis {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl IndexMut<usize> for Point3 {
    #[inline]
    fn index_mut(&mut self, axis: usize) -> &mut f64 {
        match axis {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Vector3<f64>> for Point3 {
    fn from(v: Vector3<f64>) -> Self {
        Self::from_vector(&v)
    }
}

/// Squared Euclidean distance.
#[inline]
pub fn dist_sq(p: &Point3, q: &Point3) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    let dz = p.z - q.z;
    dx * dx + dy * dy + dz * dz
}

/// Closed axis-aligned box `[min_vertex, max_vertex]`. Zero volume is allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedCuboid {
    pub min_vertex: Point3,
    pub max_vertex: Point3,
}

/// How cuboid `A` sits relative to cuboid `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CuboidRelation {
    Disjoint,
    /// `A ⊆ B`.
    Contained,
    Overlapping,
}

impl AlignedCuboid {
    /// Returns `None` unless `min ≤ max` on every axis and both are finite.
    pub fn new(min_vertex: Point3, max_vertex: Point3) -> Option<Self> {
        let ok = min_vertex.is_finite()
            && max_vertex.is_finite()
            && (0..3).all(|a| min_vertex[a] <= max_vertex[a]);
        ok.then_some(Self { min_vertex, max_vertex })
    }

    /// Box spanned by two arbitrary corners.
    pub fn from_corners(a: Point3, b: Point3) -> Self {
        Self {
            min_vertex: Point3::new(a.x.min(b.x), a.y.min(b.y), a.z.min(b.z)),
            max_vertex: Point3::new(a.x.max(b.x), a.y.max(b.y), a.z.max(b.z)),
        }
    }

    #[inline]
    pub fn from_point(p: Point3) -> Self {
        Self { min_vertex: p, max_vertex: p }
    }

    pub fn cube(center: Point3, edge: f64) -> Self {
        let h = 0.5 * edge;
        Self {
            min_vertex: Point3::new(center.x - h, center.y - h, center.z - h),
            max_vertex: Point3::new(center.x + h, center.y + h, center.z + h),
        }
    }

    #[inline]
    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| self.min_vertex[a] <= p[a] && p[a] <= self.max_vertex[a])
    }

    #[inline]
    pub fn extend(&mut self, p: &Point3) {
        for a in 0..3 {
            self.min_vertex[a] = self.min_vertex[a].min(p[a]);
            self.max_vertex[a] = self.max_vertex[a].max(p[a]);
        }
    }

    #[inline]
    pub fn merge(&mut self, other: &AlignedCuboid) {
        for a in 0..3 {
            self.min_vertex[a] = self.min_vertex[a].min(other.min_vertex[a]);
            self.max_vertex[a] = self.max_vertex[a].max(other.max_vertex[a]);
        }
    }

    pub fn center(&self) -> Point3 {
        Point3::new(
            0.5 * (self.min_vertex.x + self.max_vertex.x),
            0.5 * (self.min_vertex.y + self.max_vertex.y),
            0.5 * (self.min_vertex.z + self.max_vertex.z),
        )
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max_vertex[axis] - self.min_vertex[axis]
    }

    /// Relation of `self` (A) to `other` (B), closed intervals.
    pub fn relate(&self, other: &AlignedCuboid) -> CuboidRelation {
        cuboid_relate(self, other)
    }
}

/// Classify `a` against `b` using closed intervals on each axis.
pub fn cuboid_relate(a: &AlignedCuboid, b: &AlignedCuboid) -> CuboidRelation {
    let mut contained = true;
    for axis in 0..3 {
        if a.max_vertex[axis] < b.min_vertex[axis] || a.min_vertex[axis] > b.max_vertex[axis] {
            return CuboidRelation::Disjoint;
        }
        if a.min_vertex[axis] < b.min_vertex[axis] || a.max_vertex[axis] > b.max_vertex[axis] {
            contained = false;
        }
    }
    if contained {
        CuboidRelation::Contained
    } else {
        CuboidRelation::Overlapping
    }
}

/// Squared distance from `p` to the nearest point of `c`; zero inside.
#[inline]
pub fn min_dist_sq_to_cuboid(p: &Point3, c: &AlignedCuboid) -> f64 {
    let mut d = 0.0;
    for axis in 0..3 {
        let v = p[axis];
        let gap = if v < c.min_vertex[axis] {
            c.min_vertex[axis] - v
        } else if v > c.max_vertex[axis] {
            v - c.max_vertex[axis]
        } else {
            0.0
        };
        d += gap * gap;
    }
    d
}
