use crate::geometry::{AlignedCuboid, Point3};
use crate::ikd_tree::IkdTree;

/// Cube of edge `length` around `center` holding the local map. The
/// sensor's detection ball of radius `gamma·fov_range` must stay inside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapRegion {
    pub center: Point3,
    pub length: f64,
    pub gamma: f64,
    pub fov_range: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("map region of length {length} must exceed {min_length}: two detection-ball radii plus one move")]
pub struct RegionTooSmall {
    pub length: f64,
    pub min_length: f64,
}

/// Summary of one region update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionUpdate {
    /// Vacated slabs, in deletion order.
    pub slabs: Vec<AlignedCuboid>,
    pub deleted_points: usize,
}

impl MapRegion {
    pub fn new(center: Point3, length: f64, gamma: f64, fov_range: f64) -> Result<Self, RegionTooSmall> {
        let region = Self { center, length, gamma, fov_range };
        // a shift must not push the ball through the opposite face, or updates oscillate
        let min_length = 2.0 * region.ball_radius() + region.move_distance();
        if !(gamma > 1.0 && fov_range > 0.0 && length > min_length) {
            return Err(RegionTooSmall { length, min_length });
        }
        Ok(region)
    }

    pub fn ball_radius(&self) -> f64 {
        self.gamma * self.fov_range
    }

    pub fn move_distance(&self) -> f64 {
        (self.gamma - 1.0) * self.fov_range
    }

    pub fn bounds(&self) -> AlignedCuboid {
        AlignedCuboid::cube(self.center, self.length)
    }

    /// Shift the region away from every face the detection ball around
    /// `lidar` touches, one axis at a time, and delete each vacated slab.
    /// Repeats on an axis until the ball is clear of that axis's faces.
    pub fn update(&mut self, lidar: &Point3, tree: &mut IkdTree, parallel: bool) -> RegionUpdate {
        let r = self.ball_radius();
        let d = self.move_distance();
        let half = 0.5 * self.length;
        let mut out = RegionUpdate::default();
        for axis in 0..3 {
            loop {
                let old = self.bounds();
                let slab = if lidar[axis] + r >= self.center[axis] + half {
                    self.center[axis] += d;
                    let mut s = old;
                    s.max_vertex[axis] = old.min_vertex[axis] + d;
                    s
                } else if lidar[axis] - r <= self.center[axis] - half {
                    self.center[axis] -= d;
                    let mut s = old;
                    s.min_vertex[axis] = old.max_vertex[axis] - d;
                    s
                } else {
                    break;
                };
                out.deleted_points += tree.box_delete(&slab, parallel);
                out.slabs.push(slab);
            }
        }
        out
    }
}
