//! Oracles and generators shared by the integration tests and the
//! acceptance target.
#![allow(dead_code)]

use std::collections::HashMap;

use lio_core::geometry::{dist_sq, AlignedCuboid, Point3};
use lio_core::manifold::{so3, NavState, TangentVector, DIM};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Set-of-cells model of a downsampled map: one point per cell, replaced
/// only by a strictly closer point to the cell center.
#[derive(Clone, Debug)]
pub struct MapOracle {
    pub resolution: f64,
    cells: HashMap<[i64; 3], Point3>,
}

impl MapOracle {
    pub fn new(resolution: f64) -> Self {
        Self { resolution, cells: HashMap::new() }
    }

    pub fn cell_of(&self, p: &Point3) -> [i64; 3] {
        let i = |v: f64| (v / self.resolution).floor() as i64;
        [i(p.x), i(p.y), i(p.z)]
    }

    fn center(&self, c: [i64; 3]) -> Point3 {
        let m = |i: i64| (i as f64 + 0.5) * self.resolution;
        Point3::new(m(c[0]), m(c[1]), m(c[2]))
    }

    pub fn insert(&mut self, p: Point3) -> bool {
        let c = self.cell_of(&p);
        let center = self.center(c);
        match self.cells.get(&c) {
            Some(q) if dist_sq(&p, &center) >= dist_sq(q, &center) => false,
            _ => {
                self.cells.insert(c, p);
                true
            }
        }
    }

    pub fn box_delete(&mut self, region: &AlignedCuboid) -> usize {
        let before = self.cells.len();
        self.cells.retain(|_, p| !region.contains(p));
        before - self.cells.len()
    }

    pub fn occupant(&self, p: &Point3) -> Option<Point3> {
        self.cells.get(&self.cell_of(p)).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn points(&self) -> Vec<Point3> {
        self.cells.values().copied().collect()
    }
}

/// Sorted distances of the `k` nearest points within `max_dist`.
pub fn exhaustive_knn(points: &[Point3], target: &Point3, k: usize, max_dist: f64) -> Vec<f64> {
    let mut d: Vec<f64> =
        points.iter().map(|p| dist_sq(p, target)).filter(|d| *d <= max_dist * max_dist).collect();
    d.sort_by(f64::total_cmp);
    d.truncate(k);
    d.into_iter().map(f64::sqrt).collect()
}

pub fn sorted(mut v: Vec<Point3>) -> Vec<Point3> {
    v.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
    v
}

pub fn random_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point3 {
    Point3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
}

pub fn random_box(rng: &mut ChaCha8Rng, lo: f64, hi: f64, max_edge: f64) -> AlignedCuboid {
    let a = random_point(rng, lo, hi);
    let e = |rng: &mut ChaCha8Rng| rng.random_range(0.0..max_edge);
    let b = Point3::new(a.x + e(rng), a.y + e(rng), a.z + e(rng));
    AlignedCuboid::from_corners(a, b)
}

pub fn random_vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
}

pub fn random_rotation_vector(rng: &mut ChaCha8Rng, max_norm: f64) -> Vector3<f64> {
    loop {
        let v = random_vec3(rng, 1.0);
        if v.norm() <= 1.0 {
            return v * max_norm;
        }
    }
}

pub fn random_state(rng: &mut ChaCha8Rng) -> NavState {
    NavState {
        rot: so3::exp(&random_rotation_vector(rng, 3.0)),
        pos: random_vec3(rng, 10.0),
        vel: random_vec3(rng, 2.0),
        bias_gyro: random_vec3(rng, 0.01),
        bias_acc: random_vec3(rng, 0.1),
        gravity: Vector3::new(0.0, 0.0, -9.81) + random_vec3(rng, 0.1),
        rot_il: so3::exp(&random_rotation_vector(rng, 0.5)),
        pos_il: random_vec3(rng, 0.2),
    }
}

pub fn random_tangent(rng: &mut ChaCha8Rng, scale: f64) -> TangentVector {
    let mut d = TangentVector::from_fn(|_, _| rng.random_range(-1.0..1.0) * scale);
    for at in [0, 18] {
        d.fixed_rows_mut::<3>(at).copy_from(&random_rotation_vector(rng, scale.min(1.0)));
    }
    debug_assert_eq!(d.len(), DIM);
    d
}

/// Relative Frobenius error of `a` against the reference `b`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-12)
}
