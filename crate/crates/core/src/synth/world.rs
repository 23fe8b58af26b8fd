use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Planar parallelogram `corner + s·edge_a + t·edge_b`, `s, t ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rectangle {
    pub corner: Vector3<f64>,
    pub edge_a: Vector3<f64>,
    pub edge_b: Vector3<f64>,
    pub surface: usize,
}

impl Rectangle {
    pub fn new(corner: Vector3<f64>, edge_a: Vector3<f64>, edge_b: Vector3<f64>, surface: usize) -> Option<Self> {
        let n = edge_a.cross(&edge_b);
        (n.norm() > 1e-12 * edge_a.norm() * edge_b.norm() && n.norm() > 0.0).then_some(Self { corner, edge_a, edge_b, surface })
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.edge_a.cross(&self.edge_b).normalize()
    }

    /// Ray parameter of the hit, if the ray `origin + t·dir` (`t > 0`) meets the rectangle.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let n = self.edge_a.cross(&self.edge_b);
        let denom = n.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = n.dot(&(self.corner - origin)) / denom;
        if !(t > 1e-9) {
            return None;
        }
        let h = origin + dir * t - self.corner;
        let (aa, bb, ab) = (self.edge_a.norm_squared(), self.edge_b.norm_squared(), self.edge_a.dot(&self.edge_b));
        let (ha, hb) = (h.dot(&self.edge_a), h.dot(&self.edge_b));
        let det = aa * bb - ab * ab;
        let s = (ha * bb - hb * ab) / det;
        let u = (hb * aa - ha * ab) / det;
        ((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u)).then_some(t)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorldModel {
    pub rectangles: Vec<Rectangle>,
}

/// Nearest surface hit along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub range: f64,
    pub surface: usize,
}

impl WorldModel {
    pub fn add(&mut self, corner: Vector3<f64>, edge_a: Vector3<f64>, edge_b: Vector3<f64>) {
        let surface = self.rectangles.len();
        let rect = Rectangle::new(corner, edge_a, edge_b, surface).expect("degenerate rectangle");
        self.rectangles.push(rect);
    }

    /// Axis-aligned box resting on `min.z`, without its bottom face.
    pub fn add_box(&mut self, min: Vector3<f64>, size: Vector3<f64>) {
        let (x, y, z) = (Vector3::x() * size.x, Vector3::y() * size.y, Vector3::z() * size.z);
        self.add(min, x, z);
        self.add(min + y, x, z);
        self.add(min, y, z);
        self.add(min + x, y, z);
        self.add(min + z, x, y);
    }

    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for r in &self.rectangles {
            if let Some(t) = r.intersect(origin, dir) {
                if best.is_none_or(|b| t < b.range) {
                    best = Some(Hit { range: t, surface: r.surface });
                }
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomSpec {
    /// Edge lengths along x, y and z, m. The floor is at z = 0 and the room
    /// is centered on the origin in x and y.
    pub size: [f64; 3],
    /// Floor-to-ceiling pillars of `pillar_width` at these (x, y) centers.
    pub pillars: Vec<[f64; 2]>,
    pub pillar_width: f64,
    /// Boxes: `[x, y, z, size_x, size_y, size_z]` with (x, y, z) the minimum corner.
    pub boxes: Vec<[f64; 6]>,
}

impl Default for RoomSpec {
    fn default() -> Self {
        Self {
            size: [50.0, 50.0, 8.0],
            pillars: vec![[8.0, 8.0], [-8.0, 8.0], [-8.0, -8.0], [8.0, -8.0]],
            pillar_width: 1.0,
            boxes: vec![
                [19.0, -1.0, 0.0, 2.0, 2.0, 1.0],
                [-21.0, -1.5, 0.0, 2.0, 3.0, 1.5],
                [-1.0, 19.0, 0.0, 3.0, 2.0, 2.0],
                [-1.0, -21.0, 0.0, 2.0, 2.0, 0.8],
            ],
        }
    }
}

impl RoomSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !self.size.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err("room size must be positive".into());
        }
        if !self.pillars.is_empty() && !(self.pillar_width > 0.0) {
            return Err("pillar_width must be positive".into());
        }
        if self.boxes.iter().any(|b| !(b[3] > 0.0 && b[4] > 0.0 && b[5] > 0.0)) {
            return Err("box sizes must be positive".into());
        }
        Ok(())
    }

    pub fn build(&self) -> WorldModel {
        let [sx, sy, sz] = self.size;
        let min = Vector3::new(-0.5 * sx, -0.5 * sy, 0.0);
        let (x, y, z) = (Vector3::x() * sx, Vector3::y() * sy, Vector3::z() * sz);
        let mut w = WorldModel::default();
        w.add(min, x, y);
        w.add(min + z, x, y);
        w.add(min, x, z);
        w.add(min + y, x, z);
        w.add(min, y, z);
        w.add(min + x, y, z);
        let half = 0.5 * self.pillar_width;
        for [px, py] in &self.pillars {
            w.add_box(Vector3::new(px - half, py - half, 0.0), Vector3::new(self.pillar_width, self.pillar_width, sz));
        }
        for b in &self.boxes {
            w.add_box(Vector3::new(b[0], b[1], b[2]), Vector3::new(b[3], b[4], b[5]));
        }
        w
    }
}
