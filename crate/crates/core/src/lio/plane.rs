use nalgebra::{Matrix3, SymmetricEigen, Vector3};

/// Local plane through a handful of map points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanePatch {
    /// Unit normal; sign is arbitrary.
    pub normal: Vector3<f64>,
    /// Centroid of the fitted points.
    pub anchor: Vector3<f64>,
    pub valid: bool,
}

impl PlanePatch {
    #[inline]
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(&(p - self.anchor))
    }
}

/// Least-squares plane: centroid plus the eigenvector of the smallest
/// scatter eigenvalue. Valid when the points span two dimensions and every
/// point lies within `threshold` of the plane.
pub fn fit_plane(points: &[Vector3<f64>], threshold: f64) -> PlanePatch {
    let invalid = PlanePatch { normal: Vector3::z(), anchor: Vector3::zeros(), valid: false };
    if points.len() < 3 {
        return invalid;
    }
    let anchor = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - anchor;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, large) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    // collinear or coincident points leave the plane undetermined
    if !(large > 0.0) || mid <= 1e-10 * large || mid <= 1e-12 {
        return PlanePatch { anchor, ..invalid };
    }
    let normal = eig.eigenvectors.column(order[0]).normalize();
    let patch = PlanePatch { normal, anchor, valid: true };
    let valid = points.iter().all(|p| patch.signed_distance(p).abs() <= threshold);
    PlanePatch { valid, ..patch }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_plane() {
        let pts: Vec<Vector3<f64>> =
            [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.3)].iter().map(|&(x, y)| Vector3::new(x, y, 2.0)).collect();
        let p = fit_plane(&pts, 0.1);
        assert!(p.valid);
        assert!((p.normal.z.abs() - 1.0).abs() < 1e-12);
        assert!((p.anchor.z - 2.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_is_invalid() {
        let pts: Vec<Vector3<f64>> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 1.0)).collect();
        assert!(!fit_plane(&pts, 0.1).valid);
        let same = vec![Vector3::new(1.0, 1.0, 1.0); 5];
        assert!(!fit_plane(&same, 0.1).valid);
    }

    #[test]
    fn outlier_breaks_threshold() {
        let mut pts: Vec<Vector3<f64>> = (0..4).map(|i| Vector3::new((i % 2) as f64, (i / 2) as f64, 0.0)).collect();
        pts.push(Vector3::new(0.5, 0.5, 1.0));
        assert!(!fit_plane(&pts, 0.1).valid);
    }

    #[test]
    fn noisy_plane_normal_close_to_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let truth = Vector3::new(0.3, -0.2, 1.0).normalize();
        let basis_u = truth.cross(&Vector3::x()).normalize();
        let basis_v = truth.cross(&basis_u);
        for _ in 0..100 {
            let pts: Vec<Vector3<f64>> = [(0.0, 0.0), (0.6, 0.1), (-0.2, 0.5), (0.4, -0.5), (-0.5, -0.3)]
                .iter()
                .map(|&(a, b)| basis_u * (2.0 * a) + basis_v * (2.0 * b) + truth * (1.0 + noise.sample(&mut rng)))
                .collect();
            let p = fit_plane(&pts, 0.1);
            assert!(p.valid);
            let angle = p.normal.dot(&truth).abs().min(1.0).acos().to_degrees();
            assert!(angle < 2.0, "{angle}");
        }
    }
}
