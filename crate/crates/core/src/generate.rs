//! Seeded synthetic instances.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, PointCloud, Seed};

/// `n` points drawn i.i.d. uniformly from `bounds`.
pub fn uniform_box(n: usize, bounds: &Aabb, seed: Seed) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("point count must be at least 1"));
    }
    if !bounds.min.is_finite() || !bounds.max.is_finite() {
        return Err(Error::invalid("box corners must be finite"));
    }
    let extent = bounds.max - bounds.min;
    let extents = [extent.x, extent.y, extent.z];
    if extents.iter().any(|&e| e < 0.0) {
        return Err(Error::invalid("box minimum exceeds maximum"));
    }
    if extents.iter().all(|&e| e == 0.0) {
        return Err(Error::invalid("box must have positive extent on some axis"));
    }

    let mut rng = seed.rng();
    let points = (0..n)
        .map(|_| {
            let mut c = [0.0; 3];
            for (axis, v) in c.iter_mut().enumerate() {
                let lo = bounds.min.axis(axis);
                // unit sample scaled so the upper corner stays reachable
                *v = lo + rng.random::<f64>() * extents[axis];
            }
            Point3::from(c)
        })
        .collect();
    PointCloud::new(points)
}

/// Two adjacent half squares in the z = 0 plane: `n_left` points in
/// `[0,1]x[0,0.5)` followed by `n_right` points in `[0,1]x[0.5,1]`.
pub fn two_density(n_left: usize, n_right: usize, seed: Seed) -> Result<PointCloud> {
    if n_left == 0 || n_right == 0 {
        return Err(Error::invalid("both halves need at least one point"));
    }
    let mut rng = seed.rng();
    let mut points = Vec::with_capacity(n_left + n_right);
    for _ in 0..n_left {
        points.push(Point3::new(rng.random(), rng.random_range(0.0..0.5), 0.0));
    }
    for _ in 0..n_right {
        points.push(Point3::new(rng.random(), rng.random_range(0.5..=1.0), 0.0));
    }
    PointCloud::new(points)
}

/// Which half of a two-density instance a point falls into.
pub fn is_left_half(p: &Point3) -> bool {
    p.y < 0.5
}
