//! Chamfer distance.

use rayon::prelude::*;

use crate::geometry::PointCloud;
use crate::spatial::SpatialIndex;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChamferOptions {
    /// Average squared nearest-neighbour distances instead of distances.
    pub squared: bool,
}

/// Half the sum of the two directional mean nearest-neighbour distances.
pub fn chamfer_distance(s1: &PointCloud, s2: &PointCloud) -> f64 {
    chamfer_distance_with(s1, s2, ChamferOptions::default())
}

pub fn chamfer_distance_with(s1: &PointCloud, s2: &PointCloud, opts: ChamferOptions) -> f64 {
    let (a, b) = rayon::join(
        || directional_mean(s1, s2, opts),
        || directional_mean(s2, s1, opts),
    );
    0.5 * (a + b)
}

/// Mean over `from` of the distance to the nearest point of `to`.
pub fn directional_mean(from: &PointCloud, to: &PointCloud, opts: ChamferOptions) -> f64 {
    let index = SpatialIndex::build(to);
    let dists: Vec<f64> = from
        .points()
        .par_iter()
        .map(|p| {
            let (_, d) = index
                .nearest_where(p, |_| true)
                .expect("clouds are non-empty");
            if opts.squared {
                d * d
            } else {
                d
            }
        })
        .collect();
    // sequential sum keeps the result independent of thread count
    dists.iter().sum::<f64>() / from.len() as f64
}
