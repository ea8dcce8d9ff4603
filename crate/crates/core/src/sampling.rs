//! Subset samplers: minimum density sampling and the FPS / Poisson-disk
//! baselines.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{LabeledPointCloud, Point3, PointCloud, Seed};
use crate::spatial::SpatialIndex;

/// Selected indices into the source cloud, in selection order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleResult {
    pub indices: Vec<usize>,
}

impl SampleResult {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        cloud.select(&self.indices)
    }

    pub fn apply_labeled(&self, cloud: &LabeledPointCloud) -> Result<LabeledPointCloud> {
        cloud.select(&self.indices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdsConfig {
    /// Width of the Gaussian used to estimate density.
    pub sigma: f64,
    /// Index of the first selection; every candidate has zero density then.
    pub first_point: usize,
}

impl MdsConfig {
    pub fn new(sigma: f64) -> Self {
        MdsConfig {
            sigma,
            first_point: 0,
        }
    }

    pub fn with_first_point(mut self, first_point: usize) -> Self {
        self.first_point = first_point;
        self
    }

    /// σ = 2 × the mean nearest-neighbour spacing of `cloud`.
    pub fn auto(cloud: &PointCloud) -> Self {
        MdsConfig::new(default_sigma(cloud))
    }
}

/// Twice the mean nearest-neighbour distance, falling back to the bounding
/// diagonal (or 1) when the cloud has no spacing to measure.
pub fn default_sigma(cloud: &PointCloud) -> f64 {
    if cloud.len() >= 2 {
        let index = SpatialIndex::build(cloud);
        let total: f64 = (0..cloud.len())
            .map(|i| index.nearest(&cloud[i], Some(i)).expect("two or more points").1)
            .sum();
        let spacing = total / cloud.len() as f64;
        if spacing > 0.0 {
            return 2.0 * spacing;
        }
    }
    let diag = cloud.bounds().diagonal();
    if diag > 0.0 {
        diag
    } else {
        1.0
    }
}

fn check_count(n: usize, m: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "sample size must be in 1..={n}, got {m}"
        )));
    }
    Ok(())
}

#[inline]
fn gaussian(d2: f64, two_sigma_sq: f64) -> f64 {
    (-d2 / two_sigma_sq).exp()
}

/// Lowest index among the minima of `values` over unselected entries.
fn argmin_unselected(values: &[f64], selected: &[bool]) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in values.iter().enumerate() {
        if !selected[i] && (best == usize::MAX || v < values[best]) {
            best = i;
        }
    }
    best
}

/// Minimum density sampling: repeatedly take the unselected point whose
/// summed Gaussian weight to the points already taken is smallest.
pub fn mds_sample(cloud: &PointCloud, m: usize, cfg: &MdsConfig) -> Result<SampleResult> {
    let n = cloud.len();
    check_count(n, m)?;
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    if cfg.first_point >= n {
        return Err(Error::invalid(format!("first point {} out of range", cfg.first_point)));
    }
    let two_sigma_sq = 2.0 * cfg.sigma * cfg.sigma;
    let points = cloud.points();

    let mut density = vec![0.0f64; n];
    let mut selected = vec![false; n];
    let mut indices = Vec::with_capacity(m);
    let mut next = cfg.first_point;
    loop {
        selected[next] = true;
        indices.push(next);
        if indices.len() == m {
            break;
        }
        let p = points[next];
        density
            .par_iter_mut()
            .zip(points.par_iter())
            .zip(selected.par_iter())
            .for_each(|((d, q), &taken)| {
                if !taken {
                    *d += gaussian(p.distance_squared(q), two_sigma_sq);
                }
            });
        next = argmin_unselected(&density, &selected);
    }
    Ok(SampleResult { indices })
}

/// Farthest point sampling from `first_point`.
pub fn fps_sample(cloud: &PointCloud, m: usize, first_point: usize) -> Result<SampleResult> {
    let n = cloud.len();
    check_count(n, m)?;
    if first_point >= n {
        return Err(Error::invalid(format!("first point {first_point} out of range")));
    }
    let points = cloud.points();
    let mut nearest = vec![f64::INFINITY; n];
    let mut selected = vec![false; n];
    let mut indices = Vec::with_capacity(m);
    let mut next = first_point;
    loop {
        selected[next] = true;
        indices.push(next);
        if indices.len() == m {
            break;
        }
        let p = points[next];
        nearest
            .par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(d, q)| *d = d.min(p.distance(q)));
        let mut best = usize::MAX;
        for i in 0..n {
            if !selected[i] && (best == usize::MAX || nearest[i] > nearest[best]) {
                best = i;
            }
        }
        next = best;
    }
    Ok(SampleResult { indices })
}

/// Uniformly random subset of size `m`.
pub fn random_sample(cloud: &PointCloud, m: usize, seed: Seed) -> Result<SampleResult> {
    check_count(cloud.len(), m)?;
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.shuffle(&mut seed.rng());
    order.truncate(m);
    Ok(SampleResult { indices: order })
}

/// Poisson-disk subset with the separation radius that was enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct PdsSample {
    pub sample: SampleResult,
    /// Every pair of selected points is at least this far apart.
    pub radius: f64,
}

const PDS_BISECTION_STEPS: usize = 64;

/// Dart throwing over the given points. Points are visited in a
/// seed-shuffled order and kept unless a kept point lies closer than `r`;
/// `r` is bisected until exactly `m` points survive. If no radius yields
/// exactly `m`, the largest radius giving too few is kept and the shortfall
/// is topped up by further passes at successively smaller radii.
pub fn pds_sample(cloud: &PointCloud, m: usize, seed: Seed) -> Result<PdsSample> {
    let n = cloud.len();
    check_count(n, m)?;
    let points = cloud.points();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());

    if m == n {
        return Ok(PdsSample {
            sample: SampleResult { indices: order },
            radius: 0.0,
        });
    }

    let throw = |r: f64| {
        let mut board = DartBoard::new(points, r);
        for &i in &order {
            board.try_insert(i);
        }
        board.accepted
    };

    let mut lo = 0.0;
    let mut hi = 2.0 * cloud.bounds().diagonal() + 1.0;
    for _ in 0..PDS_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let accepted = throw(mid);
        match accepted.len() {
            c if c == m => {
                return Ok(PdsSample {
                    sample: SampleResult { indices: accepted },
                    radius: mid,
                })
            }
            c if c > m => lo = mid,
            _ => hi = mid,
        }
    }

    let mut accepted = throw(hi);
    let mut radius = lo;
    loop {
        let mut board = DartBoard::new(points, radius);
        for &i in &accepted {
            board.insert(i);
        }
        for &i in &order {
            if board.accepted.len() == m {
                break;
            }
            if !board.contains(i) {
                board.try_insert(i);
            }
        }
        accepted = board.accepted;
        if accepted.len() == m {
            break;
        }
        radius = if radius > f64::MIN_POSITIVE { 0.5 * radius } else { 0.0 };
    }
    Ok(PdsSample {
        sample: SampleResult { indices: accepted },
        radius,
    })
}

/// Accepted points hashed into cubic cells of side `r`.
struct DartBoard<'a> {
    points: &'a [Point3],
    r: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    accepted: Vec<usize>,
    taken: Vec<bool>,
}

impl<'a> DartBoard<'a> {
    fn new(points: &'a [Point3], r: f64) -> Self {
        DartBoard {
            points,
            r,
            cells: HashMap::new(),
            accepted: Vec::new(),
            taken: vec![false; points.len()],
        }
    }

    fn cell(&self, p: &Point3) -> [i64; 3] {
        [p.x, p.y, p.z].map(|c| (c / self.r).floor() as i64)
    }

    fn contains(&self, i: usize) -> bool {
        self.taken[i]
    }

    fn conflicts(&self, p: &Point3) -> bool {
        if self.r <= 0.0 {
            return false;
        }
        let c = self.cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = [
                        c[0].saturating_add(dx),
                        c[1].saturating_add(dy),
                        c[2].saturating_add(dz),
                    ];
                    if let Some(bucket) = self.cells.get(&key) {
                        if bucket.iter().any(|&j| p.distance(&self.points[j]) < self.r) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn insert(&mut self, i: usize) {
        self.taken[i] = true;
        self.accepted.push(i);
        if self.r > 0.0 {
            let key = self.cell(&self.points[i]);
            self.cells.entry(key).or_default().push(i);
        }
    }

    fn try_insert(&mut self, i: usize) {
        if !self.conflicts(&self.points[i]) {
            self.insert(i);
        }
    }
}

/// Summed Gaussian weight from each selected point to the other selected
/// points.
pub fn density_profile(cloud: &PointCloud, selected: &SampleResult, sigma: f64) -> Result<Vec<f64>> {
    if selected.is_empty() {
        return Err(Error::invalid("density profile needs a non-empty selection"));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let subset = selected.apply(cloud)?;
    let two_sigma_sq = 2.0 * sigma * sigma;
    Ok((0..subset.len())
        .into_par_iter()
        .map(|i| {
            (0..subset.len())
                .filter(|&j| j != i)
                .map(|j| gaussian(subset[i].distance_squared(&subset[j]), two_sigma_sq))
                .sum()
        })
        .collect())
}

/// Summary of a density profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityStats {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

impl DensityStats {
    pub fn of(values: &[f64]) -> DensityStats {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        DensityStats {
            mean,
            std_dev: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Standard deviation over mean; zero for an all-zero profile.
    pub fn coefficient_of_variation(&self) -> f64 {
        if self.mean == 0.0 {
            0.0
        } else {
            self.std_dev / self.mean
        }
    }
}
