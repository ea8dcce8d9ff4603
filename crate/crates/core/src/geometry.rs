//! Points, clouds and the source-labeled cloud used by the refinement stage.

use std::ops::{Add, Index, Mul, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A point (or displacement) in model units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.distance(&Point3::ORIGIN)
    }

    #[inline]
    pub fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Point3::new(x, y, z)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, rhs: f64) -> Point3 {
        Point3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Self {
        Aabb { min, max }
    }

    pub fn unit() -> Self {
        Aabb::new(Point3::ORIGIN, Point3::new(1.0, 1.0, 1.0))
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb::new(first, first);
        for p in it {
            b.include(p);
        }
        Some(b)
    }

    pub fn include(&mut self, p: &Point3) {
        self.min = Point3::new(self.min.x.min(p.x), self.min.y.min(p.y), self.min.z.min(p.z));
        self.max = Point3::new(self.max.x.max(p.x), self.max.y.max(p.y), self.max.z.max(p.z));
    }

    pub fn diagonal(&self) -> f64 {
        self.min.distance(&self.max)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| self.min.axis(a) <= p.axis(a) && p.axis(a) <= self.max.axis(a))
    }
}

/// Ordered, non-empty list of finite points. Duplicates are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud must contain at least one point"));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(
                None,
                format!("point {i} has a non-finite coordinate"),
            ));
        }
        Ok(PointCloud { points })
    }

    pub fn from_arrays(coords: &[[f64; 3]]) -> Result<Self> {
        PointCloud::new(coords.iter().copied().map(Point3::from).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.points).expect("non-empty cloud")
    }

    pub fn translated(&self, t: Point3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|&p| p + t).collect(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Result<PointCloud> {
        let points = indices
            .iter()
            .map(|&i| {
                self.points
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        PointCloud::new(points)
    }
}

impl Index<usize> for PointCloud {
    type Output = Point3;
    fn index(&self, i: usize) -> &Point3 {
        &self.points[i]
    }
}

impl<'a> IntoIterator for &'a PointCloud {
    type Item = &'a Point3;
    type IntoIter = std::slice::Iter<'a, Point3>;
    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// Origin of a point in a merged cloud. The numeric value is the label
/// written to disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Source {
    Input = 0,
    Coarse = 1,
}

impl Source {
    pub fn from_label(label: u8) -> Option<Source> {
        match label {
            0 => Some(Source::Input),
            1 => Some(Source::Coarse),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        self as u8
    }
}

/// Points with a parallel binary source channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    cloud: PointCloud,
    sources: Vec<Source>,
}

impl LabeledPointCloud {
    pub fn new(cloud: PointCloud, sources: Vec<Source>) -> Result<Self> {
        if sources.len() != cloud.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                sources.len(),
                cloud.len()
            )));
        }
        Ok(LabeledPointCloud { cloud, sources })
    }

    pub fn uniform(cloud: PointCloud, source: Source) -> Self {
        let sources = vec![source; cloud.len()];
        LabeledPointCloud { cloud, sources }
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn points(&self) -> &[Point3] {
        self.cloud.points()
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn labels(&self) -> impl Iterator<Item = u8> + '_ {
        self.sources.iter().map(|s| s.label())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point3, Source)> {
        self.cloud.iter().zip(self.sources.iter().copied())
    }

    pub fn count(&self, source: Source) -> usize {
        self.sources.iter().filter(|&&s| s == source).count()
    }

    /// Picks points and their labels together.
    pub fn select(&self, indices: &[usize]) -> Result<LabeledPointCloud> {
        let cloud = self.cloud.select(indices)?;
        let sources = indices.iter().map(|&i| self.sources[i]).collect();
        Ok(LabeledPointCloud { cloud, sources })
    }

    pub fn into_parts(self) -> (PointCloud, Vec<Source>) {
        (self.cloud, self.sources)
    }
}

/// Seed for every randomized operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed, e.g. one per trial.
    pub fn derive(self, stream: u64) -> Seed {
        // splitmix64 finalizer
        let mut z = self.0 ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
