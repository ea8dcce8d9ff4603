//! Static k-d tree for exact nearest-neighbour and radius queries.
//!
//! Results are defined by the exhaustive scan: distances are compared as
//! `sqrt(dx*dx + dy*dy + dz*dz)` of the stored coordinates and equal
//! distances resolve to the lowest point index.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

const LEAF_SIZE: usize = 8;
// Widens the pruning test so that rounding in the plane distance can never
// discard a candidate that the exact comparison would keep.
const PRUNE_SLACK: f64 = 1.0 + 1e-9;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct SpatialIndex<'a> {
    points: &'a [Point3],
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// `(point index, distance)` ordering used everywhere: distance, then index.
#[inline]
fn closer(d: f64, i: usize, best_d: f64, best_i: usize) -> bool {
    match d.partial_cmp(&best_d) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => i < best_i,
        _ => false,
    }
}

impl<'a> SpatialIndex<'a> {
    pub fn build(cloud: &'a PointCloud) -> SpatialIndex<'a> {
        Self::build_unchecked(cloud.points())
    }

    /// Index over a raw slice; the slice must be non-empty and finite.
    pub fn from_points(points: &'a [Point3]) -> Result<SpatialIndex<'a>> {
        if points.is_empty() {
            return Err(Error::invalid("cannot index an empty point set"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("cannot index non-finite points"));
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::invalid("too many points for the spatial index"));
        }
        Ok(Self::build_unchecked(points))
    }

    fn build_unchecked(points: &'a [Point3]) -> SpatialIndex<'a> {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        build_node(points, &mut order, 0, points.len(), &mut nodes);
        SpatialIndex {
            points,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &'a [Point3] {
        self.points
    }

    /// Closest stored point to `q`, optionally skipping one index.
    pub fn nearest(&self, q: &Point3, exclude_self: Option<usize>) -> Result<(usize, f64)> {
        check_query(q)?;
        if let Some(ex) = exclude_self {
            if ex >= self.len() {
                return Err(Error::invalid(format!("excluded index {ex} out of range")));
            }
            if self.len() < 2 {
                return Err(Error::invalid("excluding the only point leaves no candidates"));
            }
        }
        self.nearest_where(q, |i| Some(i) != exclude_self)
            .ok_or_else(|| Error::invalid("no admissible candidate"))
    }

    /// Closest point among those accepted by `admit`.
    pub fn nearest_where(&self, q: &Point3, admit: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        let mut best = (f64::INFINITY, usize::MAX);
        self.search_nearest(0, q, &admit, None, &mut best);
        (best.1 != usize::MAX).then_some((best.1, best.0))
    }

    fn search_nearest(
        &self,
        node: usize,
        q: &Point3,
        admit: &impl Fn(usize) -> bool,
        alive: Option<&[u32]>,
        best: &mut (f64, usize),
    ) {
        if alive.is_some_and(|a| a[node] == 0) {
            return;
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let i = i as usize;
                    if !admit(i) {
                        continue;
                    }
                    let d = q.distance(&self.points[i]);
                    if closer(d, i, best.0, best.1) {
                        *best = (d, i);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q.axis(axis as usize) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search_nearest(near as usize, q, admit, alive, best);
                if diff.abs() <= best.0 * PRUNE_SLACK {
                    self.search_nearest(far as usize, q, admit, alive, best);
                }
            }
        }
    }

    /// Every point with distance `<= r`, ascending by distance then index.
    pub fn within_radius(&self, q: &Point3, r: f64) -> Result<Vec<(usize, f64)>> {
        check_query(q)?;
        if r.is_nan() || r < 0.0 {
            return Err(Error::invalid(format!("radius must be non-negative, got {r}")));
        }
        let mut out = Vec::new();
        self.search_radius(0, q, r, &mut out);
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(out)
    }

    fn search_radius(&self, node: usize, q: &Point3, r: f64, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d = q.distance(&self.points[i as usize]);
                    if d <= r {
                        out.push((i as usize, d));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q.axis(axis as usize) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search_radius(near as usize, q, r, out);
                if diff.abs() <= r * PRUNE_SLACK {
                    self.search_radius(far as usize, q, r, out);
                }
            }
        }
    }

    /// Nearest-neighbour view supporting point removal, for greedy matching.
    pub fn removal_set(&self) -> RemovalSet<'_, 'a> {
        let mut alive = vec![0u32; self.nodes.len()];
        let mut parent = vec![u32::MAX; self.nodes.len()];
        let mut leaf_of = vec![0u32; self.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start as usize..end as usize] {
                        leaf_of[i as usize] = id as u32;
                    }
                }
                Node::Split { left, right, .. } => {
                    parent[left as usize] = id as u32;
                    parent[right as usize] = id as u32;
                }
            }
        }
        // children are always pushed after their parent
        for id in (0..self.nodes.len()).rev() {
            alive[id] = match self.nodes[id] {
                Node::Leaf { start, end } => end - start,
                Node::Split { left, right, .. } => alive[left as usize] + alive[right as usize],
            };
        }
        RemovalSet {
            index: self,
            removed: vec![false; self.len()],
            alive,
            parent,
            leaf_of,
        }
    }
}

fn check_query(q: &Point3) -> Result<()> {
    if q.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("query point must be finite"))
    }
}

fn build_node(points: &[Point3], order: &mut [u32], start: usize, end: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return id;
    }
    let slice = &mut order[start..end];
    let mut lo = points[slice[0] as usize];
    let mut hi = lo;
    for &i in slice.iter() {
        let p = points[i as usize];
        lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    let extent = hi - lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize]
            .axis(axis)
            .total_cmp(&points[b as usize].axis(axis))
            .then(a.cmp(&b))
    });
    let value = points[slice[mid] as usize].axis(axis);

    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build_node(points, order, start, start + mid, nodes);
    let right = build_node(points, order, start + mid, end, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

/// Mutable "remaining points" overlay on a [`SpatialIndex`].
#[derive(Debug, Clone)]
pub struct RemovalSet<'i, 'a> {
    index: &'i SpatialIndex<'a>,
    removed: Vec<bool>,
    alive: Vec<u32>,
    parent: Vec<u32>,
    leaf_of: Vec<u32>,
}

impl RemovalSet<'_, '_> {
    pub fn remaining(&self) -> usize {
        self.alive[0] as usize
    }

    pub fn contains(&self, i: usize) -> bool {
        !self.removed[i]
    }

    pub fn remove(&mut self, i: usize) {
        if std::mem::replace(&mut self.removed[i], true) {
            return;
        }
        let mut node = self.leaf_of[i];
        loop {
            self.alive[node as usize] -= 1;
            node = self.parent[node as usize];
            if node == u32::MAX {
                break;
            }
        }
    }

    /// Nearest remaining point.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        let mut best = (f64::INFINITY, usize::MAX);
        let removed = &self.removed;
        self.index
            .search_nearest(0, q, &|i| !removed[i], Some(&self.alive), &mut best);
        (best.1 != usize::MAX).then_some((best.1, best.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::uniform_box;
    use crate::geometry::{Aabb, Seed};
    use rand::Rng;

    fn scan_nearest(points: &[Point3], q: &Point3, skip: Option<usize>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let d = q.distance(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn scan_radius(points: &[Point3], q: &Point3, r: f64) -> Vec<(usize, f64)> {
        let mut v: Vec<_> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, q.distance(p)))
            .filter(|&(_, d)| d <= r)
            .collect();
        v.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        v
    }

    #[test]
    fn singleton() {
        let c = PointCloud::from_arrays(&[[0.5, 0.5, 0.5]]).unwrap();
        let idx = SpatialIndex::build(&c);
        for q in [Point3::ORIGIN, Point3::new(10.0, -3.0, 2.0)] {
            assert_eq!(idx.nearest(&q, None).unwrap().0, 0);
        }
        assert!(idx.nearest(&Point3::ORIGIN, Some(0)).is_err());
    }

    #[test]
    fn hand_cases() {
        let c = PointCloud::from_arrays(&[[0.0; 3], [3.0, 0.0, 0.0]]).unwrap();
        let idx = SpatialIndex::build(&c);
        assert_eq!(idx.nearest(&Point3::new(1.0, 0.0, 0.0), None).unwrap(), (0, 1.0));
        assert_eq!(idx.nearest(&Point3::new(3.0, 0.0, 0.0), None).unwrap(), (1, 0.0));
        // equidistant
        assert_eq!(idx.nearest(&Point3::new(1.5, 0.0, 0.0), None).unwrap().0, 0);
        assert_eq!(idx.nearest(&Point3::ORIGIN, Some(0)).unwrap(), (1, 3.0));
    }

    #[test]
    fn duplicates_tie_to_lowest_index() {
        let mut pts = vec![[0.25, 0.25, 0.25]; 20];
        pts.push([0.0; 3]);
        let c = PointCloud::from_arrays(&pts).unwrap();
        let idx = SpatialIndex::build(&c);
        let q = Point3::new(0.25, 0.25, 0.25);
        assert_eq!(idx.nearest(&q, None).unwrap(), (0, 0.0));
        assert_eq!(idx.nearest(&q, Some(0)).unwrap(), (1, 0.0));
        let hits = idx.within_radius(&q, 0.0).unwrap();
        assert_eq!(hits.iter().map(|h| h.0).collect::<Vec<_>>(), (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn radius_edge_cases() {
        let c = uniform_box(100, &Aabb::unit(), Seed(1)).unwrap();
        let idx = SpatialIndex::build(&c);
        assert_eq!(idx.within_radius(&c[7], 0.0).unwrap(), vec![(7, 0.0)]);
        assert_eq!(idx.within_radius(&Point3::ORIGIN, 10.0).unwrap().len(), 100);
        assert!(idx.within_radius(&Point3::ORIGIN, -1.0).is_err());
        assert!(idx.within_radius(&Point3::ORIGIN, f64::NAN).is_err());
    }

    #[test]
    fn matches_exhaustive_scan() {
        let mut rng = Seed(99).rng();
        for trial in 0..1000u64 {
            let n = rng.random_range(1..300);
            let mut c = uniform_box(n, &Aabb::unit(), Seed(trial)).unwrap().into_points();
            // snap some coordinates to a grid to provoke ties
            if trial % 3 == 0 {
                for p in &mut c {
                    *p = Point3::new((p.x * 4.0).round() / 4.0, (p.y * 4.0).round() / 4.0, p.z);
                }
            }
            let idx = SpatialIndex::from_points(&c).unwrap();
            let q = if trial % 2 == 0 {
                c[rng.random_range(0..n)]
            } else {
                Point3::new(rng.random_range(-0.2..1.2), rng.random(), rng.random())
            };
            assert_eq!(idx.nearest(&q, None).unwrap(), scan_nearest(&c, &q, None));
            if n > 1 {
                let skip = rng.random_range(0..n);
                assert_eq!(idx.nearest(&q, Some(skip)).unwrap(), scan_nearest(&c, &q, Some(skip)));
            }
            let r = rng.random_range(0.0..0.5);
            assert_eq!(idx.within_radius(&q, r).unwrap(), scan_radius(&c, &q, r));
        }
    }

    #[test]
    fn removal_set_matches_masked_scan() {
        let c = uniform_box(500, &Aabb::unit(), Seed(5)).unwrap();
        let idx = SpatialIndex::build(&c);
        let mut set = idx.removal_set();
        let mut removed = vec![false; 500];
        let mut rng = Seed(6).rng();
        while set.remaining() > 0 {
            let q = Point3::new(rng.random(), rng.random(), rng.random());
            let mut best = (usize::MAX, f64::INFINITY);
            for (i, p) in c.iter().enumerate() {
                let d = q.distance(p);
                if !removed[i] && d < best.1 {
                    best = (i, d);
                }
            }
            let got = set.nearest(&q).unwrap();
            assert_eq!(got, best);
            set.remove(got.0);
            removed[got.0] = true;
            assert!(!set.contains(got.0));
        }
        assert_eq!(set.nearest(&Point3::ORIGIN), None);
    }
}
