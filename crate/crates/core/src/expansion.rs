//! Expansion penalty for surface elements.
//!
//! Each element's points get a Euclidean minimum spanning tree. The tree is
//! rooted at the middle vertex of its diameter (the path with the most
//! vertices) and every edge is directed toward the root. Edges at least
//! `lambda` times the element's mean edge length are penalized, and only the
//! tail of a penalized edge receives gradient, pulling it toward the head.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// K surface elements of N points each, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementBatch {
    points: Vec<Point3>,
    k: usize,
    n: usize,
}

impl ElementBatch {
    pub const DEFAULT_ELEMENTS: usize = 16;
    pub const DEFAULT_POINTS_PER_ELEMENT: usize = 512;

    pub fn new(elements: Vec<Vec<Point3>>) -> Result<Self> {
        let k = elements.len();
        let n = elements.first().map_or(0, Vec::len);
        if elements.iter().any(|e| e.len() != n) {
            return Err(Error::invalid("all elements must have the same number of points"));
        }
        Self::from_flat(elements.into_iter().flatten().collect(), k, n)
    }

    /// Splits a cloud into `k` consecutive blocks of `n` points.
    pub fn from_cloud(cloud: &PointCloud, k: usize, n: usize) -> Result<Self> {
        Self::from_flat(cloud.points().to_vec(), k, n)
    }

    fn from_flat(points: Vec<Point3>, k: usize, n: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("need at least one element"));
        }
        if n < 2 {
            return Err(Error::invalid("each element needs at least two points"));
        }
        if k.checked_mul(n) != Some(points.len()) {
            return Err(Error::invalid(format!(
                "{} points cannot be split into {k} elements of {n}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("element points must be finite"));
        }
        Ok(ElementBatch { points, k, n })
    }

    pub fn elements(&self) -> usize {
        self.k
    }

    pub fn points_per_element(&self) -> usize {
        self.n
    }

    pub fn element(&self, i: usize) -> &[Point3] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionConfig {
    /// Edges with length `>= lambda * mean edge length` are penalized.
    pub lambda: f64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { lambda: 1.5 }
    }
}

/// Undirected edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Minimum spanning tree before rooting.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimumSpanningTree {
    pub vertices: usize,
    pub edges: Vec<Edge>,
}

impl MinimumSpanningTree {
    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }
}

/// Edge pointing from `tail` toward the root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectedEdge {
    pub tail: usize,
    pub head: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    pub edges: Vec<DirectedEdge>,
    pub root: usize,
    pub mean_edge_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyResult {
    pub value: f64,
    /// `gradients[i][j]` belongs to point `j` of element `i`.
    pub gradients: Vec<Vec<[f64; 3]>>,
    pub active_edges: Vec<Vec<DirectedEdge>>,
    pub trees: Vec<SpanningTree>,
}

impl PenaltyResult {
    /// Gradients in the flat point order of the batch.
    pub fn flat_gradients(&self) -> impl Iterator<Item = &[f64; 3]> {
        self.gradients.iter().flatten()
    }
}

/// Prim's algorithm on the complete Euclidean graph, O(n^2) time and O(n)
/// memory. Edges compare by `(length, lower endpoint, higher endpoint)`,
/// which makes the tree unique.
pub fn build_mst(points: &[Point3]) -> Result<MinimumSpanningTree> {
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid("a spanning tree needs at least two points"));
    }
    let key = |len: f64, u: usize, v: usize| (len, u.min(v), u.max(v));
    let less = |x: (f64, usize, usize), y: (f64, usize, usize)| {
        x.0 < y.0 || (x.0 == y.0 && (x.1, x.2) < (y.1, y.2))
    };

    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, usize::MAX, usize::MAX); n];
    let mut edges = Vec::with_capacity(n - 1);
    in_tree[0] = true;
    let mut last = 0;
    for _ in 1..n {
        let mut pick = usize::MAX;
        for w in 0..n {
            if in_tree[w] {
                continue;
            }
            let cand = key(points[last].distance(&points[w]), last, w);
            if less(cand, best[w]) {
                best[w] = cand;
            }
            if pick == usize::MAX || less(best[w], best[pick]) {
                pick = w;
            }
        }
        let (length, a, b) = best[pick];
        edges.push(Edge { a, b, length });
        in_tree[pick] = true;
        last = pick;
    }
    Ok(MinimumSpanningTree { vertices: n, edges })
}

/// Roots the tree at the middle of its diameter and points every edge at
/// the root.
///
/// The diameter comes from two breadth-first searches (from vertex 0, then
/// from the farthest vertex found), taking the lowest index among equally
/// far vertices. Measured from the lower-indexed endpoint, the root sits
/// `floor(hops / 2)` steps along the path, so of two middle vertices the one
/// nearer that endpoint wins.
pub fn root_and_direct(tree: &MinimumSpanningTree) -> Result<SpanningTree> {
    let n = tree.vertices;
    if n < 2 || tree.edges.len() != n - 1 {
        return Err(Error::invalid("not a spanning tree"));
    }
    let adjacency = Adjacency::new(tree)?;

    let (_, from_zero) = adjacency.bfs(0);
    let a = farthest(&from_zero);
    let (parent_a, from_a) = adjacency.bfs(a);
    if from_a.contains(&usize::MAX) {
        return Err(Error::invalid("edges do not connect all vertices"));
    }
    let b = farthest(&from_a);

    // path from b back to a
    let mut path = vec![b];
    while *path.last().expect("non-empty") != a {
        path.push(parent_a[*path.last().expect("non-empty")]);
    }
    if a < b {
        path.reverse();
    }
    let root = path[(path.len() - 1) / 2];

    let (parent, _) = adjacency.bfs(root);
    let edges: Vec<DirectedEdge> = tree
        .edges
        .iter()
        .map(|e| {
            let (tail, head) = if parent[e.a] == e.b { (e.a, e.b) } else { (e.b, e.a) };
            DirectedEdge {
                tail,
                head,
                length: e.length,
            }
        })
        .collect();
    let mean_edge_length = tree.total_length() / (n - 1) as f64;
    Ok(SpanningTree {
        edges,
        root,
        mean_edge_length,
    })
}

fn farthest(hops: &[usize]) -> usize {
    let mut best = 0;
    for (v, &h) in hops.iter().enumerate() {
        if h != usize::MAX && h > hops[best] {
            best = v;
        }
    }
    best
}

struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Adjacency {
    fn new(tree: &MinimumSpanningTree) -> Result<Self> {
        let n = tree.vertices;
        let mut degree = vec![0usize; n + 1];
        for e in &tree.edges {
            if e.a >= n || e.b >= n || e.a == e.b {
                return Err(Error::invalid("edge endpoint out of range"));
            }
            degree[e.a + 1] += 1;
            degree[e.b + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut targets = vec![0; 2 * tree.edges.len()];
        for e in &tree.edges {
            targets[fill[e.a]] = e.b;
            fill[e.a] += 1;
            targets[fill[e.b]] = e.a;
            fill[e.b] += 1;
        }
        Ok(Adjacency { offsets, targets })
    }

    /// Parent pointers and hop counts from `start`.
    fn bfs(&self, start: usize) -> (Vec<usize>, Vec<usize>) {
        let n = self.offsets.len() - 1;
        let mut parent = vec![usize::MAX; n];
        let mut hops = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        hops[start] = 0;
        parent[start] = start;
        while let Some(v) = queue.pop_front() {
            for &w in &self.targets[self.offsets[v]..self.offsets[v + 1]] {
                if hops[w] == usize::MAX {
                    hops[w] = hops[v] + 1;
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
        (parent, hops)
    }
}

/// Penalty value and its subgradient.
///
/// The tree, the filter and the mean edge length are treated as constants
/// of the current point positions.
pub fn expansion_penalty(batch: &ElementBatch, cfg: &ExpansionConfig) -> Result<PenaltyResult> {
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {}", cfg.lambda)));
    }
    let scale = (batch.k * batch.n) as f64;
    let per_element: Vec<Result<ElementPenalty>> = (0..batch.k)
        .into_par_iter()
        .map(|i| element_penalty(batch.element(i), cfg.lambda, scale))
        .collect();

    let mut total = 0.0;
    let mut result = PenaltyResult {
        value: 0.0,
        gradients: Vec::with_capacity(batch.k),
        active_edges: Vec::with_capacity(batch.k),
        trees: Vec::with_capacity(batch.k),
    };
    for e in per_element {
        let e = e?;
        total += e.active_sum;
        result.gradients.push(e.gradients);
        result.active_edges.push(e.active);
        result.trees.push(e.tree);
    }
    result.value = total / scale;
    Ok(result)
}

struct ElementPenalty {
    tree: SpanningTree,
    active: Vec<DirectedEdge>,
    active_sum: f64,
    gradients: Vec<[f64; 3]>,
}

fn element_penalty(points: &[Point3], lambda: f64, scale: f64) -> Result<ElementPenalty> {
    let tree = root_and_direct(&build_mst(points)?)?;
    let threshold = lambda * tree.mean_edge_length;
    let active: Vec<DirectedEdge> = tree
        .edges
        .iter()
        .copied()
        .filter(|e| e.length >= threshold)
        .collect();
    let active_sum = active.iter().map(|e| e.length).sum();

    let mut gradients = vec![[0.0; 3]; points.len()];
    for e in &active {
        // a zero-length edge has no direction
        if e.length > 0.0 {
            let dir = (points[e.tail] - points[e.head]) * (1.0 / (e.length * scale));
            let g = &mut gradients[e.tail];
            g[0] += dir.x;
            g[1] += dir.y;
            g[2] += dir.z;
        }
    }
    Ok(ElementPenalty {
        tree,
        active,
        active_sum,
        gradients,
    })
}
