//! Brute-force reference implementations shared by the integration tests.
//! None of these call into the code paths they are used to check.
#![allow(dead_code)]

use pointloss::{Aabb, Point3, PointCloud, Seed};
use rand::Rng;

pub fn random_cloud(n: usize, seed: Seed) -> PointCloud {
    let mut rng = seed.rng();
    let pts = (0..n)
        .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
        .collect();
    PointCloud::new(pts).unwrap()
}

pub fn unit_box() -> Aabb {
    Aabb::unit()
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k - 1 {
            heap(k - 1, a, out);
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
        heap(k - 1, a, out);
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Minimum mean matched distance over every bijection.
pub fn brute_force_emd(a: &[Point3], b: &[Point3]) -> f64 {
    assert_eq!(a.len(), b.len());
    permutations(a.len())
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| a[i].distance(&b[j]))
                .sum::<f64>()
                / a.len() as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// Chamfer distance by double loop.
pub fn double_loop_chamfer(a: &[Point3], b: &[Point3]) -> f64 {
    let dir = |x: &[Point3], y: &[Point3]| {
        x.iter()
            .map(|p| y.iter().map(|q| p.distance(q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / x.len() as f64
    };
    0.5 * (dir(a, b) + dir(b, a))
}

/// Kruskal over all n(n-1)/2 edges with a union-find; returns total weight.
pub fn kruskal_weight(points: &[Point3]) -> f64 {
    let n = points.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((points[i].distance(&points[j]), i, j));
        }
    }
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut total = 0.0;
    let mut used = 0;
    for (w, i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            total += w;
            used += 1;
            if used == n - 1 {
                break;
            }
        }
    }
    total
}

/// Total weight of every spanning tree of a tiny graph, by enumerating edge
/// subsets of size n-1 that connect all vertices.
pub fn all_spanning_tree_weights(points: &[Point3]) -> Vec<f64> {
    let n = points.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, points[i].distance(&points[j])));
        }
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << edges.len()) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        let mut ok = true;
        let mut w = 0.0;
        for (k, &(i, j, d)) in edges.iter().enumerate() {
            if mask & (1 << k) == 0 {
                continue;
            }
            let (mut a, mut b) = (i, j);
            while parent[a] != a {
                a = parent[a];
            }
            while parent[b] != b {
                b = parent[b];
            }
            if a == b {
                ok = false;
                break;
            }
            parent[a] = b;
            w += d;
        }
        if ok {
            out.push(w);
        }
    }
    out
}

/// Greedy MDS recomputing every candidate's density from scratch, in
/// selection order, at every step.
pub fn exhaustive_mds(points: &[Point3], m: usize, sigma: f64, first: usize) -> Vec<usize> {
    let two_sigma_sq = 2.0 * sigma * sigma;
    let mut chosen = vec![first];
    while chosen.len() < m {
        let mut best: Option<(f64, usize)> = None;
        for (x, p) in points.iter().enumerate() {
            if chosen.contains(&x) {
                continue;
            }
            let mut d = 0.0;
            for &c in &chosen {
                d += (-p.distance_squared(&points[c]) / two_sigma_sq).exp();
            }
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, x));
            }
        }
        chosen.push(best.unwrap().1);
    }
    chosen
}

/// Coefficient of variation of a slice (population standard deviation).
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Least-squares line `y = a + b x` and its R².
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (a, b, 1.0 - ss_res / ss_tot)
}
