//! Exact minimum-cost assignment (shortest augmenting paths with potentials).

use super::{check_sizes, Assignment};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Largest `n` accepted by [`emd_exact`]; the solver keeps an `n x n` cost
/// matrix.
pub const EXACT_CAPACITY: usize = 2048;

/// Optimal bijection under Euclidean cost.
pub fn emd_exact(s1: &PointCloud, s2: &PointCloud) -> Result<Assignment> {
    let n = check_sizes(s1, s2)?;
    if n > EXACT_CAPACITY {
        return Err(Error::Capacity {
            n,
            cap: EXACT_CAPACITY,
        });
    }
    let cost: Vec<f64> = s1
        .iter()
        .flat_map(|a| s2.iter().map(move |b| a.distance(b)))
        .collect();
    let mapping = solve(n, |i, j| cost[i * n + j]);
    Ok(Assignment::new(s1, s2, mapping, true))
}

/// Row-to-column optimum for an `n x n` cost function, O(n^3).
fn solve(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based arrays; column 0 is the virtual start of each augmenting path.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut mapping = vec![0; n];
    for j in 1..=n {
        mapping[row_of[j] - 1] = j - 1;
    }
    mapping
}
