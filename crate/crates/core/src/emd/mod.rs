//! Earth Mover's Distance between equal-size clouds.
//!
//! [`emd_exact`] solves the assignment problem with the Hungarian method and
//! serves as the oracle. [`emd_auction`] is the approximation used for large
//! clouds: it keeps only per-point state and recomputes distances on demand.

mod auction;
mod hungarian;

pub use auction::{emd_auction, AuctionConfig, Epsilon};
pub use hungarian::{emd_exact, EXACT_CAPACITY};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, PointCloud};

/// A bijection from the points of one cloud onto another.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `mapping[i]` is the index in the second cloud matched to point `i`.
    pub mapping: Vec<usize>,
    /// Mean Euclidean length of the matched pairs.
    pub mean_cost: f64,
    /// False when an iteration cap cut the auction short and the rest was
    /// matched greedily.
    pub converged: bool,
}

impl Assignment {
    pub(crate) fn new(s1: &PointCloud, s2: &PointCloud, mapping: Vec<usize>, converged: bool) -> Self {
        let mean_cost = mean_cost(s1, s2, &mapping);
        Assignment {
            mapping,
            mean_cost,
            converged,
        }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn is_bijection(&self) -> bool {
        is_permutation(&self.mapping)
    }
}

/// Mean matched distance of `mapping`, summed in person order.
pub fn mean_cost(s1: &PointCloud, s2: &PointCloud, mapping: &[usize]) -> f64 {
    let total: f64 = mapping
        .iter()
        .enumerate()
        .map(|(i, &j)| s1[i].distance(&s2[j]))
        .sum();
    total / mapping.len() as f64
}

pub fn is_permutation(mapping: &[usize]) -> bool {
    let mut seen = vec![false; mapping.len()];
    mapping.iter().all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
}

fn check_sizes(s1: &PointCloud, s2: &PointCloud) -> Result<usize> {
    if s1.len() != s2.len() {
        return Err(Error::invalid(format!(
            "EMD needs clouds of equal size, got {} and {}",
            s1.len(),
            s2.len()
        )));
    }
    Ok(s1.len())
}

/// Diagonal of the box enclosing both clouds.
pub fn joint_diagonal(s1: &PointCloud, s2: &PointCloud) -> f64 {
    let mut b: Aabb = s1.bounds();
    for p in s2 {
        b.include(p);
    }
    b.diagonal()
}
