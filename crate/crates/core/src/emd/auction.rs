//! Auction approximation of the assignment problem.
//!
//! Persons are the points of the first cloud, objects the points of the
//! second, and the benefit of a pair is the negated distance. Each round,
//! every unassigned person bids against a snapshot of the prices (Jacobi
//! bidding); an object goes to its highest bidder, ties to the lowest person
//! index. Rounds repeat until everyone holds an object. With ε-scaling the
//! auction is re-run at a shrinking sequence of ε, keeping prices between
//! runs.
//!
//! All state is a handful of length-n vectors; the cost matrix is never
//! stored.

use rayon::prelude::*;

use super::{check_sizes, joint_diagonal, Assignment};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::spatial::SpatialIndex;

const NONE: usize = usize::MAX;

/// Final ε of the auction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Absolute(f64),
    /// Multiple of the diagonal of the box enclosing both clouds.
    RelativeToDiagonal(f64),
}

impl Epsilon {
    pub fn resolve(self, diagonal: f64) -> f64 {
        match self {
            Epsilon::Absolute(e) => e,
            Epsilon::RelativeToDiagonal(f) => f * diagonal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionConfig {
    pub epsilon: Epsilon,
    pub epsilon_scaling: bool,
    /// Ratio between consecutive ε values when scaling.
    pub scaling_factor: f64,
    /// Cap on the total number of bids over all phases; `None` means 50 per
    /// point. Persons still unassigned at the cap are matched greedily.
    pub max_iterations: Option<usize>,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        AuctionConfig {
            epsilon: Epsilon::RelativeToDiagonal(1e-3),
            epsilon_scaling: true,
            scaling_factor: 0.25,
            max_iterations: None,
        }
    }
}

impl AuctionConfig {
    /// Starting ε as a fraction of the joint bounding-box diagonal.
    pub const INITIAL_EPSILON_FRACTION: f64 = 0.25;
    pub const DEFAULT_BIDS_PER_POINT: usize = 50;

    pub fn with_epsilon(mut self, epsilon: Epsilon) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iterations(mut self, max: usize) -> Self {
        self.max_iterations = Some(max);
        self
    }

    pub fn without_scaling(mut self) -> Self {
        self.epsilon_scaling = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let raw = match self.epsilon {
            Epsilon::Absolute(e) | Epsilon::RelativeToDiagonal(e) => e,
        };
        if !(raw > 0.0 && raw.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {raw}")));
        }
        if !(self.scaling_factor > 0.0 && self.scaling_factor < 1.0) {
            return Err(Error::invalid(format!(
                "scaling factor must lie in (0, 1), got {}",
                self.scaling_factor
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }

    /// The ε values of successive phases, ending with the final ε.
    pub fn schedule(&self, diagonal: f64) -> Vec<f64> {
        let last = self.epsilon.resolve(diagonal);
        let mut eps = Vec::new();
        if self.epsilon_scaling {
            let mut e = Self::INITIAL_EPSILON_FRACTION * diagonal;
            while e > last {
                eps.push(e);
                e *= self.scaling_factor;
            }
        }
        eps.push(last);
        eps
    }
}

/// Approximate EMD by auction. If every person wins an object within the bid
/// budget, the mean cost is within the final ε of the optimum.
pub fn emd_auction(s1: &PointCloud, s2: &PointCloud, cfg: &AuctionConfig) -> Result<Assignment> {
    let n = check_sizes(s1, s2)?;
    cfg.validate()?;
    let diagonal = joint_diagonal(s1, s2);
    if diagonal == 0.0 {
        // every pair is at distance zero
        return Ok(Assignment::new(s1, s2, (0..n).collect(), true));
    }
    let budget = cfg
        .max_iterations
        .unwrap_or(AuctionConfig::DEFAULT_BIDS_PER_POINT.saturating_mul(n));

    let mut state = Auction::new(s1.points(), s2.points());
    let mut converged = true;
    let mut bids_left = budget;
    for eps in cfg.schedule(diagonal) {
        if !state.run_phase(eps, &mut bids_left) {
            converged = false;
            break;
        }
    }
    if !converged {
        state.assign_rest_greedily();
    }
    Ok(Assignment::new(s1, s2, state.person_object, converged))
}

struct Auction<'a> {
    persons: &'a [Point3],
    objects: &'a [Point3],
    prices: Vec<f64>,
    person_object: Vec<usize>,
    object_person: Vec<usize>,
    // per-object best bid of the current round
    round_price: Vec<f64>,
    round_person: Vec<usize>,
}

impl<'a> Auction<'a> {
    fn new(persons: &'a [Point3], objects: &'a [Point3]) -> Self {
        let n = persons.len();
        Auction {
            persons,
            objects,
            prices: vec![0.0; n],
            person_object: vec![NONE; n],
            object_person: vec![NONE; n],
            round_price: vec![f64::NEG_INFINITY; n],
            round_person: vec![NONE; n],
        }
    }

    /// Runs one ε phase from an empty assignment. Returns false if the bid
    /// budget ran out first.
    fn run_phase(&mut self, eps: f64, bids_left: &mut usize) -> bool {
        let n = self.persons.len();
        self.person_object.fill(NONE);
        self.object_person.fill(NONE);
        let mut unassigned: Vec<usize> = (0..n).collect();
        let mut touched: Vec<usize> = Vec::new();

        while !unassigned.is_empty() {
            if *bids_left == 0 {
                return false;
            }
            let take = unassigned.len().min(*bids_left);
            *bids_left -= take;
            let bidders = &unassigned[..take];

            let bids: Vec<(usize, f64)> = bidders
                .par_iter()
                .map(|&i| self.bid(i, eps))
                .collect();

            touched.clear();
            for (&person, &(object, price)) in bidders.iter().zip(&bids) {
                let best = self.round_price[object];
                if best == f64::NEG_INFINITY {
                    touched.push(object);
                }
                // bidders are ascending, so a strict test keeps the lowest index on ties
                if price > best {
                    self.round_price[object] = price;
                    self.round_person[object] = person;
                }
            }

            let mut next: Vec<usize> = unassigned[take..].to_vec();
            for &object in &touched {
                let winner = self.round_person[object];
                let previous = self.object_person[object];
                if previous != NONE {
                    self.person_object[previous] = NONE;
                    next.push(previous);
                }
                self.prices[object] = self.round_price[object];
                self.object_person[object] = winner;
                self.person_object[winner] = object;
                self.round_price[object] = f64::NEG_INFINITY;
                self.round_person[object] = NONE;
            }
            for &person in bidders {
                if self.person_object[person] == NONE {
                    next.push(person);
                }
            }
            next.sort_unstable();
            unassigned = next;
        }
        true
    }

    /// Best object for `person` and the price it offers.
    fn bid(&self, person: usize, eps: f64) -> (usize, f64) {
        let p = &self.persons[person];
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        let mut best_object = 0;
        for (j, (q, &price)) in self.objects.iter().zip(&self.prices).enumerate() {
            let value = -p.distance(q) - price;
            if value > best {
                second = best;
                best = value;
                best_object = j;
            } else if value > second {
                second = value;
            }
        }
        let increment = if second == f64::NEG_INFINITY {
            eps
        } else {
            best - second + eps
        };
        (best_object, self.prices[best_object] + increment)
    }

    /// Unassigned persons, in ascending order, take their nearest free object.
    fn assign_rest_greedily(&mut self) {
        let index = SpatialIndex::from_points(self.objects).expect("validated cloud");
        let mut free = index.removal_set();
        for (object, &owner) in self.object_person.iter().enumerate() {
            if owner != NONE {
                free.remove(object);
            }
        }
        for person in 0..self.persons.len() {
            if self.person_object[person] != NONE {
                continue;
            }
            let (object, _) = free
                .nearest(&self.persons[person])
                .expect("as many free objects as unassigned persons");
            free.remove(object);
            self.person_object[person] = object;
            self.object_person[object] = person;
        }
    }
}
