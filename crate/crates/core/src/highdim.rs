//! Weighted distance queries in `d` dimensions, one [`DistanceIndex`] per
//! coordinate.
//!
//! Both `l1` and squared `l2` decompose over coordinates, so the answer is
//! the sum of `d` one-dimensional answers. Each coordinate structure gets
//! `(c ε / sqrt(d ln(1/δ')), δ/d)`, which by advanced composition makes the
//! whole index `(ε, δ + δ')`-DP for small `ε`.

use alloc::vec::Vec;

use crate::distance::{DistanceIndex, DistanceMode, DistanceParams};
use crate::error::{Error, Result};
use crate::matrix::{check_open, check_positive};
use crate::{math, Matrix, Noise, NoiseRng};

/// Default advanced-composition split constant `c`.
pub const DEFAULT_SPLIT: f64 = 0.05;

/// Per-structure `ε` when `count` structures share a budget through advanced
/// composition: `c ε / sqrt(count ln(1/δ'))`.
pub fn composition_epsilon(epsilon: f64, count: usize, delta_prime: f64, split: f64) -> f64 {
    split * epsilon / math::sqrt(count as f64 * math::ln(1.0 / delta_prime))
}

/// Checks the shared preconditions of the advanced-composition budget:
/// `ε > 0`, `δ, δ' ∈ (0, 1)`, `c ∈ (0, 0.1)` and `ε <= ln(1/δ')`.
pub fn check_composition(epsilon: f64, delta: f64, delta_prime: f64, split: f64) -> Result<()> {
    check_positive("epsilon", epsilon)?;
    check_open("delta", delta, 0.0, 1.0)?;
    check_open("delta_prime", delta_prime, 0.0, 1.0)?;
    check_open("c_split", split, 0.0, 0.1)?;
    if epsilon > math::ln(1.0 / delta_prime) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must not exceed ln(1/delta_prime) for the composition constant to hold",
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HighDimParams {
    pub radius: f64,
    pub weight_bound: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_prime: f64,
    /// Split constant `c ∈ (0, 0.1)`.
    pub split: f64,
    pub mode: DistanceMode,
    pub grid: Option<usize>,
    pub noise: Noise,
}

impl HighDimParams {
    pub fn new(
        radius: f64,
        weight_bound: f64,
        epsilon: f64,
        delta: f64,
        delta_prime: f64,
        mode: DistanceMode,
    ) -> Self {
        Self {
            radius,
            weight_bound,
            epsilon,
            delta,
            delta_prime,
            split: DEFAULT_SPLIT,
            mode,
            grid: None,
            noise: Noise::Enabled,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HighDimIndex {
    coords: Vec<DistanceIndex>,
    coord_epsilon: f64,
    coord_delta: f64,
}

impl HighDimIndex {
    /// Builds one coordinate index per column of `points` (`n x d`).
    pub fn build(
        points: &Matrix,
        weights: &[f64],
        params: &HighDimParams,
        rng: &mut NoiseRng,
    ) -> Result<Self> {
        check_composition(params.epsilon, params.delta, params.delta_prime, params.split)?;
        let dim = points.cols();
        if dim == 0 || points.rows() == 0 {
            return Err(Error::Empty { what: "points" });
        }
        let coord_epsilon = composition_epsilon(params.epsilon, dim, params.delta_prime, params.split);
        let coord_delta = params.delta / dim as f64;
        let coord_params = DistanceParams {
            radius: params.radius,
            weight_bound: params.weight_bound,
            epsilon: coord_epsilon,
            delta: coord_delta,
            mode: params.mode,
            grid: params.grid,
            noise: params.noise,
        };
        let coords = (0..dim)
            .map(|j| DistanceIndex::build(&points.column(j), weights, &coord_params, &mut rng.fork()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            coords,
            coord_epsilon,
            coord_delta,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[DistanceIndex] {
        &self.coords
    }

    /// `(ε, δ)` given to each coordinate structure.
    pub fn coord_budget(&self) -> (f64, f64) {
        (self.coord_epsilon, self.coord_delta)
    }

    fn check_query(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::LengthMismatch {
                what: "query",
                expected: self.dim(),
                actual: y.len(),
            });
        }
        Ok(())
    }

    /// Sum of the per-coordinate noisy answers.
    pub fn distance_query(&self, y: &[f64], alpha: f64) -> Result<f64> {
        self.check_query(y)?;
        self.coords
            .iter()
            .zip(y)
            .map(|(c, &yi)| c.distance_query(yi, alpha))
            .sum()
    }

    pub fn bucketed_distance(&self, y: &[f64], alpha: f64) -> Result<f64> {
        self.check_query(y)?;
        self.coords
            .iter()
            .zip(y)
            .map(|(c, &yi)| c.bucketed_distance(yi, alpha))
            .sum()
    }

    pub fn noise_bound(&self, y: &[f64], alpha: f64) -> Result<f64> {
        self.check_query(y)?;
        self.coords
            .iter()
            .zip(y)
            .map(|(c, &yi)| c.noise_bound(yi, alpha))
            .sum()
    }

    pub fn noise_variance(&self, y: &[f64], alpha: f64) -> Result<f64> {
        self.check_query(y)?;
        self.coords
            .iter()
            .zip(y)
            .map(|(c, &yi)| c.noise_variance(yi, alpha))
            .sum()
    }
}
