//! Median of `l` independent [`SoftmaxIndex`] copies.
//!
//! All noise is frozen at build time, so the response `y -> query(y)` is a
//! fixed function and an adaptive analyst learns nothing beyond what the
//! build released. The copies, each built with `(ε/l, δ/l, δ'/l)`, make the
//! median accurate uniformly over a net of queries with probability
//! `1 - p_f` when
//!
//! ```text
//! l = max(1, ceil(r ln(d R / (ε_s p_f))))
//! ```

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::check_values;
use crate::softmax::{DistanceBackend, FeatureTable, SoftmaxIndex, SoftmaxParams};
use crate::{math, median, Matrix, NoiseRng};

/// Smallest per-copy `ε` accepted.
pub const MIN_COPY_EPSILON: f64 = 1e-6;

/// `max(1, ceil(r ln(d R / (ε_s p_f))))`.
pub fn copy_count(features: usize, dim: usize, radius: f64, epsilon_s: f64, failure_prob: f64) -> usize {
    let l = math::ceil(features as f64 * math::ln(dim as f64 * radius / (epsilon_s * failure_prob)));
    if l >= 1.0 {
        l as usize
    } else {
        1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveParams {
    /// Total budget and accuracy; each copy gets a `1/l` share of the budget.
    pub softmax: SoftmaxParams,
    /// Failure probability `p_f` in `(0, 0.01]`.
    pub failure_prob: f64,
    /// Fixed copy count instead of the formula.
    pub copies: Option<usize>,
}

impl AdaptiveParams {
    pub fn new(softmax: SoftmaxParams, failure_prob: f64) -> Self {
        Self {
            softmax,
            failure_prob,
            copies: None,
        }
    }
}

/// Inputs that determined the copy count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CopyProvenance {
    pub features: usize,
    pub dim: usize,
    pub radius: f64,
    pub epsilon_s: f64,
    pub failure_prob: f64,
    pub overridden: bool,
}

#[derive(Clone, Debug)]
pub struct AdaptiveIndex {
    copies: Vec<SoftmaxIndex>,
    copy_params: SoftmaxParams,
    provenance: CopyProvenance,
}

impl AdaptiveIndex {
    pub fn build(
        points: &Matrix,
        weights: &[f64],
        params: &AdaptiveParams,
        rng: &mut NoiseRng,
    ) -> Result<Self> {
        params.softmax.validate()?;
        if !(params.failure_prob > 0.0 && params.failure_prob <= 0.01) {
            return Err(Error::InvalidParameter {
                name: "p_f",
                value: params.failure_prob,
                reason: "must lie in (0, 0.01]",
            });
        }
        if points.rows() == 0 {
            return Err(Error::Empty { what: "points" });
        }
        check_values("points", points.as_slice(), 0.0, params.softmax.radius)?;
        let table = FeatureTable::new(params.softmax.kernel(points.cols())?, points)?;
        let kernel = table.kernel();
        let provenance = CopyProvenance {
            features: kernel.features(),
            dim: kernel.dim(),
            radius: kernel.radius(),
            epsilon_s: kernel.epsilon_s(),
            failure_prob: params.failure_prob,
            overridden: params.copies.is_some(),
        };
        let l = match params.copies {
            Some(0) => {
                return Err(Error::InvalidParameter {
                    name: "l_override",
                    value: 0.0,
                    reason: "must be at least 1",
                })
            }
            Some(l) => l,
            None => copy_count(
                provenance.features,
                provenance.dim,
                provenance.radius,
                provenance.epsilon_s,
                params.failure_prob,
            ),
        };
        let copy_params = Self::copy_params(&params.softmax, l)?;
        let copies = (0..l)
            .map(|_| SoftmaxIndex::from_table(table.clone(), weights, &copy_params, &mut rng.fork()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            copies,
            copy_params,
            provenance,
        })
    }

    /// Budget of one copy: `(ε/l, δ/l, δ'/l)`.
    pub fn copy_params(total: &SoftmaxParams, copies: usize) -> Result<SoftmaxParams> {
        let l = copies as f64;
        let eps = total.epsilon / l;
        if eps < MIN_COPY_EPSILON {
            return Err(Error::Infeasible("per-copy epsilon underflows the 1e-6 floor"));
        }
        let p = SoftmaxParams {
            epsilon: eps,
            delta: total.delta / l,
            delta_prime: total.delta_prime / l,
            ..*total
        };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.copies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.copies.is_empty()
    }

    pub fn copies(&self) -> &[SoftmaxIndex] {
        &self.copies
    }

    pub fn copy_budget(&self) -> &SoftmaxParams {
        &self.copy_params
    }

    pub fn provenance(&self) -> &CopyProvenance {
        &self.provenance
    }

    /// Each copy's answer, in build order.
    pub fn copy_responses(&self, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
        self.copy_responses_with(y, alpha, DistanceBackend::Noisy)
    }

    pub fn copy_responses_with(&self, y: &[f64], alpha: f64, backend: DistanceBackend) -> Result<Vec<f64>> {
        self.copies.iter().map(|c| c.query_with(y, alpha, backend)).collect()
    }

    /// Median of the copy answers (mean of the middle two for even `l`).
    pub fn query(&self, y: &[f64], alpha: f64) -> Result<f64> {
        self.query_with(y, alpha, DistanceBackend::Noisy)
    }

    pub fn query_with(&self, y: &[f64], alpha: f64, backend: DistanceBackend) -> Result<f64> {
        let responses = self.copy_responses_with(y, alpha, backend)?;
        median(&responses).ok_or(Error::Empty { what: "copies" })
    }

    /// Largest per-copy noise bound. Every copy lies within its bound of the
    /// common noise-free value, so the median does too.
    pub fn noise_bound(&self, y: &[f64], alpha: f64) -> Result<f64> {
        let mut bound = 0.0f64;
        for c in &self.copies {
            bound = bound.max(c.noise_bound(y, alpha)?);
        }
        Ok(bound)
    }
}
