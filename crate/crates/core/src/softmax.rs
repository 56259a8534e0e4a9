//! Weighted softmax queries `w^T exp(X y / d)`.
//!
//! With the kernel features `P`, polarization gives
//!
//! ```text
//! sum_i w_i <P(x_i), P(y)>
//!     = 1/2 (P_wx + s_w ||P(y)||^2 - sum_j sum_i w_i (P(x_i)_j - P(y)_j)^2)
//! ```
//!
//! where `P_wx = sum_i w_i ||P(x_i)||^2` and `s_w = sum_i w_i`. The double
//! sum is answered by `r` squared-`l2` [`DistanceIndex`] structures, one per
//! feature coordinate `j` over `[0, G_j]` with `G_j` the largest value the
//! coordinate takes on `[0, R]^d`.
//!
//! By default `P_wx` and `s_w` are kept exact, and only the trees are noisy.
//! Both scalars depend on the private weights. [`ScalarRelease::Noisy`] adds
//! truncated Laplace noise to them as well, spending half the budget on the
//! trees and a quarter on each scalar.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::distance::{DistanceIndex, DistanceMode, DistanceParams};
use crate::error::{Error, Result};
use crate::highdim::{check_composition, composition_epsilon, DEFAULT_SPLIT};
use crate::kernel::{KernelParams, DEFAULT_FEATURE_CAP};
use crate::matrix::{check_positive, check_values};
use crate::noise::NoiseSpec;
use crate::{Matrix, Noise, NoiseRng};

/// How `P_wx` and `s_w` are released.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ScalarRelease {
    #[default]
    Exact,
    Noisy,
}

/// Which distance sum a query plugs into the polarization identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistanceBackend {
    /// The private answer: noisy shell sums, released scalars.
    Noisy,
    /// Shell sums over the exact histograms, exact scalars.
    Bucketed,
    /// Exact distances between rounded features, exact scalars.
    ExactRounded,
    /// Exact distances between unrounded features, exact scalars.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftmaxParams {
    pub radius: f64,
    pub weight_bound: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub split: f64,
    pub epsilon_s: f64,
    pub scalars: ScalarRelease,
    pub feature_cap: usize,
    pub noise: Noise,
}

impl SoftmaxParams {
    pub fn new(
        radius: f64,
        weight_bound: f64,
        epsilon: f64,
        delta: f64,
        delta_prime: f64,
        epsilon_s: f64,
    ) -> Self {
        Self {
            radius,
            weight_bound,
            epsilon,
            delta,
            delta_prime,
            split: DEFAULT_SPLIT,
            epsilon_s,
            scalars: ScalarRelease::Exact,
            feature_cap: DEFAULT_FEATURE_CAP,
            noise: Noise::Enabled,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        check_positive("radius", self.radius)?;
        check_positive("weight_bound", self.weight_bound)?;
        check_composition(self.epsilon, self.delta, self.delta_prime, self.split)
    }

    pub fn kernel(&self, dim: usize) -> Result<KernelParams> {
        KernelParams::select_with_cap(dim, self.radius, self.epsilon_s, self.feature_cap)
    }
}

/// Kernel features of a point set, shareable between index copies.
#[derive(Clone, Debug)]
pub struct FeatureTable {
    kernel: KernelParams,
    features: Arc<Matrix>,
    /// Feature columns, one per coordinate index.
    columns: Arc<Vec<Vec<f64>>>,
}

impl FeatureTable {
    pub fn new(kernel: KernelParams, points: &Matrix) -> Result<Self> {
        if points.cols() != kernel.dim() {
            return Err(Error::LengthMismatch {
                what: "point dimension",
                expected: kernel.dim(),
                actual: points.cols(),
            });
        }
        let r = kernel.features();
        let mut features = Matrix::zeros(points.rows(), r);
        for i in 0..points.rows() {
            kernel.feature_map_into(points.row(i), features.row_mut(i))?;
        }
        let columns = (0..r).map(|j| features.column(j)).collect();
        Ok(Self {
            kernel,
            features: Arc::new(features),
            columns: Arc::new(columns),
        })
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    /// `n x r` matrix with row `i` equal to `P(x_i)`.
    pub fn features(&self) -> &Matrix {
        &self.features
    }
}

#[derive(Clone, Debug)]
pub struct SoftmaxIndex {
    table: FeatureTable,
    weights: Vec<f64>,
    p_wx: f64,
    s_w: f64,
    released_p_wx: f64,
    released_s_w: f64,
    /// Noise specs of the released scalars, in `Noisy` mode with noise on.
    scalar_noise: Option<(NoiseSpec, NoiseSpec)>,
    coords: Vec<DistanceIndex>,
    coord_budget: (f64, f64),
}

impl SoftmaxIndex {
    pub fn build(
        points: &Matrix,
        weights: &[f64],
        params: &SoftmaxParams,
        rng: &mut NoiseRng,
    ) -> Result<Self> {
        params.validate()?;
        if points.rows() == 0 {
            return Err(Error::Empty { what: "points" });
        }
        points.check_bounds("points", 0.0, params.radius)?;
        let table = FeatureTable::new(params.kernel(points.cols())?, points)?;
        Self::from_table(table, weights, params, rng)
    }

    /// Builds over precomputed features. Trees are built first, one forked
    /// stream per coordinate, then the scalars draw from `rng` directly.
    pub fn from_table(
        table: FeatureTable,
        weights: &[f64],
        params: &SoftmaxParams,
        rng: &mut NoiseRng,
    ) -> Result<Self> {
        params.validate()?;
        let n = table.features.rows();
        if weights.len() != n {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: n,
                actual: weights.len(),
            });
        }
        if n == 0 {
            return Err(Error::Empty { what: "points" });
        }
        check_values("weights", weights, -params.weight_bound, params.weight_bound)?;

        let r = table.kernel.features();
        let (tree_eps, tree_delta) = match params.scalars {
            ScalarRelease::Exact => (params.epsilon, params.delta),
            ScalarRelease::Noisy => (params.epsilon / 2.0, params.delta / 2.0),
        };
        let coord_eps = composition_epsilon(tree_eps, r, params.delta_prime, params.split);
        let coord_delta = tree_delta / r as f64;

        let mut coords = Vec::with_capacity(r);
        for (j, &top) in table.kernel.entry_max().iter().enumerate() {
            let cp = DistanceParams::new(top, params.weight_bound, coord_eps, coord_delta, DistanceMode::L2Sq)
                .with_noise(params.noise);
            coords.push(DistanceIndex::build(&table.columns[j], weights, &cp, &mut rng.fork())?);
        }

        let mut p_wx = 0.0;
        for (row, w) in table.features.iter_rows().zip(weights) {
            p_wx += w * row.iter().map(|v| v * v).sum::<f64>();
        }
        let s_w: f64 = weights.iter().sum();

        let mut released_p_wx = p_wx;
        let mut released_s_w = s_w;
        let mut scalar_noise = None;
        if params.scalars == ScalarRelease::Noisy && params.noise.is_enabled() {
            let max_norm: f64 = table.kernel.entry_max().iter().map(|g| g * g).sum();
            let eps = params.epsilon / 4.0;
            let delta = params.delta / 4.0;
            let p_spec = NoiseSpec::new(2.0 * params.weight_bound * max_norm, eps, delta)?;
            let s_spec = NoiseSpec::new(2.0 * params.weight_bound, eps, delta)?;
            released_p_wx += p_spec.sample(rng);
            released_s_w += s_spec.sample(rng);
            scalar_noise = Some((p_spec, s_spec));
        }

        Ok(Self {
            table,
            weights: weights.to_vec(),
            p_wx,
            s_w,
            released_p_wx,
            released_s_w,
            scalar_noise,
            coords,
            coord_budget: (coord_eps, coord_delta),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.table.kernel
    }

    pub fn table(&self) -> &FeatureTable {
        &self.table
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Exact `sum_i w_i ||P(x_i)||^2`.
    pub fn p_wx(&self) -> f64 {
        self.p_wx
    }

    /// Exact `sum_i w_i`.
    pub fn s_w(&self) -> f64 {
        self.s_w
    }

    /// `(P_wx, s_w)` as used by private queries.
    pub fn released_scalars(&self) -> (f64, f64) {
        (self.released_p_wx, self.released_s_w)
    }

    pub fn coords(&self) -> &[DistanceIndex] {
        &self.coords
    }

    /// `(ε, δ)` given to each coordinate structure.
    pub fn coord_budget(&self) -> (f64, f64) {
        self.coord_budget
    }

    /// Private estimate of `w^T exp(X y / d)`.
    pub fn query(&self, y: &[f64], alpha: f64) -> Result<f64> {
        self.query_with(y, alpha, DistanceBackend::Noisy)
    }

    pub fn query_with(&self, y: &[f64], alpha: f64, backend: DistanceBackend) -> Result<f64> {
        let py = self.table.kernel.feature_map(y)?;
        let norm: f64 = py.iter().map(|v| v * v).sum();
        let mut dist = 0.0;
        match backend {
            DistanceBackend::Noisy => {
                for (c, &v) in self.coords.iter().zip(&py) {
                    dist += c.distance_query(v, alpha)?;
                }
            }
            DistanceBackend::Bucketed => {
                for (c, &v) in self.coords.iter().zip(&py) {
                    dist += c.bucketed_distance(v, alpha)?;
                }
            }
            DistanceBackend::ExactRounded => {
                for (c, &v) in self.coords.iter().zip(&py) {
                    dist += c.exact_rounded_distance(v)?;
                }
            }
            DistanceBackend::Exact => {
                for (row, w) in self.table.features.iter_rows().zip(&self.weights) {
                    let gap: f64 = row.iter().zip(&py).map(|(a, b)| (a - b) * (a - b)).sum();
                    dist += w * gap;
                }
            }
        }
        let (p_wx, s_w) = match backend {
            DistanceBackend::Noisy => (self.released_p_wx, self.released_s_w),
            _ => (self.p_wx, self.s_w),
        };
        Ok(0.5 * (p_wx + s_w * norm - dist))
    }

    /// Worst-case `|query - query_with(Bucketed)|`.
    pub fn noise_bound(&self, y: &[f64], alpha: f64) -> Result<f64> {
        let py = self.table.kernel.feature_map(y)?;
        let mut bound = 0.0;
        for (c, &v) in self.coords.iter().zip(&py) {
            bound += c.noise_bound(v, alpha)?;
        }
        if let Some((p, s)) = &self.scalar_noise {
            let norm: f64 = py.iter().map(|v| v * v).sum();
            bound += p.bound() + norm * s.bound();
        }
        Ok(0.5 * bound)
    }

    /// Exact variance of `query - query_with(Bucketed)` over the build noise.
    pub fn noise_variance(&self, y: &[f64], alpha: f64) -> Result<f64> {
        let py = self.table.kernel.feature_map(y)?;
        let mut var = 0.0;
        for (c, &v) in self.coords.iter().zip(&py) {
            var += c.noise_variance(v, alpha)?;
        }
        if let Some((p, s)) = &self.scalar_noise {
            let norm: f64 = py.iter().map(|v| v * v).sum();
            var += p.variance() + norm * norm * s.variance();
        }
        Ok(0.25 * var)
    }
}

/// Deterministic bound on `|query_with(Bucketed) - sum_i w_i <P(x_i), P(y)>|`
/// from shell overestimation and grid rounding, for features `py = P(y)`.
pub fn discretization_bound(index: &SoftmaxIndex, py: &[f64], alpha: f64) -> f64 {
    let a = 0.5 * alpha;
    let rel = (1.0 + a) * (1.0 + a) - 1.0;
    let mut total = 0.0;
    for (j, c) in index.coords.iter().enumerate() {
        let step = c.radius() / c.grid() as f64;
        for (row, w) in index.table.features.iter_rows().zip(&index.weights) {
            let gap = (row[j] - py[j]).abs();
            let rounded = gap + step;
            total += w.abs() * (rel * rounded * rounded + 2.0 * gap * step + step * step);
        }
    }
    0.5 * total
}
