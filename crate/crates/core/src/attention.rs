//! Private cross-attention `Attn(Q, K, V) = D^{-1} A V` with
//! `A_ij = exp(<Q_i, K_j> / d)` and `D = diag(A 1)`.
//!
//! Column `k` of the numerator is a weighted softmax query over the keys
//! with weights `V_{*,k}`, answered by one [`AdaptiveIndex`] per column. The
//! normalizer is either computed exactly from `K` ([`Normalizer::Exact`],
//! which keeps `K` in memory and is not itself private) or estimated by an
//! extra all-ones [`AdaptiveIndex`] ([`Normalizer::Private`]).
//!
//! Budget accounting. By default every structure serving one output entry
//! gets the full budget divided by the number of structures that entry reads:
//! one in `Exact` mode, two (its column and the normalizer) in `Private`
//! mode. With `compose_columns` the budget is instead divided over all
//! structures (`d`, or `d + 1` with the private normalizer), which covers
//! releasing whole rows.

use alloc::vec;
use alloc::vec::Vec;

use crate::adaptive::{AdaptiveIndex, AdaptiveParams};
use crate::error::{Error, Result};
use crate::matrix::check_values;
use crate::{math, Matrix, NoiseRng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Normalizer {
    #[default]
    Exact,
    Private,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttentionParams {
    /// Total budget, accuracy, and copy settings.
    pub adaptive: AdaptiveParams,
    pub normalizer: Normalizer,
    pub compose_columns: bool,
}

impl AttentionParams {
    pub fn new(adaptive: AdaptiveParams) -> Self {
        Self {
            adaptive,
            normalizer: Normalizer::Exact,
            compose_columns: false,
        }
    }

    /// How many ways the total budget is divided for a layer of dimension `dim`.
    pub fn budget_parts(&self, dim: usize) -> usize {
        let extra = usize::from(self.normalizer == Normalizer::Private);
        if self.compose_columns {
            dim + extra
        } else {
            1 + extra
        }
    }

    /// Budget handed to each structure, before its own split over copies.
    pub fn structure_params(&self, dim: usize) -> AdaptiveParams {
        let parts = self.budget_parts(dim) as f64;
        let mut p = self.adaptive;
        p.softmax.epsilon /= parts;
        p.softmax.delta /= parts;
        p.softmax.delta_prime /= parts;
        p
    }
}

#[derive(Clone, Debug)]
enum NormalizerState {
    Exact(Matrix),
    Private(AdaptiveIndex),
}

#[derive(Clone, Debug)]
pub struct AttentionLayer {
    dim: usize,
    keys: usize,
    key_digest: u64,
    columns: Vec<AdaptiveIndex>,
    normalizer: NormalizerState,
    structure_params: AdaptiveParams,
    /// A single key with noise disabled: every row of the output is `V_1`.
    single_value: Option<Vec<f64>>,
}

impl AttentionLayer {
    /// Builds the column structures in order, then the private normalizer.
    pub fn build(k: &Matrix, v: &Matrix, params: &AttentionParams, rng: &mut NoiseRng) -> Result<Self> {
        let n = k.rows();
        let dim = k.cols();
        if n == 0 || dim == 0 {
            return Err(Error::Empty { what: "keys" });
        }
        if v.rows() != n {
            return Err(Error::LengthMismatch {
                what: "value rows",
                expected: n,
                actual: v.rows(),
            });
        }
        if v.cols() != dim {
            return Err(Error::LengthMismatch {
                what: "value columns",
                expected: dim,
                actual: v.cols(),
            });
        }
        let softmax = &params.adaptive.softmax;
        check_values("keys", k.as_slice(), 0.0, softmax.radius)?;
        check_values("values", v.as_slice(), -softmax.weight_bound, softmax.weight_bound)?;

        let structure_params = params.structure_params(dim);
        let columns = (0..dim)
            .map(|c| AdaptiveIndex::build(k, &v.column(c), &structure_params, &mut rng.fork()))
            .collect::<Result<Vec<_>>>()?;
        let normalizer = match params.normalizer {
            Normalizer::Exact => NormalizerState::Exact(k.clone()),
            Normalizer::Private => {
                // Weights are all ones, so the weight bound is 1.
                let mut p = structure_params;
                p.softmax.weight_bound = 1.0;
                NormalizerState::Private(AdaptiveIndex::build(k, &vec![1.0; n], &p, &mut rng.fork())?)
            }
        };
        let single_value = (n == 1 && !softmax.noise.is_enabled()).then(|| v.row(0).to_vec());
        Ok(Self {
            dim,
            keys: n,
            key_digest: digest(k),
            columns,
            normalizer,
            structure_params,
            single_value,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of keys `n`.
    pub fn keys(&self) -> usize {
        self.keys
    }

    /// FNV-1a over the bit patterns of `K`.
    pub fn key_digest(&self) -> u64 {
        self.key_digest
    }

    pub fn columns(&self) -> &[AdaptiveIndex] {
        &self.columns
    }

    pub fn normalizer_mode(&self) -> Normalizer {
        match self.normalizer {
            NormalizerState::Exact(_) => Normalizer::Exact,
            NormalizerState::Private(_) => Normalizer::Private,
        }
    }

    pub fn normalizer_index(&self) -> Option<&AdaptiveIndex> {
        match &self.normalizer {
            NormalizerState::Exact(_) => None,
            NormalizerState::Private(idx) => Some(idx),
        }
    }

    /// Budget and copy settings of each column structure.
    pub fn structure_params(&self) -> &AdaptiveParams {
        &self.structure_params
    }

    /// Private numerators `sum_j exp(<q, K_j>/d) V_jk`, one per column.
    pub fn numerators(&self, q: &[f64], alpha: f64) -> Result<Vec<f64>> {
        self.columns.iter().map(|c| c.query(q, alpha)).collect()
    }

    /// The normalizer used for query `q`: exact, or the private estimate
    /// clamped below by `max(n (1 - α - ε_s) - B, 1)` with `B` its noise bound.
    pub fn normalizer(&self, q: &[f64], alpha: f64) -> Result<f64> {
        let value = match &self.normalizer {
            NormalizerState::Exact(k) => {
                if q.len() != self.dim {
                    return Err(Error::LengthMismatch {
                        what: "query",
                        expected: self.dim,
                        actual: q.len(),
                    });
                }
                let d = self.dim as f64;
                k.iter_rows()
                    .map(|row| math::exp(row.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / d))
                    .sum()
            }
            NormalizerState::Private(idx) => {
                let est = idx.query(q, alpha)?;
                let eps_s = self.structure_params.softmax.epsilon_s;
                let floor = self.keys as f64 * (1.0 - alpha - eps_s) - idx.noise_bound(q, alpha)?;
                est.max(floor).max(1.0)
            }
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::DegenerateNormalizer(value));
        }
        Ok(value)
    }

    /// Per-column deterministic noise bounds on the numerators.
    pub fn numerator_bounds(&self, q: &[f64], alpha: f64) -> Result<Vec<f64>> {
        self.columns.iter().map(|c| c.noise_bound(q, alpha)).collect()
    }

    /// One output row.
    pub fn attend_row(&self, q: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let num = self.numerators(q, alpha)?;
        let norm = self.normalizer(q, alpha)?;
        if let Some(v) = &self.single_value {
            return Ok(v.clone());
        }
        Ok(num.into_iter().map(|x| x / norm).collect())
    }

    /// Row-wise [`attend_row`](Self::attend_row) over `Q` (`m x d`).
    pub fn attend(&self, q: &Matrix, alpha: f64) -> Result<Matrix> {
        if q.cols() != self.dim && q.rows() > 0 {
            return Err(Error::LengthMismatch {
                what: "query columns",
                expected: self.dim,
                actual: q.cols(),
            });
        }
        let mut out = Matrix::zeros(q.rows(), self.dim);
        for i in 0..q.rows() {
            let row = self.attend_row(q.row(i), alpha)?;
            out.row_mut(i).copy_from_slice(&row);
        }
        Ok(out)
    }
}

fn digest(m: &Matrix) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in m.as_slice() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
