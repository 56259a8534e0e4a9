//! Polynomial feature map for the exponential kernel.
//!
//! For a multi-index `β` with `|β| = j` the feature is
//!
//! ```text
//! P(x)_β = prod_k (x_k / sqrt(d))^β_k / sqrt(β_k!)
//! ```
//!
//! and by the multinomial theorem `<P(x), P(y)> = sum_{j<=s} (<x,y>/d)^j / j!`,
//! the degree-`s` Taylor polynomial of `exp(<x, y> / d)`.
//!
//! Multi-indices are ordered graded-lexicographically: by degree, then with
//! larger leading exponents first. For `d = 2, s = 2`:
//! `(0,0) (1,0) (0,1) (2,0) (1,1) (0,2)`.
//!
//! Every entry is increasing in each coordinate of `x`, so its maximum over
//! `[0, R]^d` is attained at `x = (R, ..., R)`. That maximum is at most
//! `Γ = max_j R^j / sqrt(j!)`, because the multinomial coefficient
//! `j! / β!` never exceeds `d^j`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{check_positive, check_values};

/// Default cap on the feature count `r`.
pub const DEFAULT_FEATURE_CAP: usize = 1_000_000;

/// Number of tail terms summed explicitly before the geometric remainder.
const TAIL_TERMS: u32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct KernelParams {
    dim: usize,
    radius: f64,
    epsilon_s: f64,
    degree: u32,
    gamma: f64,
    /// Flattened `r x d` exponent table.
    exponents: Vec<u32>,
    /// For each feature but the first: (parent feature, coordinate whose
    /// exponent the parent lacks).
    parents: Vec<(usize, usize)>,
    entry_max: Vec<f64>,
}

impl KernelParams {
    /// Smallest degree meeting the tail criterion, with the default cap on `r`.
    pub fn select(dim: usize, radius: f64, epsilon_s: f64) -> Result<Self> {
        Self::select_with_cap(dim, radius, epsilon_s, DEFAULT_FEATURE_CAP)
    }

    pub fn select_with_cap(dim: usize, radius: f64, epsilon_s: f64, cap: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty { what: "dimension" });
        }
        check_positive("radius", radius)?;
        if radius < 1.0 {
            return Err(Error::InvalidParameter {
                name: "radius",
                value: radius,
                reason: "kernel domain bound must be at least 1",
            });
        }
        if !(epsilon_s > 0.0 && epsilon_s <= 0.1) {
            return Err(Error::InvalidParameter {
                name: "epsilon_s",
                value: epsilon_s,
                reason: "must lie in (0, 0.1]",
            });
        }
        let degree = select_degree(radius, epsilon_s)?;
        let r = feature_count(dim, degree).filter(|&r| r <= cap);
        let Some(r) = r else {
            return Err(Error::Infeasible("kernel feature count exceeds the cap"));
        };
        let exponents = graded_lex(dim, degree, r);

        let mut position = BTreeMap::new();
        for i in 0..r {
            position.insert(&exponents[i * dim..(i + 1) * dim], i);
        }
        let mut parents = Vec::with_capacity(r.saturating_sub(1));
        let mut scratch = vec![0u32; dim];
        for i in 1..r {
            scratch.copy_from_slice(&exponents[i * dim..(i + 1) * dim]);
            let k = scratch.iter().rposition(|&b| b > 0).unwrap_or(0);
            scratch[k] -= 1;
            parents.push((position[scratch.as_slice()], k));
        }
        drop(position);

        // Same multiplicative recurrence as `fill`, so that for d = 1 the
        // entries and Γ agree bit for bit.
        let mut gamma = 1.0f64;
        let mut term = 1.0;
        for j in 1..=degree {
            term = term * radius / math::sqrt(j as f64);
            gamma = gamma.max(term);
        }
        let mut params = Self {
            dim,
            radius,
            epsilon_s,
            degree,
            gamma,
            exponents,
            parents,
            entry_max: Vec::new(),
        };
        let mut top = vec![0.0; r];
        params.fill(&vec![radius; dim], &mut top);
        params.entry_max = top;
        Ok(params)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn epsilon_s(&self) -> f64 {
        self.epsilon_s
    }

    /// Taylor degree `s`.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Feature count `r = C(s + d, d)`.
    pub fn features(&self) -> usize {
        self.parents.len() + 1
    }

    /// `Γ = max_{j <= s} R^j / sqrt(j!)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Exponent vector of feature `i`.
    pub fn multi_index(&self, i: usize) -> &[u32] {
        &self.exponents[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest value of each feature over `[0, R]^d`.
    pub fn entry_max(&self) -> &[f64] {
        &self.entry_max
    }

    /// `P(x)` for `x` in `[0, R]^d`.
    pub fn feature_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.features()];
        self.feature_map_into(x, &mut out)?;
        Ok(out)
    }

    pub fn feature_map_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::LengthMismatch {
                what: "kernel input",
                expected: self.dim,
                actual: x.len(),
            });
        }
        if out.len() != self.features() {
            return Err(Error::LengthMismatch {
                what: "feature buffer",
                expected: self.features(),
                actual: out.len(),
            });
        }
        check_values("kernel input", x, 0.0, self.radius)?;
        self.fill(x, out);
        Ok(())
    }

    fn fill(&self, x: &[f64], out: &mut [f64]) {
        let scale = 1.0 / math::sqrt(self.dim as f64);
        out[0] = 1.0;
        for (i, &(parent, k)) in self.parents.iter().enumerate() {
            let i = i + 1;
            let b = self.exponents[i * self.dim + k];
            out[i] = out[parent] * x[k] * scale / math::sqrt(b as f64);
        }
    }

    /// `<P(x), P(y)>`.
    pub fn approx_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let px = self.feature_map(x)?;
        let py = self.feature_map(y)?;
        Ok(px.iter().zip(&py).map(|(a, b)| a * b).sum())
    }

    /// `|<P(x), P(y)> - exp(<x, y> / d)|`.
    pub fn kernel_error(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let approx = self.approx_kernel(x, y)?;
        let u = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / self.dim as f64;
        Ok((approx - math::exp(u)).abs())
    }
}

/// `C(s + d, d)`, or `None` on overflow.
pub fn feature_count(dim: usize, degree: u32) -> Option<usize> {
    let s = degree as usize;
    let k = dim.min(s);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.checked_mul((s + dim) as u128 + 1 - i)? / i;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

fn ln_factorial(j: u32) -> f64 {
    math::ln_gamma(j as f64 + 1.0)
}

/// Upper bound on `sum_{j > s} R^{2j} / j!`; infinite when the geometric
/// remainder does not converge.
pub fn taylor_tail(radius: f64, degree: u32) -> f64 {
    let lnr2 = 2.0 * math::ln(radius);
    let term = |j: u32| math::exp(j as f64 * lnr2 - ln_factorial(j));
    let last = degree + TAIL_TERMS;
    let head: f64 = (degree + 1..=last).map(term).sum();
    // Ratio of consecutive terms past `last` is at most R^2 / (last + 2).
    let q = radius * radius / (last + 2) as f64;
    if q >= 1.0 {
        return f64::INFINITY;
    }
    head + term(last + 1) / (1.0 - q)
}

fn select_degree(radius: f64, epsilon_s: f64) -> Result<u32> {
    // Past e R^2 the terms decay at least geometrically, so a small multiple
    // of that bounds the search.
    let limit = (8.0 * radius * radius) as u32 + 64;
    (0..=limit)
        .find(|&s| taylor_tail(radius, s) <= epsilon_s)
        .ok_or(Error::Infeasible("no Taylor degree meets the kernel accuracy"))
}

fn graded_lex(dim: usize, degree: u32, r: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(r * dim);
    let mut current = vec![0u32; dim];
    for j in 0..=degree {
        compositions(&mut current, 0, j, &mut out);
    }
    out
}

/// Appends all exponent vectors with `current[..at]` fixed and the remaining
/// coordinates summing to `left`, larger leading exponents first.
fn compositions(current: &mut [u32], at: usize, left: u32, out: &mut Vec<u32>) {
    if at + 1 == current.len() {
        current[at] = left;
        out.extend_from_slice(current);
        return;
    }
    for b in (0..=left).rev() {
        current[at] = b;
        compositions(current, at + 1, left - b, out);
    }
    current[at] = 0;
}
