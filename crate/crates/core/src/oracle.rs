//! Exact brute-force references.
//!
//! Nothing here shares code with the private structures; each function is a
//! direct loop over the raw data.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::{math, Matrix};

fn check_weights(points: &Matrix, weights: &[f64]) -> Result<()> {
    if weights.len() != points.rows() {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: points.rows(),
            actual: weights.len(),
        });
    }
    Ok(())
}

fn check_query(points: &Matrix, y: &[f64]) -> Result<()> {
    if y.len() != points.cols() {
        return Err(Error::LengthMismatch {
            what: "query",
            expected: points.cols(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// `sum_i w_i ||y - x_i||_p^p` for `p` in `{1, 2}`.
pub fn exact_weighted_lp(points: &Matrix, weights: &[f64], y: &[f64], p: u32) -> Result<f64> {
    check_weights(points, weights)?;
    check_query(points, y)?;
    if p != 1 && p != 2 {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p as f64,
            reason: "must be 1 or 2",
        });
    }
    let mut total = 0.0;
    for (i, x) in points.iter_rows().enumerate() {
        let mut dist = 0.0;
        for (a, b) in x.iter().zip(y) {
            let gap = (a - b).abs();
            dist += if p == 1 { gap } else { gap * gap };
        }
        total += weights[i] * dist;
    }
    Ok(total)
}

/// `w^T exp(X y / d)`.
pub fn exact_softmax_query(points: &Matrix, weights: &[f64], y: &[f64]) -> Result<f64> {
    check_weights(points, weights)?;
    check_query(points, y)?;
    let d = points.cols() as f64;
    Ok(points
        .iter_rows()
        .zip(weights)
        .map(|(x, w)| w * math::exp(dot(x, y) / d))
        .sum())
}

/// Same as [`exact_softmax_query`], computed as `exp(m) * sum_i w_i exp(u_i - m)`
/// with `m` the largest exponent.
pub fn exact_softmax_query_stable(points: &Matrix, weights: &[f64], y: &[f64]) -> Result<f64> {
    check_weights(points, weights)?;
    check_query(points, y)?;
    let d = points.cols() as f64;
    let exps: Vec<f64> = points.iter_rows().map(|x| dot(x, y) / d).collect();
    let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Ok(0.0);
    }
    let scaled: f64 = exps.iter().zip(weights).map(|(u, w)| w * math::exp(u - top)).sum();
    Ok(math::exp(top) * scaled)
}

/// `D^{-1} A V` with `A_ij = exp(<Q_i, K_j> / d)` and `D = diag(A 1)`.
pub fn exact_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix> {
    if k.cols() != q.cols() {
        return Err(Error::LengthMismatch {
            what: "key columns",
            expected: q.cols(),
            actual: k.cols(),
        });
    }
    if v.rows() != k.rows() {
        return Err(Error::LengthMismatch {
            what: "value rows",
            expected: k.rows(),
            actual: v.rows(),
        });
    }
    if k.rows() == 0 {
        return Err(Error::Empty { what: "keys" });
    }
    let d = q.cols() as f64;
    let mut out = Matrix::zeros(q.rows(), v.cols());
    let mut scores = vec![0.0; k.rows()];
    for i in 0..q.rows() {
        let qi = q.row(i);
        let mut top = f64::NEG_INFINITY;
        for (j, s) in scores.iter_mut().enumerate() {
            *s = dot(qi, k.row(j)) / d;
            top = top.max(*s);
        }
        let mut norm = 0.0;
        for s in scores.iter_mut() {
            *s = math::exp(*s - top);
            norm += *s;
        }
        let row = out.row_mut(i);
        for (j, s) in scores.iter().enumerate() {
            let weight = s / norm;
            for (o, vj) in row.iter_mut().zip(v.row(j)) {
                *o += weight * vj;
            }
        }
    }
    Ok(out)
}

/// Exact normalizer `sum_j exp(<q, K_j> / d)` for one query row.
pub fn exact_normalizer(k: &Matrix, q: &[f64]) -> Result<f64> {
    check_query(k, q)?;
    let d = k.cols() as f64;
    Ok(k.iter_rows().map(|x| math::exp(dot(x, q) / d)).sum())
}

/// `sum_{j=0..s} (<x, y>/d)^j / j!` by explicit expansion over all
/// multi-indices `beta` with `|beta| <= s`:
/// `sum_beta (|beta|! / beta!) prod_k (x_k y_k)^beta_k / (d^|beta| |beta|!)`.
///
/// Exponential in `d` and `s`; meant for `d <= 3`, `s <= 4`.
pub fn truncated_exp_multinomial(x: &[f64], y: &[f64], degree: u32) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            what: "query",
            expected: x.len(),
            actual: y.len(),
        });
    }
    let d = x.len();
    if d == 0 {
        return Err(Error::Empty { what: "vector" });
    }
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b / d as f64).collect();
    let mut total = 0.0;
    let mut beta = vec![0u32; d];
    // Odometer over [0, degree]^d, keeping only |beta| <= degree.
    loop {
        let size: u32 = beta.iter().sum();
        if size <= degree {
            let mut term = 1.0;
            for (k, &b) in beta.iter().enumerate() {
                term *= math::powi(prods[k], b as i32) / factorial(b);
            }
            total += term;
        }
        let mut k = 0;
        loop {
            if k == d {
                return Ok(total);
            }
            beta[k] += 1;
            if beta[k] <= degree {
                break;
            }
            beta[k] = 0;
            k += 1;
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
