//! Truncated Laplace noise.
//!
//! `TLap(Δ, ε, δ)` has density proportional to `exp(-ε|z|/Δ)` on `[-B, B]`
//! with `B = (Δ/ε) ln(1 + (e^ε - 1)/(2δ))`. Adding one draw to a statistic of
//! sensitivity `Δ` is `(ε, δ)`-DP, and the error is bounded by `B` with
//! certainty.

use crate::error::{Error, Result};
use crate::math;
use crate::NoiseRng;

/// Parameters of one truncated-Laplace draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    sensitivity: f64,
    epsilon: f64,
    delta: f64,
    // Derived from the three above at construction; sampling is hot.
    log_term: f64,
    mass: f64,
}

impl NoiseSpec {
    /// Requires `Δ >= 0`, `ε > 0`, `0 < δ < 1`. `δ = 0` is rejected because
    /// the support bound diverges.
    pub fn new(sensitivity: f64, epsilon: f64, delta: f64) -> Result<Self> {
        if !(sensitivity >= 0.0 && sensitivity.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sensitivity",
                value: sensitivity,
                reason: "must be finite and nonnegative",
            });
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: epsilon,
                reason: "must be positive and finite",
            });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "must lie in (0, 1)",
            });
        }
        let log_term = math::ln_1p(math::exp_m1(epsilon) / (2.0 * delta));
        Ok(Self {
            sensitivity,
            epsilon,
            delta,
            log_term,
            mass: -math::exp_m1(-log_term),
        })
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Laplace scale `Δ/ε`.
    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }

    /// `ln(1 + (e^ε - 1)/(2δ))`, the support bound in units of the scale.
    fn log_term(&self) -> f64 {
        self.log_term
    }

    /// Support bound `B`; every sample satisfies `|z| <= B`.
    pub fn bound(&self) -> f64 {
        self.scale() * self.log_term()
    }

    /// Closed-form variance of the truncated distribution.
    pub fn variance(&self) -> f64 {
        if self.sensitivity == 0.0 {
            return 0.0;
        }
        let t = self.log_term();
        let scale = self.scale();
        2.0 * scale * scale
            * (1.0 - self.delta * (t * t + 2.0 * t) / math::exp_m1(self.epsilon))
    }

    /// Draws one sample by inverting the CDF.
    ///
    /// A single uniform `u` picks the sign (`u < 1/2` is negative) and the
    /// magnitude from the exponential law truncated to `[0, B]`. Zero
    /// sensitivity returns exactly `0.0` without consuming randomness.
    pub fn sample(&self, rng: &mut NoiseRng) -> f64 {
        if self.sensitivity == 0.0 {
            return 0.0;
        }
        let u = rng.next_open01();
        let scale = self.scale();
        let bound = self.bound();
        // Mass of the one-sided exponential on [0, B], relative to [0, inf).
        let mass = self.mass;
        let signed = 2.0 * u - 1.0;
        let v = signed.abs();
        let magnitude = (-scale * math::ln_1p(-v * mass)).min(bound);
        if signed < 0.0 {
            -magnitude
        } else {
            magnitude
        }
    }

    /// Same `Δ` with `ε` and `δ` divided by `parts` (basic composition).
    pub fn divided(&self, parts: f64) -> Result<Self> {
        NoiseSpec::new(self.sensitivity, self.epsilon / parts, self.delta / parts)
    }
}

/// Untruncated Laplace draw with the given scale, for comparisons only.
pub fn laplace_sample(scale: f64, rng: &mut NoiseRng) -> f64 {
    let u = rng.next_open01() - 0.5;
    let magnitude = -scale * math::ln_1p(-2.0 * u.abs());
    if u < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// `Var[Lap(Δ/ε)] = 2Δ²/ε²`.
pub fn laplace_variance(sensitivity: f64, epsilon: f64) -> f64 {
    2.0 * sensitivity * sensitivity / (epsilon * epsilon)
}

/// Variance of the classical Gaussian mechanism, `2Δ² ln(1.25/δ)/ε²`.
pub fn gaussian_variance(sensitivity: f64, epsilon: f64, delta: f64) -> f64 {
    2.0 * sensitivity * sensitivity * math::ln(1.25 / delta) / (epsilon * epsilon)
}
