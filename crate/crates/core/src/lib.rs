//! Differentially private weighted range, distance, and softmax queries.
//!
//! Every structure in this crate follows the same life cycle: a build step
//! consumes a [`NoiseRng`] and freezes one truncated-Laplace draw per tree
//! node, after which all queries are pure functions of `&self`. Answering any
//! number of (possibly adaptive) queries therefore never touches randomness
//! again, and the privacy of the whole interaction reduces to the privacy of
//! the build.
//!
//! The layering, bottom-up:
//!
//! * [`noise`]: the truncated Laplace distribution.
//! * [`dptree`]: a noisy summation segment tree over a fixed array.
//! * [`distance`]: one-dimensional weighted `l1` / squared `l2` distance
//!   queries over a rounded weight histogram.
//! * [`highdim`]: coordinate-wise composition of [`distance`] indexes.
//! * [`kernel`]: a polynomial feature map whose inner products equal the
//!   truncated Taylor series of `exp(<x, y> / d)`.
//! * [`softmax`]: weighted softmax queries `w^T exp(X y / d)`.
//! * [`adaptive`]: median over independent softmax copies.
//! * [`attention`]: a private cross-attention layer.
//! * [`oracle`]: exact brute-force references.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod adaptive;
pub mod attention;
pub mod distance;
pub mod dptree;
mod error;
pub mod highdim;
pub mod kernel;
mod math;
mod matrix;
pub mod noise;
pub mod oracle;
mod rng;
pub mod softmax;
mod stats;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::{total_draws, NoiseRng};
pub use stats::median;

/// Whether a structure perturbs its node sums.
///
/// `Disabled` exists to test the deterministic skeleton of each structure;
/// its outputs are not private.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Noise {
    #[default]
    Enabled,
    Disabled,
}

impl Noise {
    pub fn is_enabled(self) -> bool {
        matches!(self, Noise::Enabled)
    }
}
