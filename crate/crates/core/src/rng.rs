use core::sync::atomic::{AtomicU64, Ordering};

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

static TOTAL_DRAWS: AtomicU64 = AtomicU64::new(0);

/// Number of uniform draws taken from every [`NoiseRng`] in this process.
///
/// Queries never draw, so this counter is flat across any sequence of
/// queries on already-built structures. The privacy audit relies on that.
pub fn total_draws() -> u64 {
    TOTAL_DRAWS.load(Ordering::Relaxed)
}

/// Seeded, reproducible randomness source for privacy noise.
///
/// Identical seeds produce bit-identical draw sequences. Independent child
/// streams come from [`NoiseRng::split`] (`child_seed = mix(seed, index)`) or
/// [`NoiseRng::fork`], which splits on an internal counter.
///
/// Not a cryptographic RNG.
#[derive(Clone, Debug)]
pub struct NoiseRng {
    inner: ChaCha12Rng,
    seed: u64,
    draws: u64,
    forks: u64,
}

impl NoiseRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha12Rng::seed_from_u64(seed),
            seed,
            draws: 0,
            forks: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws taken from this stream (children not included).
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Child stream `index` of this seed. Depends only on `(seed, index)`,
    /// never on how far this stream has advanced.
    pub fn split(&self, index: u64) -> NoiseRng {
        NoiseRng::from_seed(child_seed(self.seed, index))
    }

    /// Next child stream; successive forks are independent.
    pub fn fork(&mut self) -> NoiseRng {
        let child = self.split(self.forks);
        self.forks += 1;
        child
    }

    /// Uniform draw from the open interval (0, 1) with 53 bits of precision.
    pub(crate) fn next_open01(&mut self) -> f64 {
        self.draws += 1;
        TOTAL_DRAWS.fetch_add(1, Ordering::Relaxed);
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

pub(crate) fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
