//! Noisy summation segment tree.
//!
//! The tree is stored as a 1-based heap over `leaf_count` (a power of two)
//! leaves: node `k` has children `2k` and `2k + 1`, leaves live at
//! `leaf_count..2 * leaf_count`. Each node holds an exact sum and a noisy
//! copy perturbed once, at build time, by `TLap(Δ, ε/L, δ/L)` where `L` is
//! the tree height. Interval sums combine at most `2L` nodes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::check_finite;
use crate::noise::NoiseSpec;
use crate::{median, Noise, NoiseRng};

/// Result of an interval query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalQueryResult {
    pub value: f64,
    /// Number of tree nodes combined; at most `2 * levels`.
    pub node_count: usize,
}

#[derive(Clone, Debug)]
pub struct DpTree {
    values: Vec<f64>,
    leaf_count: usize,
    levels: u32,
    exact: Vec<f64>,
    noisy: Vec<f64>,
    node_spec: NoiseSpec,
    noise: Noise,
    checksum: u64,
}

impl DpTree {
    /// Builds the tree over `values` with total budget `(epsilon, delta)`.
    ///
    /// Noise is drawn leaves first, then internal nodes bottom-up, one draw
    /// per node. With `Noise::Disabled` the noisy sums equal the exact sums
    /// and no randomness is consumed.
    pub fn build(
        values: &[f64],
        sensitivity: f64,
        epsilon: f64,
        delta: f64,
        rng: &mut NoiseRng,
        noise: Noise,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty { what: "tree input" });
        }
        check_finite("tree input", values)?;
        let leaf_count = values.len().next_power_of_two();
        let levels = budget_levels(leaf_count);
        let node_spec = NoiseSpec::new(sensitivity, epsilon, delta)?.divided(levels as f64)?;

        let mut exact = vec![0.0; 2 * leaf_count];
        exact[leaf_count..leaf_count + values.len()].copy_from_slice(values);
        let mut noisy = exact.clone();

        let mut perturb = |k: usize, exact: &[f64], noisy: &mut [f64]| {
            noisy[k] = exact[k]
                + if noise.is_enabled() {
                    node_spec.sample(rng)
                } else {
                    0.0
                };
        };

        for k in leaf_count..2 * leaf_count {
            perturb(k, &exact, &mut noisy);
        }
        let mut width = leaf_count / 2;
        while width >= 1 {
            for k in width..2 * width {
                exact[k] = exact[2 * k] + exact[2 * k + 1];
                perturb(k, &exact, &mut noisy);
            }
            width /= 2;
        }

        Ok(Self {
            values: values.to_vec(),
            leaf_count,
            levels,
            exact,
            noisy,
            node_spec,
            noise,
            checksum: checksum(values),
        })
    }

    /// Number of input entries (before padding).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Padded leaf count, a power of two.
    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    /// Budget divisor `max(1, log2(leaf_count))`.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Per-node noise parameters.
    pub fn node_spec(&self) -> NoiseSpec {
        self.node_spec
    }

    /// Support bound of a single node's noise; zero when noise is disabled.
    pub fn node_bound(&self) -> f64 {
        if self.noise.is_enabled() {
            self.node_spec.bound()
        } else {
            0.0
        }
    }

    /// Variance of a single node's noise; zero when noise is disabled.
    pub fn node_variance(&self) -> f64 {
        if self.noise.is_enabled() {
            self.node_spec.variance()
        } else {
            0.0
        }
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    /// Exact node sums, heap order, index 0 unused.
    pub fn exact_nodes(&self) -> &[f64] {
        &self.exact
    }

    /// Noisy node sums, heap order, index 0 unused.
    pub fn noisy_nodes(&self) -> &[f64] {
        &self.noisy
    }

    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    /// Heap indices of the canonical nodes covering `[x, y]` (1-based,
    /// inclusive), found by climbing from both leaves toward their lowest
    /// common ancestor.
    pub fn canonical_nodes(&self, x: usize, y: usize) -> Result<Vec<usize>> {
        self.check_interval(x, y)?;
        let mut left = self.leaf_count + x - 1;
        let mut right = self.leaf_count + y;
        let mut nodes = Vec::new();
        let mut right_nodes = Vec::new();
        while left < right {
            if left & 1 == 1 {
                nodes.push(left);
                left += 1;
            }
            if right & 1 == 1 {
                right -= 1;
                right_nodes.push(right);
            }
            left >>= 1;
            right >>= 1;
        }
        nodes.extend(right_nodes.into_iter().rev());
        Ok(nodes)
    }

    /// Leaves covered by heap node `node`, as 1-based inclusive positions.
    pub fn node_leaves(&self, node: usize) -> (usize, usize) {
        let depth = usize::BITS - 1 - node.leading_zeros();
        let span = self.leaf_count >> depth;
        let first = (node << (self.levels_exact() - depth)) - self.leaf_count;
        (first + 1, first + span)
    }

    fn levels_exact(&self) -> u32 {
        self.leaf_count.trailing_zeros()
    }

    /// Noisy sum of entries `x..=y` (1-based).
    pub fn query(&self, x: usize, y: usize) -> Result<IntervalQueryResult> {
        self.sum_over(x, y, &self.noisy)
    }

    /// Exact sum of entries `x..=y` through the same decomposition.
    pub fn true_query(&self, x: usize, y: usize) -> Result<f64> {
        Ok(self.sum_over(x, y, &self.exact)?.value)
    }

    /// Worst-case `|query - true_query|` for the interval.
    pub fn query_bound(&self, x: usize, y: usize) -> Result<f64> {
        Ok(self.sum_over(x, y, &self.exact)?.node_count as f64 * self.node_bound())
    }

    fn sum_over(&self, x: usize, y: usize, sums: &[f64]) -> Result<IntervalQueryResult> {
        self.check_interval(x, y)?;
        // Same walk as `canonical_nodes`, without collecting.
        let mut left = self.leaf_count + x - 1;
        let mut right = self.leaf_count + y;
        let (mut left_sum, mut right_sum, mut node_count) = (0.0, 0.0, 0);
        while left < right {
            if left & 1 == 1 {
                left_sum += sums[left];
                left += 1;
                node_count += 1;
            }
            if right & 1 == 1 {
                right -= 1;
                right_sum += sums[right];
                node_count += 1;
            }
            left >>= 1;
            right >>= 1;
        }
        Ok(IntervalQueryResult {
            value: left_sum + right_sum,
            node_count,
        })
    }

    fn check_interval(&self, x: usize, y: usize) -> Result<()> {
        if x == 0 || x > y || y > self.values.len() {
            return Err(Error::BadInterval {
                x,
                y,
                len: self.values.len(),
            });
        }
        Ok(())
    }
}

fn budget_levels(leaf_count: usize) -> u32 {
    leaf_count.trailing_zeros().max(1)
}

fn checksum(values: &[f64]) -> u64 {
    // FNV-1a over the length and the raw bit patterns.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |word: u64| {
        for byte in word.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(values.len() as u64);
    for v in values {
        eat(v.to_bits());
    }
    h
}

/// Boosting copy count `ceil(3 ln(1/δ_fail))`, bumped to the next odd number.
pub fn boost_copy_count(failure_prob: f64) -> Result<usize> {
    if !(failure_prob > 0.0 && failure_prob < 1.0) {
        return Err(Error::InvalidParameter {
            name: "failure_prob",
            value: failure_prob,
            reason: "must lie in (0, 1)",
        });
    }
    let l = (crate::math::ceil(3.0 * crate::math::ln(1.0 / failure_prob)) as usize).max(1);
    Ok(if l.is_multiple_of(2) { l + 1 } else { l })
}

/// Median of the noisy interval sums over independently built copies.
pub fn boosted_query(trees: &[DpTree], x: usize, y: usize) -> Result<f64> {
    let first = trees.first().ok_or(Error::Empty { what: "tree list" })?;
    if trees
        .iter()
        .any(|t| t.len() != first.len() || t.checksum() != first.checksum())
    {
        return Err(Error::MismatchedTrees);
    }
    let answers = trees
        .iter()
        .map(|t| t.query(x, y).map(|r| r.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&answers).expect("non-empty"))
}

/// Copies of one array, each with budget `(ε/L, δ/L)`, answered by median.
#[derive(Clone, Debug)]
pub struct BoostedTree {
    copies: Vec<DpTree>,
}

impl BoostedTree {
    /// `total` is the budget shared by all copies; `copies` overrides
    /// [`boost_copy_count`] when given.
    pub fn build(
        values: &[f64],
        total: NoiseSpec,
        failure_prob: f64,
        copies: Option<usize>,
        rng: &mut NoiseRng,
        noise: Noise,
    ) -> Result<Self> {
        let count = match copies {
            Some(0) => return Err(Error::Empty { what: "boosted copies" }),
            Some(c) => c,
            None => boost_copy_count(failure_prob)?,
        };
        let share = count as f64;
        let copies = (0..count)
            .map(|_| {
                let mut child = rng.fork();
                let (eps, delta) = (total.epsilon() / share, total.delta() / share);
                DpTree::build(values, total.sensitivity(), eps, delta, &mut child, noise)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { copies })
    }

    pub fn copies(&self) -> &[DpTree] {
        &self.copies
    }

    pub fn query(&self, x: usize, y: usize) -> Result<f64> {
        boosted_query(&self.copies, x, y)
    }
}
