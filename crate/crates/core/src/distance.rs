//! One-dimensional weighted distance queries.
//!
//! Points in `[0, R]` are rounded to a grid of `n + 1` buckets (`n` defaults
//! to the point count) and their weights are accumulated into a histogram,
//! which backs a [`DpTree`] with sensitivity `2 R_w`. A query snaps `y` to
//! its bucket `k` and splits the other buckets into geometric shells by
//! offset `m = |j - k|`:
//!
//! ```text
//! shell t covers offsets (floor(n / (1+a)^(t+1)), floor(n / (1+a)^t)]
//! ```
//!
//! Each shell is answered with one interval query per side and scaled by the
//! shell's outer radius, `R / (1+a)^t` for `l1` or `R^2 / (1+a)^(2t)` for
//! squared `l2` (with `a = α/2` in that mode). Since every offset in shell
//! `t` satisfies `m R / n <= R/(1+a)^t < (1+a) m R / n`, the multiplier
//! overestimates each bucket's distance by less than a factor `1 + a`.
//! Shells on one side and across sides are disjoint and never include `k`.

use alloc::vec::Vec;

use crate::dptree::DpTree;
use crate::error::{Error, Result};
use crate::matrix::{check_open, check_positive, check_values};
use crate::{math, Noise, NoiseRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistanceMode {
    /// `sum_i w_i |y - x_i|`
    L1,
    /// `sum_i w_i |y - x_i|^2`
    L2Sq,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceParams {
    /// Domain radius `R`; points and queries lie in `[0, R]`.
    pub radius: f64,
    /// Weight magnitude bound `R_w`.
    pub weight_bound: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: DistanceMode,
    /// Grid resolution `n`; the point count when `None`.
    pub grid: Option<usize>,
    pub noise: Noise,
}

impl DistanceParams {
    pub fn new(radius: f64, weight_bound: f64, epsilon: f64, delta: f64, mode: DistanceMode) -> Self {
        Self {
            radius,
            weight_bound,
            epsilon,
            delta,
            mode,
            grid: None,
            noise: Noise::Enabled,
        }
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_noise(mut self, noise: Noise) -> Self {
        self.noise = noise;
        self
    }
}

/// Nearest grid index of `x` on the grid `{0, R/n, ..., R}`; an exact
/// midpoint rounds up.
pub fn round_to_grid(x: f64, radius: f64, grid: usize) -> Result<usize> {
    check_positive("radius", radius)?;
    if grid == 0 {
        return Err(Error::Empty { what: "grid" });
    }
    check_values("grid coordinate", &[x], 0.0, radius)?;
    // Compare in index units so grid points are exact integers.
    let t = x * grid as f64 / radius;
    let j = (math::floor(t) as usize).min(grid - 1);
    Ok(if (t - (j + 1) as f64).abs() <= (t - j as f64).abs() {
        j + 1
    } else {
        j
    })
}

/// One geometric shell on one side of the query bucket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shell {
    /// First bucket, inclusive (0-based).
    pub first: usize,
    /// Last bucket, inclusive (0-based).
    pub last: usize,
    pub multiplier: f64,
}

#[derive(Clone, Debug)]
pub struct DistanceIndex {
    radius: f64,
    weight_bound: f64,
    points: usize,
    grid: usize,
    histogram: Vec<f64>,
    tree: DpTree,
    mode: DistanceMode,
}

impl DistanceIndex {
    pub fn build(
        points: &[f64],
        weights: &[f64],
        params: &DistanceParams,
        rng: &mut NoiseRng,
    ) -> Result<Self> {
        check_positive("radius", params.radius)?;
        check_positive("weight_bound", params.weight_bound)?;
        if points.is_empty() {
            return Err(Error::Empty { what: "points" });
        }
        if weights.len() != points.len() {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: points.len(),
                actual: weights.len(),
            });
        }
        check_values("points", points, 0.0, params.radius)?;
        check_values("weights", weights, -params.weight_bound, params.weight_bound)?;
        let grid = params.grid.unwrap_or(points.len());
        if grid == 0 {
            return Err(Error::Empty { what: "grid" });
        }

        let mut histogram = alloc::vec![0.0; grid + 1];
        for (&x, &w) in points.iter().zip(weights) {
            histogram[round_to_grid(x, params.radius, grid)?] += w;
        }
        let tree = DpTree::build(
            &histogram,
            2.0 * params.weight_bound,
            params.epsilon,
            params.delta,
            rng,
            params.noise,
        )?;
        Ok(Self {
            radius: params.radius,
            weight_bound: params.weight_bound,
            points: points.len(),
            grid,
            histogram,
            tree,
            mode: params.mode,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weight_bound(&self) -> f64 {
        self.weight_bound
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    /// Bucket weight sums before noise.
    pub fn histogram(&self) -> &[f64] {
        &self.histogram
    }

    pub fn tree(&self) -> &DpTree {
        &self.tree
    }

    /// The shell ratio parameter actually used: `α`, or `α/2` for squared `l2`.
    pub fn internal_alpha(&self, alpha: f64) -> f64 {
        match self.mode {
            DistanceMode::L1 => alpha,
            DistanceMode::L2Sq => 0.5 * alpha,
        }
    }

    /// Non-empty shells for query `y`, right side first, inner shells last.
    pub fn shells(&self, y: f64, alpha: f64) -> Result<Vec<Shell>> {
        check_open("alpha", alpha, 0.0, 1.0)?;
        let k = round_to_grid(y, self.radius, self.grid)?;
        let ratio = 1.0 + self.internal_alpha(alpha);
        let n = self.grid as f64;

        let mut right = Vec::new();
        let mut left = Vec::new();
        let mut outer = self.grid;
        let mut t = 0i32;
        // ratio^t, carried over from the previous iteration's ratio^(t+1).
        let mut power = 1.0;
        while outer >= 1 {
            let next_power = math::powi(ratio, t + 1);
            let inner = math::floor(n / next_power) as usize;
            let inner = inner.min(outer);
            if inner < outer {
                let multiplier = match self.mode {
                    DistanceMode::L1 => self.radius / power,
                    DistanceMode::L2Sq => self.radius * self.radius / math::powi(ratio, 2 * t),
                };
                // Offsets inner+1 ..= outer on each side, clipped to the grid.
                if k + inner < self.grid {
                    right.push(Shell {
                        first: k + inner + 1,
                        last: (k + outer).min(self.grid),
                        multiplier,
                    });
                }
                if inner < k {
                    left.push(Shell {
                        first: k.saturating_sub(outer),
                        last: k - inner - 1,
                        multiplier,
                    });
                }
            }
            outer = inner;
            power = next_power;
            t += 1;
        }
        right.extend(left);
        Ok(right)
    }

    /// Noisy estimate of the weighted distance from `y`.
    pub fn distance_query(&self, y: f64, alpha: f64) -> Result<f64> {
        let mut value = 0.0;
        for s in self.shells(y, alpha)? {
            value += self.tree.query(s.first + 1, s.last + 1)?.value * s.multiplier;
        }
        Ok(value)
    }

    /// The same shell sum evaluated on exact tree sums: what
    /// [`distance_query`](Self::distance_query) returns with noise removed.
    pub fn bucketed_distance(&self, y: f64, alpha: f64) -> Result<f64> {
        let mut value = 0.0;
        for s in self.shells(y, alpha)? {
            value += self.tree.true_query(s.first + 1, s.last + 1)? * s.multiplier;
        }
        Ok(value)
    }

    /// Worst-case `|distance_query - bucketed_distance|`: each shell
    /// contributes its multiplier times its node count times the node bound.
    pub fn noise_bound(&self, y: f64, alpha: f64) -> Result<f64> {
        let mut bound = 0.0;
        for s in self.shells(y, alpha)? {
            bound += s.multiplier * self.tree.query_bound(s.first + 1, s.last + 1)?;
        }
        Ok(bound)
    }

    /// Exact variance of `distance_query - bucketed_distance` over the
    /// build randomness. Distinct shells use distinct nodes, so node noises
    /// enter independently with weight `multiplier^2`.
    pub fn noise_variance(&self, y: f64, alpha: f64) -> Result<f64> {
        let node_var = self.tree.node_variance();
        let mut var = 0.0;
        for s in self.shells(y, alpha)? {
            let nodes = self.tree.query(s.first + 1, s.last + 1)?.node_count as f64;
            var += s.multiplier * s.multiplier * nodes * node_var;
        }
        Ok(var)
    }

    /// Noise-free, shell-free reference `sum_j |k - j| (R/n) histogram[j]`
    /// (squared distances in `L2Sq` mode), where `k` is `y`'s bucket.
    pub fn exact_rounded_distance(&self, y: f64) -> Result<f64> {
        let k = round_to_grid(y, self.radius, self.grid)? as i64;
        let step = self.radius / self.grid as f64;
        Ok(self
            .histogram
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let d = (k - j as i64).unsigned_abs() as f64 * step;
                match self.mode {
                    DistanceMode::L1 => d * c,
                    DistanceMode::L2Sq => d * d * c,
                }
            })
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const NINE_X: [f64; 9] = [0.1, 0.3, 0.3, 0.3, 0.4, 0.6, 0.7, 0.9, 0.9];
    pub(crate) const NINE_W: [f64; 9] = [2.2, 3.1, -2.0, -3.0, 2.0, 6.0, 0.5, -1.0, 1.0];

    fn nine_point_index(mode: DistanceMode, noise: Noise) -> DistanceIndex {
        let params = DistanceParams::new(1.0, 6.0, 1.0, 0.01, mode)
            .with_grid(10)
            .with_noise(noise);
        DistanceIndex::build(&NINE_X, &NINE_W, &params, &mut NoiseRng::from_seed(1)).unwrap()
    }

    #[test]
    fn rounding() {
        assert_eq!(round_to_grid(0.0, 1.0, 10).unwrap(), 0);
        assert_eq!(round_to_grid(0.26, 1.0, 10).unwrap(), 3);
        assert_eq!(round_to_grid(0.25, 1.0, 10).unwrap(), 3);
        assert_eq!(round_to_grid(0.24, 1.0, 10).unwrap(), 2);
        assert_eq!(round_to_grid(1.0, 1.0, 10).unwrap(), 10);
        assert_eq!(round_to_grid(0.99, 1.0, 10).unwrap(), 10);
        assert_eq!(round_to_grid(3.0, 4.0, 2).unwrap(), 2);
        assert!(round_to_grid(1.01, 1.0, 10).is_err());
        assert!(round_to_grid(-0.01, 1.0, 10).is_err());
        assert!(round_to_grid(f64::NAN, 1.0, 10).is_err());
    }

    #[test]
    fn nine_point_histogram() {
        let idx = nine_point_index(DistanceMode::L1, Noise::Disabled);
        let h = idx.histogram();
        assert_eq!(h.len(), 11);
        assert!((h[3] - (-1.9)).abs() < 1e-12);
        assert_eq!(h[9], 0.0);
        assert_eq!(h[1], 2.2);
        assert_eq!(h[4], 2.0);
        assert_eq!(h[6], 6.0);
        assert_eq!(h[7], 0.5);
        let total: f64 = NINE_W.iter().sum();
        assert!((h.iter().sum::<f64>() - total).abs() < 1e-12);
    }

    #[test]
    fn nine_point_exact_rounded_distance() {
        let idx = nine_point_index(DistanceMode::L1, Noise::Disabled);
        assert!((idx.exact_rounded_distance(0.0).unwrap() - 4.4).abs() < 1e-12);
    }

    #[test]
    fn nine_point_shell_query_small_alpha() {
        let idx = nine_point_index(DistanceMode::L1, Noise::Disabled);
        let alpha = 0.01;
        let abs_weighted: f64 = idx
            .histogram()
            .iter()
            .enumerate()
            .map(|(j, c)| c.abs() * j as f64 / 10.0)
            .sum();
        let v = idx.distance_query(0.0, alpha).unwrap();
        assert!((v - 4.4).abs() <= alpha * abs_weighted + 1e-12, "{v}");
    }

    #[test]
    fn single_point_outer_shell() {
        for alpha in [0.05, 0.3, 0.9] {
            let params = DistanceParams::new(2.0, 1.0, 1.0, 0.1, DistanceMode::L1)
                .with_grid(16)
                .with_noise(Noise::Disabled);
            let idx = DistanceIndex::build(&[0.0], &[1.0], &params, &mut NoiseRng::from_seed(0)).unwrap();
            let v = idx.distance_query(2.0, alpha).unwrap();
            assert!(v >= 2.0 / (1.0 + alpha) && v <= 2.0, "{alpha}: {v}");
        }
    }

    #[test]
    fn on_point_query_is_zero() {
        let params = DistanceParams::new(1.0, 1.0, 1.0, 0.1, DistanceMode::L1).with_noise(Noise::Disabled);
        let idx = DistanceIndex::build(&[0.5], &[0.7], &params, &mut NoiseRng::from_seed(0)).unwrap();
        assert_eq!(idx.exact_rounded_distance(0.5).unwrap(), 0.0);
        assert_eq!(idx.distance_query(0.5, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn extreme_point_histogram() {
        let params = DistanceParams::new(3.0, 0.5, 1.0, 0.1, DistanceMode::L1).with_grid(7);
        let idx = DistanceIndex::build(&[3.0], &[0.5], &params, &mut NoiseRng::from_seed(0)).unwrap();
        assert_eq!(idx.histogram()[7], 0.5);
        let zeros = DistanceIndex::build(&[0.1, 0.2], &[0.0, 0.0], &params, &mut NoiseRng::from_seed(0)).unwrap();
        assert!(zeros.histogram().iter().all(|&c| c == 0.0));
        let v = zeros.distance_query(1.5, 0.5).unwrap();
        assert!(v.abs() <= zeros.noise_bound(1.5, 0.5).unwrap());
    }

    #[test]
    fn build_errors() {
        let p = DistanceParams::new(1.0, 1.0, 1.0, 0.1, DistanceMode::L1);
        let mut rng = NoiseRng::from_seed(0);
        assert!(DistanceIndex::build(&[], &[], &p, &mut rng).is_err());
        assert!(DistanceIndex::build(&[0.5], &[0.5, 0.1], &p, &mut rng).is_err());
        assert!(DistanceIndex::build(&[1.5], &[0.5], &p, &mut rng).is_err());
        assert!(DistanceIndex::build(&[0.5], &[1.5], &p, &mut rng).is_err());
        let idx = DistanceIndex::build(&[0.5], &[0.5], &p, &mut rng).unwrap();
        assert!(idx.distance_query(1.5, 0.1).is_err());
        assert!(idx.distance_query(0.5, 0.0).is_err());
        assert!(idx.distance_query(0.5, 1.0).is_err());
    }

    #[test]
    fn shells_are_disjoint_and_cover_everything_but_the_query_bucket() {
        let params = DistanceParams::new(1.0, 1.0, 1.0, 0.1, DistanceMode::L1).with_grid(97);
        let points: Vec<f64> = (0..97).map(|i| i as f64 / 97.0).collect();
        let idx = DistanceIndex::build(&points, &vec![1.0; 97], &params, &mut NoiseRng::from_seed(0)).unwrap();
        for mode_alpha in [0.01, 0.1, 0.5, 0.99] {
            for y in [0.0, 0.013, 0.5, 0.77, 1.0] {
                let k = round_to_grid(y, 1.0, 97).unwrap();
                let mut seen = vec![0u32; 98];
                for s in idx.shells(y, mode_alpha).unwrap() {
                    assert!(s.first <= s.last);
                    seen[s.first..=s.last].iter_mut().for_each(|c| *c += 1);
                }
                for (b, &count) in seen.iter().enumerate() {
                    assert_eq!(count, u32::from(b != k), "bucket {b} y={y} a={mode_alpha}");
                }
            }
        }
    }

    #[test]
    fn multipliers_overestimate_by_less_than_ratio() {
        for mode in [DistanceMode::L1, DistanceMode::L2Sq] {
            let params = DistanceParams::new(2.0, 1.0, 1.0, 0.1, mode).with_grid(200);
            let idx = DistanceIndex::build(&[0.0], &[1.0], &params, &mut NoiseRng::from_seed(0)).unwrap();
            for alpha in [0.05, 0.3] {
                let ratio = 1.0 + idx.internal_alpha(alpha);
                let y = 0.9;
                let k = round_to_grid(y, 2.0, 200).unwrap();
                for s in idx.shells(y, alpha).unwrap() {
                    for b in s.first..=s.last {
                        let d = (b as f64 - k as f64).abs() * 0.01;
                        let d = if mode == DistanceMode::L1 { d } else { d * d };
                        let exp = if mode == DistanceMode::L1 { 1 } else { 2 };
                        assert!(s.multiplier >= d * (1.0 - 1e-12));
                        assert!(s.multiplier < d * ratio.powi(exp) * (1.0 + 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn noise_bound_holds_for_every_query() {
        let mut rng = NoiseRng::from_seed(33);
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|_| rng.next_open01()).collect();
        let ws: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_open01() - 1.0).collect();
        for mode in [DistanceMode::L1, DistanceMode::L2Sq] {
            let params = DistanceParams::new(1.0, 1.0, 1.0, 0.01, mode);
            let idx = DistanceIndex::build(&xs, &ws, &params, &mut rng).unwrap();
            for i in 0..=20 {
                let y = i as f64 / 20.0;
                let gap = (idx.distance_query(y, 0.2).unwrap() - idx.bucketed_distance(y, 0.2).unwrap()).abs();
                assert!(gap <= idx.noise_bound(y, 0.2).unwrap());
            }
        }
    }
}
