//! `attack`: a greedy adaptive attacker on a grid over `[0, R]^d`, `d <= 2`.
//!
//! The attacker knows the truth and sees every answer. It starts at the grid
//! center; each round it walks the points queried so far from the largest
//! observed error down and moves to the first unqueried neighbour (8-neighbour
//! in 2-d). It stops early if every neighbour of every queried point has been
//! asked. Two targets face independent attackers: a single copy (`l = 1`) and
//! the median of `l` copies (formula or `--l-override`).

use std::io::Write;
use std::time::Instant;

use dpxattn_core::adaptive::AdaptiveIndex;
use dpxattn_core::oracle::exact_softmax_query;
use dpxattn_core::{Matrix, NoiseRng};

use super::{adaptive_det_bound, adaptive_info, elapsed_ms, emit, shape};
use crate::config::{AttackArgs, Mode, RunConfig};
use crate::dataset::Dataset;
use crate::error::{CliError, Result};
use crate::report::{Record, Report};

pub const SINGLE: &str = "single";
pub const ADAPTIVE: &str = "adaptive";

pub fn run(args: &AttackArgs, out: &mut dyn Write) -> Result<Report> {
    let data = Dataset::load(&args.data)?;
    let mut cfg = RunConfig::new("attack", &args.privacy, &data);
    cfg.mode = Some(Mode::Adaptive);
    cfg.grid = Some(args.grid);
    cfg.rounds = Some(args.rounds);
    cfg.validate(args.privacy.unsafe_test)?;
    if data.d() > 2 {
        return Err(CliError::Validation(format!(
            "the grid attack needs d <= 2, data has d = {}",
            data.d()
        )));
    }
    if args.grid < 2 {
        return Err(CliError::Validation("--grid must be at least 2".into()));
    }

    let root = NoiseRng::from_seed(cfg.seed);
    let w = data.values.column(0);
    let start = Instant::now();
    let mut single_params = cfg.adaptive();
    single_params.copies = Some(1);
    let single = AdaptiveIndex::build(&data.keys, &w, &single_params, &mut root.split(0))?;
    let adaptive = AdaptiveIndex::build(&data.keys, &w, &cfg.adaptive(), &mut root.split(1))?;

    let mut report = Report::new(cfg.clone());
    let grid = Grid::new(data.d(), args.grid, cfg.radius);
    for (label, index) in [(SINGLE, &single), (ADAPTIVE, &adaptive)] {
        report.records.extend(attack(label, index, &data.keys, &w, &grid, &cfg, args)?);
    }
    if args.output.timing {
        report.build_ms = Some(elapsed_ms(start));
    }
    report.structure = Some(adaptive_info("adaptive", &adaptive, cfg.epsilon, cfg.delta, cfg.delta_prime));
    let r = adaptive.copies()[0].kernel().features();
    let gamma = adaptive.copies()[0].kernel().gamma();
    let l = adaptive.len();
    report.summarize(|label| shape(&cfg, Mode::Adaptive, r, gamma, if label == SINGLE { 1 } else { l }));
    emit(&report, &args.output, out)?;
    Ok(report)
}

struct Grid {
    dim: usize,
    side: usize,
    radius: f64,
}

impl Grid {
    fn new(dim: usize, side: usize, radius: f64) -> Self {
        Self { dim, side, radius }
    }

    fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    fn coords(&self, p: usize) -> Vec<usize> {
        (0..self.dim).map(|k| (p / self.side.pow(k as u32)) % self.side).collect()
    }

    fn point(&self, p: usize) -> Vec<f64> {
        let step = self.radius / (self.side - 1) as f64;
        self.coords(p).into_iter().map(|i| (i as f64 * step).min(self.radius)).collect()
    }

    fn center(&self) -> usize {
        let c = (self.side - 1) / 2;
        (0..self.dim).map(|k| c * self.side.pow(k as u32)).sum()
    }

    /// Neighbours in a fixed order: offsets -1, 0, +1 per axis, first axis fastest.
    fn neighbours(&self, p: usize) -> Vec<usize> {
        let c = self.coords(p);
        let mut out = Vec::new();
        for combo in 0..3usize.pow(self.dim as u32) {
            let mut q = 0;
            let mut ok = true;
            let mut moved = false;
            for (k, &ck) in c.iter().enumerate() {
                let off = (combo / 3usize.pow(k as u32)) % 3;
                moved |= off != 1;
                let v = ck as isize + off as isize - 1;
                if v < 0 || v >= self.side as isize {
                    ok = false;
                    break;
                }
                q += v as usize * self.side.pow(k as u32);
            }
            if ok && moved {
                out.push(q);
            }
        }
        out
    }
}

fn attack(
    label: &str,
    index: &AdaptiveIndex,
    keys: &Matrix,
    w: &[f64],
    grid: &Grid,
    cfg: &RunConfig,
    args: &AttackArgs,
) -> Result<Vec<Record>> {
    let alpha = cfg.alpha;
    let d = keys.cols() as f64;
    let mut visited = vec![false; grid.len()];
    // (error, point), kept sorted by descending error then ascending point.
    let mut seen: Vec<(f64, usize)> = Vec::new();
    let mut records = Vec::new();
    let mut next = Some(grid.center());
    for round in 0..args.rounds {
        let Some(p) = next else { break };
        visited[p] = true;
        let y = grid.point(p);
        let t0 = Instant::now();
        let est = index.query(&y, alpha)?;
        let truth = exact_softmax_query(keys, w, &y)?;
        let abs_truth: f64 = keys
            .iter_rows()
            .zip(w)
            .map(|(x, wi)| wi.abs() * (x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / d).exp())
            .sum();
        let det = adaptive_det_bound(index, &y, alpha)?;
        let mut r = Record::new(label, round, p, truth, est, (alpha + cfg.epsilon_s) * abs_truth, det);
        r.point = Some(y);
        if args.output.timing {
            r.wall_ms = Some(elapsed_ms(t0));
        }
        let pos = seen.partition_point(|&(e, q)| e > r.abs_error || (e == r.abs_error && q < p));
        seen.insert(pos, (r.abs_error, p));
        records.push(r);
        next = seen
            .iter()
            .find_map(|&(_, q)| grid.neighbours(q).into_iter().find(|&nb| !visited[nb]));
    }
    Ok(records)
}
