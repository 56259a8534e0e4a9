//! `eval`: fresh builds compared against the exact oracles.
//!
//! Trial `t` builds with `NoiseRng::from_seed(seed).split(t)`. The distance
//! and softmax modes query row `t mod m` of `Q`; attention answers every row.
//! Distance modes use the first column of `V` as weights.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use dpxattn_core::adaptive::AdaptiveIndex;
use dpxattn_core::attention::AttentionLayer;
use dpxattn_core::distance::DistanceMode;
use dpxattn_core::highdim::HighDimIndex;
use dpxattn_core::oracle::{exact_attention, exact_softmax_query, exact_weighted_lp};
use dpxattn_core::softmax::SoftmaxIndex;
use dpxattn_core::{Matrix, NoiseRng};

use super::{adaptive_det_bound, adaptive_info, elapsed_ms, emit, shape, softmax_det_bound, softmax_info};
use crate::config::{EvalArgs, Mode, RunConfig};
use crate::dataset::Dataset;
use crate::error::{CliError, Result};
use crate::report::{Record, Report, StructureInfo};

pub fn run(args: &EvalArgs, out: &mut dyn Write) -> Result<Report> {
    let data = Dataset::load(&args.data)?;
    let mut cfg = RunConfig::new("eval", &args.privacy, &data);
    cfg.mode = Some(args.mode);
    cfg.trials = args.trials;
    cfg.validate(args.privacy.unsafe_test)?;
    if args.trials > 0 && data.m() == 0 {
        return Err(CliError::Validation("Q has no rows to query".into()));
    }

    let start = Instant::now();
    let results = (0..args.trials)
        .into_par_iter()
        .map(|t| {
            let t0 = Instant::now();
            let (mut records, info) = trial(&cfg, args.mode, &data, t)?;
            if args.output.timing {
                let ms = elapsed_ms(t0);
                records.iter_mut().for_each(|r| r.wall_ms = Some(ms));
            }
            Ok((records, info))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = Report::new(cfg.clone());
    if args.output.timing {
        report.build_ms = Some(elapsed_ms(start));
    }
    for (i, (records, info)) in results.into_iter().enumerate() {
        if i == 0 {
            report.structure = Some(info);
        }
        report.records.extend(records);
    }
    let (r, gamma, l) = report
        .structure
        .as_ref()
        .map(|s| (s.coords, s.gamma.unwrap_or(0.0), s.copies.unwrap_or(1)))
        .unwrap_or((0, 0.0, 1));
    let mode = args.mode;
    report.summarize(|_| shape(&cfg, mode, r, gamma, l));
    emit(&report, &args.output, out)?;
    Ok(report)
}

fn abs_softmax_truth(k: &Matrix, w: &[f64], y: &[f64]) -> f64 {
    let d = k.cols() as f64;
    k.iter_rows()
        .zip(w)
        .map(|(x, wi)| wi.abs() * (x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / d).exp())
        .sum()
}

/// Multiplicative allowance of the distance index: shells overestimate a
/// rounded gap by at most a factor `1 + α` (L1) or `(1 + α/2)^2` (squared
/// L2), and rounding moves each gap by at most one grid step `R/n`.
fn distance_allowance(k: &Matrix, w: &[f64], y: &[f64], radius: f64, alpha: f64, mode: DistanceMode) -> f64 {
    let step = radius / k.rows() as f64;
    let rel = match mode {
        DistanceMode::L1 => alpha,
        DistanceMode::L2Sq => (1.0 + alpha / 2.0).powi(2) - 1.0,
    };
    let mut total = 0.0;
    for (x, wi) in k.iter_rows().zip(w) {
        for (a, b) in x.iter().zip(y) {
            let g = (a - b).abs();
            total += wi.abs()
                * match mode {
                    DistanceMode::L1 => rel * (g + step) + step,
                    DistanceMode::L2Sq => rel * (g + step).powi(2) + 2.0 * g * step + step * step,
                };
        }
    }
    total
}

fn trial(cfg: &RunConfig, mode: Mode, data: &Dataset, t: usize) -> Result<(Vec<Record>, StructureInfo)> {
    let mut rng = NoiseRng::from_seed(cfg.seed).split(t as u64);
    let k = &data.keys;
    let w = data.values.column(0);
    let qi = t % data.m();
    let y = data.queries.row(qi);
    let alpha = cfg.alpha;
    let label = match mode {
        Mode::L1 => "l1",
        Mode::L2sq => "l2sq",
        Mode::Softmax => "softmax",
        Mode::Adaptive => "adaptive",
        Mode::Attention => "attention",
    };
    match mode {
        Mode::L1 | Mode::L2sq => {
            let (dm, p) = if mode == Mode::L1 { (DistanceMode::L1, 1) } else { (DistanceMode::L2Sq, 2) };
            let index = HighDimIndex::build(k, &w, &cfg.highdim(dm), &mut rng)?;
            let truth = exact_weighted_lp(k, &w, y, p)?;
            let est = index.distance_query(y, alpha)?;
            let allowance = distance_allowance(k, &w, y, cfg.radius, alpha, dm);
            let det = index.noise_bound(y, alpha)?;
            let (coord_epsilon, coord_delta) = index.coord_budget();
            let info = StructureInfo {
                kind: label,
                structure_epsilon: cfg.epsilon,
                structure_delta: cfg.delta,
                structure_delta_prime: cfg.delta_prime,
                coord_epsilon,
                coord_delta,
                coords: index.dim(),
                ..StructureInfo::default()
            };
            Ok((vec![Record::new(label, t, qi, truth, est, allowance, det)], info))
        }
        Mode::Softmax => {
            let index = SoftmaxIndex::build(k, &w, &cfg.softmax(), &mut rng)?;
            let truth = exact_softmax_query(k, &w, y)?;
            let est = index.query(y, alpha)?;
            let allowance = (alpha + cfg.epsilon_s) * abs_softmax_truth(k, &w, y);
            let det = softmax_det_bound(&index, y, alpha)?;
            let info = softmax_info(label, &index, cfg.epsilon, cfg.delta, cfg.delta_prime);
            Ok((vec![Record::new(label, t, qi, truth, est, allowance, det)], info))
        }
        Mode::Adaptive => {
            let index = AdaptiveIndex::build(k, &w, &cfg.adaptive(), &mut rng)?;
            let truth = exact_softmax_query(k, &w, y)?;
            let est = index.query(y, alpha)?;
            let allowance = (alpha + cfg.epsilon_s) * abs_softmax_truth(k, &w, y);
            let det = adaptive_det_bound(&index, y, alpha)?;
            let info = adaptive_info(label, &index, cfg.epsilon, cfg.delta, cfg.delta_prime);
            Ok((vec![Record::new(label, t, qi, truth, est, allowance, det)], info))
        }
        Mode::Attention => attention_trial(cfg, data, t, &mut rng),
    }
}

/// Entry `(i, c)` errs by `|num - num_true| / D` with the exact normalizer,
/// and `D >= n` because keys and queries are nonnegative, so the numerator
/// guarantee divided by `n` bounds it.
fn attention_trial(cfg: &RunConfig, data: &Dataset, t: usize, rng: &mut NoiseRng) -> Result<(Vec<Record>, StructureInfo)> {
    let params = cfg.attention();
    let layer = AttentionLayer::build(&data.keys, &data.values, &params, rng)?;
    let truth = exact_attention(&data.queries, &data.keys, &data.values)?;
    let n = data.n() as f64;
    let alpha = cfg.alpha;
    let mut records = Vec::with_capacity(data.m() * data.d());
    for i in 0..data.m() {
        let q = data.queries.row(i);
        let est = layer.attend_row(q, alpha)?;
        for (c, column) in layer.columns().iter().enumerate() {
            let w = data.values.column(c);
            let allowance = (alpha + cfg.epsilon_s) * abs_softmax_truth(&data.keys, &w, q) / n;
            let det = adaptive_det_bound(column, q, alpha)? / n;
            let mut r = Record::new("attention", t, i, truth.get(i, c), est[c], allowance, det);
            r.column = Some(c);
            records.push(r);
        }
    }
    let sp = layer.structure_params().softmax;
    let info = StructureInfo {
        budget_parts: Some(params.budget_parts(data.d())),
        ..adaptive_info("attention", &layer.columns()[0], sp.epsilon, sp.delta, sp.delta_prime)
    };
    Ok((records, info))
}
