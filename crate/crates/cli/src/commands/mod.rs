pub mod attack;
pub mod attn;
pub mod eval;
pub mod gen;

use std::io::Write;
use std::time::Instant;

use dpxattn_core::adaptive::AdaptiveIndex;
use dpxattn_core::softmax::{discretization_bound, SoftmaxIndex};

use crate::config::{Mode, OutputArgs, RunConfig};
use crate::error::{CliError, Result};
use crate::report::{Report, Shape, StructureInfo};

/// Prints the summary table and writes the JSON report if asked.
pub(crate) fn emit(report: &Report, output: &OutputArgs, out: &mut dyn Write) -> Result<()> {
    let stdout = |e| CliError::io("<stdout>", e);
    write!(out, "{}", report.table()).map_err(stdout)?;
    if let Some(path) = &output.report {
        report.write(path)?;
        writeln!(out, "report written to {}", path.display()).map_err(stdout)?;
    }
    Ok(())
}

pub(crate) fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Frozen noise of the median plus the shell and rounding terms.
pub(crate) fn adaptive_det_bound(index: &AdaptiveIndex, y: &[f64], alpha: f64) -> Result<f64> {
    let first = &index.copies()[0];
    let py = first.kernel().feature_map(y)?;
    Ok(index.noise_bound(y, alpha)? + discretization_bound(first, &py, alpha))
}

pub(crate) fn softmax_det_bound(index: &SoftmaxIndex, y: &[f64], alpha: f64) -> Result<f64> {
    let py = index.kernel().feature_map(y)?;
    Ok(index.noise_bound(y, alpha)? + discretization_bound(index, &py, alpha))
}

pub(crate) fn softmax_info(kind: &'static str, index: &SoftmaxIndex, eps: f64, delta: f64, delta_prime: f64) -> StructureInfo {
    let (coord_epsilon, coord_delta) = index.coord_budget();
    StructureInfo {
        kind,
        structure_epsilon: eps,
        structure_delta: delta,
        structure_delta_prime: delta_prime,
        coord_epsilon,
        coord_delta,
        coords: index.coords().len(),
        degree: Some(index.kernel().degree()),
        gamma: Some(index.kernel().gamma()),
        copies: None,
        budget_parts: None,
    }
}

pub(crate) fn adaptive_info(kind: &'static str, index: &AdaptiveIndex, eps: f64, delta: f64, delta_prime: f64) -> StructureInfo {
    StructureInfo {
        copies: Some(index.len()),
        ..softmax_info(kind, &index.copies()[0], eps, delta, delta_prime)
    }
}

/// The asymptotic error form for `mode`, evaluated at `cfg`.
///
/// `features` is the kernel feature count `r`, `gamma` its entry bound and
/// `copies` the copy count `l`; distance modes ignore all three.
pub(crate) fn shape(cfg: &RunConfig, mode: Mode, features: usize, gamma: f64, copies: usize) -> Shape {
    let n = cfg.n.max(2) as f64;
    let logn = n.ln().powf(1.5);
    let base = logn / (cfg.epsilon * cfg.alpha.sqrt());
    let l = copies.max(1) as f64;
    let kernel = gamma * gamma * cfg.weight_bound * features as f64;
    match mode {
        Mode::L1 => Shape {
            form: "R R_w d sqrt(ln(1/delta')) ln^1.5(n) / (eps sqrt(alpha))",
            value: base * cfg.radius * cfg.weight_bound * cfg.d as f64 * (1.0 / cfg.delta_prime).ln().sqrt(),
        },
        Mode::L2sq => Shape {
            form: "R^2 R_w d sqrt(ln(1/delta')) ln^1.5(n) / (eps sqrt(alpha))",
            value: base * cfg.radius.powi(2) * cfg.weight_bound * cfg.d as f64 * (1.0 / cfg.delta_prime).ln().sqrt(),
        },
        Mode::Softmax => Shape {
            form: "Gamma^2 R_w r sqrt(ln(1/delta')) ln^1.5(n) / (eps sqrt(alpha))",
            value: base * kernel * (1.0 / cfg.delta_prime).ln().sqrt(),
        },
        Mode::Adaptive => Shape {
            form: "l Gamma^2 R_w r sqrt(ln(l/delta')) ln^1.5(n) / (eps sqrt(alpha))",
            value: base * kernel * l * (l / cfg.delta_prime).ln().sqrt(),
        },
        Mode::Attention => Shape {
            form: "l Gamma^2 R_w r sqrt(ln(l/delta')) ln^1.5(n) / (n eps sqrt(alpha))",
            value: base * kernel * l * (l / cfg.delta_prime).ln().sqrt() / n,
        },
    }
}
