//! JSON reports and the summary table printed on stdout.
//!
//! A report holds the echoed config, the built structure's parameters, one
//! record per compared value, and a summary per label. Nothing in it depends
//! on the clock unless `--timing` was given, so identical configs produce
//! identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Parameters of the structure a run built.
#[derive(Serialize, Debug, Clone, Default, PartialEq)]
pub struct StructureInfo {
    pub kind: &'static str,
    /// Total `ε` handed to one structure (after any attention split).
    pub structure_epsilon: f64,
    pub structure_delta: f64,
    pub structure_delta_prime: f64,
    /// `(ε, δ)` of one coordinate index.
    pub coord_epsilon: f64,
    pub coord_delta: f64,
    pub coords: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub copies: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_parts: Option<usize>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Record {
    pub label: String,
    pub trial: usize,
    /// Row of Q, or the grid point index for attacks.
    pub query: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    pub truth: f64,
    pub estimate: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// Multiplicative part of the guarantee, already scaled by the truth.
    pub relative_allowance: f64,
    /// Deterministic additive bound: frozen noise plus discretization.
    pub det_bound: f64,
    pub within_bound: bool,
    /// `max(0, abs_error - relative_allowance)`.
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

impl Record {
    pub fn new(label: &str, trial: usize, query: usize, truth: f64, estimate: f64, allowance: f64, det: f64) -> Self {
        let abs_error = (estimate - truth).abs();
        let rel_error = if truth != 0.0 { abs_error / truth.abs() } else { abs_error };
        // Absorbs last-bit differences between the oracle and the structure.
        let slack = 1e-9 * (1.0 + truth.abs());
        Self {
            label: label.to_string(),
            trial,
            query,
            column: None,
            point: None,
            truth,
            estimate,
            abs_error,
            rel_error,
            relative_allowance: allowance,
            det_bound: det,
            within_bound: abs_error <= allowance + det + slack,
            residual: (abs_error - allowance).max(0.0),
            wall_ms: None,
        }
    }
}

/// The asymptotic error form of a structure, evaluated at the run's config.
#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Shape {
    pub form: &'static str,
    pub value: f64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Summary {
    pub label: String,
    pub count: usize,
    pub within_fraction: f64,
    pub p50_abs_error: f64,
    pub p90_abs_error: f64,
    pub p99_abs_error: f64,
    pub max_abs_error: f64,
    /// Largest `abs_error / (relative_allowance + det_bound)`.
    pub max_error_over_bound: f64,
    pub max_det_bound: f64,
    pub shape: Shape,
    /// Smallest `C` with `residual <= C * shape` on every record.
    pub fitted_constant: f64,
    /// Same for the deterministic bound.
    pub bound_constant: f64,
}

impl Summary {
    pub fn of(label: &str, records: &[&Record], shape: Shape) -> Self {
        let mut errors: Vec<f64> = records.iter().map(|r| r.abs_error).collect();
        errors.sort_by(f64::total_cmp);
        let count = records.len();
        let within = records.iter().filter(|r| r.within_bound).count();
        let max_of = |f: &dyn Fn(&Record) -> f64| records.iter().map(|r| f(r)).fold(0.0, f64::max);
        let per_shape = |x: f64| if shape.value > 0.0 { x / shape.value } else { 0.0 };
        Self {
            label: label.to_string(),
            count,
            within_fraction: if count == 0 { 0.0 } else { within as f64 / count as f64 },
            p50_abs_error: quantile(&errors, 0.5),
            p90_abs_error: quantile(&errors, 0.9),
            p99_abs_error: quantile(&errors, 0.99),
            max_abs_error: errors.last().copied().unwrap_or(0.0),
            max_error_over_bound: max_of(&|r| {
                let b = r.relative_allowance + r.det_bound;
                if b > 0.0 {
                    r.abs_error / b
                } else {
                    0.0
                }
            }),
            max_det_bound: max_of(&|r| r.det_bound),
            fitted_constant: per_shape(max_of(&|r| r.residual)),
            bound_constant: per_shape(max_of(&|r| r.det_bound)),
            shape,
        }
    }
}

/// Nearest-rank quantile of sorted data; 0 when empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureInfo>,
    pub records: Vec<Record>,
    pub summaries: Vec<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub build_ms: Option<f64>,
}

impl Report {
    pub fn new(config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: config.command,
            config,
            structure: None,
            records: Vec::new(),
            summaries: Vec::new(),
            build_ms: None,
        }
    }

    /// One summary per distinct label, in order of first appearance.
    pub fn summarize(&mut self, shape: impl Fn(&str) -> Shape) {
        let mut labels: Vec<&str> = Vec::new();
        for r in &self.records {
            if !labels.contains(&r.label.as_str()) {
                labels.push(&r.label);
            }
        }
        self.summaries = labels
            .iter()
            .map(|&l| {
                let rs: Vec<&Record> = self.records.iter().filter(|r| r.label == l).collect();
                Summary::of(l, &rs, shape(l))
            })
            .collect();
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| CliError::io(path, e))
    }

    pub fn table(&self) -> String {
        let header = ["label", "count", "within", "p50", "p90", "p99", "max", "err/bound", "C_fit", "C_bound"];
        let rows: Vec<[String; 10]> = self
            .summaries
            .iter()
            .map(|s| {
                [
                    s.label.clone(),
                    s.count.to_string(),
                    format!("{:.4}", s.within_fraction),
                    sci(s.p50_abs_error),
                    sci(s.p90_abs_error),
                    sci(s.p99_abs_error),
                    sci(s.max_abs_error),
                    format!("{:.4}", s.max_error_over_bound),
                    sci(s.fitted_constant),
                    sci(s.bound_constant),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i == 0 {
                    let _ = write!(out, "{c:<w$}");
                } else {
                    let _ = write!(out, "  {c:>w$}");
                }
            }
            out.push('\n');
        };
        line(&mut out, &header);
        for r in &rows {
            let cells: Vec<&str> = r.iter().map(String::as_str).collect();
            line(&mut out, &cells);
        }
        out
    }
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}
