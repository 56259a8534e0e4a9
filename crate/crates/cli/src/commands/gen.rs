//! `gen`: a seeded uniform instance. Keys and queries are uniform on
//! `[0, R]^d`, values uniform on `[-R_w, R_w]`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use dpxattn_core::Matrix;

use crate::config::GenArgs;
use crate::dataset::{Dataset, KEYS_FILE, QUERIES_FILE, VALUES_FILE};
use crate::error::{CliError, Result};

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "R_w")]
    pub weight_bound: f64,
    pub seed: u64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct GenReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: GenConfig,
    pub files: Vec<&'static str>,
}

pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    let bad = |m: String| Err(CliError::Validation(m));
    if cfg.n == 0 || cfg.d == 0 {
        return bad("--n and --d must be at least 1".into());
    }
    if !(cfg.radius.is_finite() && cfg.radius > 0.0) {
        return bad(format!("--radius must be positive and finite, got {}", cfg.radius));
    }
    if !(cfg.weight_bound.is_finite() && cfg.weight_bound > 0.0) {
        return bad(format!("--weight-bound must be positive and finite, got {}", cfg.weight_bound));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut uniform = |rows: usize, lo: f64, hi: f64| {
        let data = (0..rows * cfg.d).map(|_| rng.random_range(lo..=hi)).collect();
        Matrix::new(rows, cfg.d, data)
    };
    let keys = uniform(cfg.n, 0.0, cfg.radius)?;
    let values = uniform(cfg.n, -cfg.weight_bound, cfg.weight_bound)?;
    let queries = uniform(cfg.m, 0.0, cfg.radius)?;
    Ok(Dataset {
        keys,
        values,
        queries,
        radius: cfg.radius,
        weight_bound: cfg.weight_bound,
    })
}

pub fn run(args: &GenArgs, out: &mut dyn Write) -> Result<GenReport> {
    let config = GenConfig {
        n: args.n,
        m: args.m,
        d: args.d,
        radius: args.radius,
        weight_bound: args.weight_bound,
        seed: args.seed,
    };
    let data = generate(&config)?;
    data.save(&args.out)?;
    let report = GenReport {
        schema_version: crate::report::SCHEMA_VERSION,
        command: "gen",
        config,
        files: vec![KEYS_FILE, VALUES_FILE, QUERIES_FILE],
    };
    if let Some(path) = &args.output.report {
        let mut s = serde_json::to_string_pretty(&report)?;
        s.push('\n');
        std::fs::write(path, s).map_err(|e| CliError::io(path, e))?;
    }
    let stdout = |e| CliError::io("<stdout>", e);
    let (n, m, d) = (args.n, args.m, args.d);
    writeln!(out, "file   rows  cols").map_err(stdout)?;
    for (f, rows) in [(KEYS_FILE, n), (VALUES_FILE, n), (QUERIES_FILE, m)] {
        writeln!(out, "{f:<5}  {rows:>4}  {d:>4}").map_err(stdout)?;
    }
    writeln!(out, "written to {}", args.out.display()).map_err(stdout)?;
    Ok(report)
}
