//! Command-line arguments and their validated form.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dpxattn_core::adaptive::AdaptiveParams;
use dpxattn_core::attention::{AttentionParams, Normalizer};
use dpxattn_core::highdim::{check_composition, HighDimParams};
use dpxattn_core::distance::DistanceMode;
use dpxattn_core::softmax::{ScalarRelease, SoftmaxParams};
use dpxattn_core::Noise;

use crate::dataset::Dataset;
use crate::error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "dpxattn", version, about = "Differentially private distance, softmax, and cross-attention queries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic instance (K.csv, V.csv, Q.csv) to a directory.
    Gen(GenArgs),
    /// Build a structure repeatedly and compare its answers to the exact oracle.
    Eval(EvalArgs),
    /// Run the greedy adaptive grid attacker against one and l copies.
    Attack(AttackArgs),
    /// Private attention for every query row.
    Attn(AttnArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// Number of keys.
    #[arg(long)]
    pub n: usize,
    /// Number of queries.
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    /// Dimension.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Keys and queries are drawn from [0, R]^d.
    #[arg(long = "radius", default_value_t = 1.0)]
    pub radius: f64,
    /// Values are drawn from [-R_w, R_w].
    #[arg(long = "weight-bound", default_value_t = 1.0)]
    pub weight_bound: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct PrivacyArgs {
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long = "delta-prime", default_value_t = 0.01)]
    pub delta_prime: f64,
    /// Relative accuracy of the distance shells, in (0, 1).
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    /// Kernel accuracy, in (0, 0.1].
    #[arg(long = "epsilon-s", default_value_t = 0.05)]
    pub epsilon_s: f64,
    /// Failure probability for the copy count, in (0, 0.01].
    #[arg(long = "p-f", default_value_t = 0.01)]
    pub p_f: f64,
    /// Advanced-composition constant c, in (0, 0.1).
    #[arg(long = "c-split", default_value_t = 0.05)]
    pub c_split: f64,
    /// Fixed copy count instead of ceil(r ln(dR / (eps_s p_f))).
    #[arg(long = "l-override")]
    pub l_override: Option<usize>,
    #[arg(long, value_enum, default_value_t = NormalizerArg::Exact)]
    pub normalizer: NormalizerArg,
    /// `off` disables all noise; requires --unsafe-test.
    #[arg(long, value_enum, default_value_t = NoiseArg::On)]
    pub noise: NoiseArg,
    /// Permit non-private settings meant for testing.
    #[arg(long = "unsafe-test")]
    pub unsafe_test: bool,
    /// Divide the budget over all d columns (whole-row privacy).
    #[arg(long = "compose-columns")]
    pub compose_columns: bool,
    /// Add noise to P_wx and s_w as well, splitting the budget.
    #[arg(long = "noisy-scalars")]
    pub noisy_scalars: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Record wall-clock times (reports are then no longer reproducible byte for byte).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Directory holding K.csv, V.csv, Q.csv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Softmax)]
    pub mode: Mode,
    /// Independent builds; trial t queries row t mod m of Q.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[command(flatten)]
    pub privacy: PrivacyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct AttackArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Grid points per axis.
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    #[command(flatten)]
    pub privacy: PrivacyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct AttnArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output matrix (same CSV format as the inputs).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub privacy: PrivacyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    L1,
    L2sq,
    Softmax,
    Adaptive,
    Attention,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerArg {
    Exact,
    Private,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum NoiseArg {
    On,
    Off,
}

/// Every parameter of a run, echoed into its report.
#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "R_w")]
    pub weight_bound: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub c_split: f64,
    pub epsilon_s: f64,
    pub alpha: f64,
    pub p_f: f64,
    pub l_override: Option<usize>,
    pub normalizer: NormalizerArg,
    pub noise: NoiseArg,
    pub compose_columns: bool,
    pub noisy_scalars: bool,
    pub seed: u64,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
}

impl RunConfig {
    pub fn new(command: &'static str, p: &PrivacyArgs, data: &Dataset) -> Self {
        Self {
            command,
            mode: None,
            n: data.n(),
            m: data.m(),
            d: data.d(),
            radius: data.radius,
            weight_bound: data.weight_bound,
            epsilon: p.epsilon,
            delta: p.delta,
            delta_prime: p.delta_prime,
            c_split: p.c_split,
            epsilon_s: p.epsilon_s,
            alpha: p.alpha,
            p_f: p.p_f,
            l_override: p.l_override,
            normalizer: p.normalizer,
            noise: p.noise,
            compose_columns: p.compose_columns,
            noisy_scalars: p.noisy_scalars,
            seed: p.seed,
            trials: 0,
            grid: None,
            rounds: None,
        }
    }

    /// Checks every parameter domain; nothing is built before this passes.
    pub fn validate(&self, unsafe_test: bool) -> Result<()> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.noise == NoiseArg::Off && !unsafe_test {
            return bad("--noise off releases exact answers; it requires --unsafe-test".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("--alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.epsilon_s > 0.0 && self.epsilon_s <= 0.1) {
            return bad(format!("--epsilon-s must lie in (0, 0.1], got {}", self.epsilon_s));
        }
        if !(self.p_f > 0.0 && self.p_f <= 0.01) {
            return bad(format!("--p-f must lie in (0, 0.01], got {}", self.p_f));
        }
        if self.l_override == Some(0) {
            return bad("--l-override must be at least 1".into());
        }
        check_composition(self.epsilon, self.delta, self.delta_prime, self.c_split)?;
        let kernel_modes = !matches!(self.mode, Some(Mode::L1) | Some(Mode::L2sq));
        if kernel_modes && self.radius < 1.0 {
            return bad(format!("kernel structures need R >= 1, data declares R={}", self.radius));
        }
        Ok(())
    }

    pub fn noise(&self) -> Noise {
        match self.noise {
            NoiseArg::On => Noise::Enabled,
            NoiseArg::Off => Noise::Disabled,
        }
    }

    pub fn highdim(&self, mode: DistanceMode) -> HighDimParams {
        HighDimParams {
            split: self.c_split,
            noise: self.noise(),
            ..HighDimParams::new(self.radius, self.weight_bound, self.epsilon, self.delta, self.delta_prime, mode)
        }
    }

    pub fn softmax(&self) -> SoftmaxParams {
        SoftmaxParams {
            split: self.c_split,
            scalars: if self.noisy_scalars {
                ScalarRelease::Noisy
            } else {
                ScalarRelease::Exact
            },
            noise: self.noise(),
            ..SoftmaxParams::new(
                self.radius,
                self.weight_bound,
                self.epsilon,
                self.delta,
                self.delta_prime,
                self.epsilon_s,
            )
        }
    }

    pub fn adaptive(&self) -> AdaptiveParams {
        AdaptiveParams {
            copies: self.l_override,
            ..AdaptiveParams::new(self.softmax(), self.p_f)
        }
    }

    pub fn attention(&self) -> AttentionParams {
        AttentionParams {
            normalizer: match self.normalizer {
                NormalizerArg::Exact => Normalizer::Exact,
                NormalizerArg::Private => Normalizer::Private,
            },
            compose_columns: self.compose_columns,
            ..AttentionParams::new(self.adaptive())
        }
    }
}
