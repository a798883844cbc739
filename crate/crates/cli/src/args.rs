use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use phidep::rng::DEFAULT_SEED;
use phidep::{MissingPolicy, PhiFunction, TiePolicy};

#[derive(Debug, Parser, Serialize)]
#[command(name = "phidep", version, about = "Copula-based dependence between groups of variables")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Check that an input file and grouping are usable.
    Validate(ValidateArgs),
    /// Estimate the dependence between groups.
    Estimate(EstimateArgs),
    /// Fit a (nested) Archimedean copula by pseudo-likelihood.
    Fit(FitArgs),
    /// Draw a sample from a fully specified copula.
    Simulate(SimulateArgs),
    /// Dependence on rolling windows, with confidence bands.
    Rolling(RollingArgs),
    /// Two-period tests for a change in dependence.
    Contagion(ContagionArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ties {
    /// Reject tied observations.
    Error,
    /// Average the ranks of tied observations.
    Midrank,
}

impl From<Ties> for TiePolicy {
    fn from(t: Ties) -> Self {
        match t {
            Ties::Error => TiePolicy::Error,
            Ties::Midrank => TiePolicy::Midrank,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Missing {
    /// Drop rows with a missing cell.
    Drop,
    /// Reject inputs with missing cells.
    Error,
}

impl From<Missing> for MissingPolicy {
    fn from(m: Missing) -> Self {
        match m {
            Missing::Drop => MissingPolicy::DropRow,
            Missing::Error => MissingPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Uniform,
    Normal,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Artifact format (JSON by default, CSV for samples).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Random seed.
    #[arg(long, env = "PHIDEP_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// File of `key=value` lines, one flag per line; command-line flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Input file and its grouping.
#[derive(Debug, Args, Serialize)]
pub struct Input {
    /// CSV with a header row; an optional leading date column labels the rows.
    #[arg(long)]
    pub input: PathBuf,
    /// Group sizes, e.g. `2,2`.
    #[arg(long)]
    pub groups: String,
    /// Treat the input as prices and analyse daily log returns.
    #[arg(long)]
    pub log_returns: bool,
    #[arg(long, value_enum, default_value_t = Missing::Drop)]
    pub missing: Missing,
    #[arg(long, value_enum, default_value_t = Ties::Error)]
    pub ties: Ties,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: Input,
    /// Model: `gaussian`, or a family name to fit (`clayton`, `nested-gumbel`, ...).
    #[arg(long, default_value = "gaussian")]
    pub copula: String,
    /// mutual-information, pearson, hellinger, total-variation, jensen-shannon or power:<alpha>.
    #[arg(long, default_value = "mutual-information")]
    #[serde(serialize_with = "display")]
    pub phi: PhiFunction,
    /// Level of the Gaussian confidence interval.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Monte Carlo draws for parametric models and for numeric Gaussian integrals.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Use the general Monte Carlo form for the Hellinger generator.
    #[arg(long)]
    pub general_hellinger: bool,
    /// Bootstrap replicates for the parameter covariance (parametric models).
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: Input,
    /// Family, optionally with starting values, e.g. `nested-gumbel(th0=2; th1=3,d1=2; th2=3,d2=2)`.
    #[arg(long, alias = "copula")]
    pub family: String,
    /// Bootstrap replicates for the parameter covariance.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Fully specified model, e.g. `clayton(th=2,d=3)` or `gaussian:R.json`.
    #[arg(long)]
    pub copula: String,
    /// Number of rows.
    #[arg(long)]
    pub m: usize,
    /// Grouping for plain Archimedean models.
    #[arg(long)]
    pub groups: Option<String>,
    #[arg(long, value_enum, default_value_t = Scale::Uniform)]
    pub scale: Scale,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct RollingArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, default_value = "mutual-information")]
    #[serde(serialize_with = "display")]
    pub phi: PhiFunction,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 101)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct ContagionArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, default_value = "mutual-information")]
    #[serde(serialize_with = "display")]
    pub phi: PhiFunction,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Rows of the calm period, 1-based and inclusive, e.g. `1:548`.
    #[arg(long)]
    pub period1: String,
    /// Rows of the crisis period.
    #[arg(long)]
    pub period2: String,
    /// Rows of the period after the crisis (optional).
    #[arg(long)]
    pub period3: Option<String>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Validate(a) => &a.common,
            Command::Estimate(a) => &a.common,
            Command::Fit(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Rolling(a) => &a.common,
            Command::Contagion(a) => &a.common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Estimate(_) => "estimate",
            Command::Fit(_) => "fit",
            Command::Simulate(_) => "simulate",
            Command::Rolling(_) => "rolling",
            Command::Contagion(_) => "contagion",
        }
    }
}
