//! Command-line front end: TOML spec files in, JSON reports out.
//!
//! Exit codes: 0 when the command ran (and its checks passed, where a
//! failure matters), 1 when a mathematical check failed, 2 for input and
//! usage errors.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rhoconn::sampling::{DEFAULT_SAMPLES, DEFAULT_SEED};
use rhoconn::transport::DEFAULT_STEPS;
use thiserror::Error;

pub mod commands;
pub mod report;
pub mod specfile;

pub use report::{Check, Report};
pub use specfile::{load_spec, parse_spec, SpecFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}:{col}: {message}")]
    Toml { path: String, line: usize, col: usize, message: String },
    #[error("{path}: {field}: offset {offset} in `{source_text}`: {message}")]
    Expr { path: String, field: String, offset: usize, source_text: String, message: String },
    #[error("{path}: {message}")]
    Spec { path: String, message: String },
    #[error("{path}: invalid bundle spec: {}", .violations.join("; "))]
    InvalidSpec { path: String, violations: Vec<String> },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] rhoconn::Error),
}

#[derive(Debug, Parser)]
#[command(name = "rhoconn", version, about = "Connections on anchored bundles: checks, transport and covariant derivatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Sampling {
    /// Seed of every randomized check.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Number of random sample points per check.
    #[arg(long, default_value_t = DEFAULT_SAMPLES as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Linear,
    Affine,
    Commutation,
    Leibniz,
    E0,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Linear => "linear",
            Suite::Affine => "affine",
            Suite::Commutation => "commutation",
            Suite::Leibniz => "leibniz",
            Suite::E0 => "e0",
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct TransportArgs {
    pub spec: PathBuf,
    /// Components of c(t), one expression in t per V direction.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub curve: Vec<String>,
    /// Start point of the base path.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    /// Initial fibre value.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_STEPS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: u64,
    /// Number of equally spaced times at which the path is reported.
    #[arg(long, default_value_t = 11, value_parser = clap::value_parser!(u64).range(2..))]
    pub points: u64,
    /// Closed-form psi(t) to compare against, one expression in t per component.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub oracle: Vec<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub oracle_tol: f64,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CovderivArgs {
    pub spec: PathBuf,
    /// Section of V, one expression in x per component.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub zeta: Vec<String>,
    /// Section of E, one expression in x per component.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub sigma: Vec<String>,
    /// Base point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    #[command(flatten)]
    pub sampling: Sampling,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a spec, spot-check the splitting and classify the connection.
    Validate {
        spec: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Integrate an admissible curve and the horizontal lift through y0.
    Transport(TransportArgs),
    /// Run one randomized check suite.
    Checks {
        spec: PathBuf,
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Connection coefficients of the [sode] block and its affine verdict.
    Sode {
        spec: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Evaluate the covariant derivative of an affine connection at a point.
    Covderiv(CovderivArgs),
}

/// What a finished command prints and returns.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: u8,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Validate { spec, sampling } => commands::validate(spec, sampling),
        Command::Transport(args) => commands::transport(args),
        Command::Checks { spec, suite, sampling } => commands::checks(spec, *suite, sampling),
        Command::Sode { spec, sampling } => commands::sode(spec, sampling),
        Command::Covderiv(args) => commands::covderiv(args),
    }
}
