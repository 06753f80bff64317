//! Command-line experiment driver for `eigenmap-core`: builds cases from a
//! TOML config, runs the extremal-metric pipeline, perturbation sweeps,
//! refinement studies and multistart checks, and writes CSV and SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cases;
pub mod commands;
pub mod config;
pub mod perturb;
pub mod plot;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use eigenmap_core::Error;

pub use commands::Context;
pub use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration; exit code 2.
    Usage(String),
    /// Failure reported by the numerical core; exit code 1.
    Module(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Module(_) | Self::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Module(e) => write!(f, "{}: {e}", e.name()),
            Self::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Module(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "eigenmap",
    version,
    about = "Extremal metrics from n-harmonic maps to spheres"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed, overriding `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress the summary on standard output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Minimize, rescale, normalize and check one case.
    Pipeline,
    /// Run the pipeline over seeded metric perturbations.
    PerturbSweep,
    /// Projection energy and bound terms across icosphere levels.
    BoundStudy,
    /// Multistart minimization and alignment of the results.
    Uniqueness,
    /// Low Laplace spectrum of the case metric.
    Spectrum,
    /// Mesh statistics.
    MeshInfo,
}

impl Cli {
    pub fn context(&self) -> Result<Context, CliError> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = &self.out {
            config.output.dir = o.clone();
        }
        let mut ctx = Context::new(config);
        ctx.quiet = self.quiet;
        Ok(ctx)
    }
}

pub fn run(command: Command, ctx: &Context) -> Result<(), CliError> {
    match command {
        Command::Pipeline => commands::cmd_pipeline(ctx).map(drop),
        Command::PerturbSweep => commands::cmd_perturb_sweep(ctx).map(drop),
        Command::BoundStudy => commands::cmd_bound_study(ctx).map(drop),
        Command::Uniqueness => commands::cmd_uniqueness(ctx).map(drop),
        Command::Spectrum => commands::cmd_spectrum(ctx).map(drop),
        Command::MeshInfo => commands::cmd_mesh_info(ctx).map(drop),
    }
}
