//! Library side of the `dipsym` command-line tool.

pub mod commands;
pub mod data;
pub mod spec;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<dipsym::Error> for CliError {
    fn from(e: dipsym::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dipsym",
    version,
    about = "Posterior inference for symmetric distributions with Dirichlet invariant processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a data set from a distribution and write it as CSV.
    Gen(Opts),
    /// Fit a posterior to a CSV data set and write it as JSON.
    Fit(Opts),
    /// Sample posterior paths as JSON lines.
    Sample(Opts),
    /// Run a k-sweep or m-sweep and write a report.
    Converge(Opts),
    /// Check sampled paths against moment formulas or group invariance.
    Check(Opts),
}

/// Every flag of every command. A `--config` JSON file may supply any of
/// them under the same names; flags given on the command line win.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Opts {
    /// JSON file with default values for the other flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Concentration parameter of the prior.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Prior base: gauss2d[:SIGMA], disk[:R], square, gauss1d[:MU:SIGMA], gauss3d[:SIGMA].
    #[arg(long)]
    pub base: Option<String>,
    /// cyclic2d:K, reflection:MU, cyclic3d:K:AX:AY:AZ or limit[:K_SYM].
    #[arg(long)]
    pub group: Option<String>,
    /// Distribution for `gen` and the true law for m-sweeps (same syntax as --base).
    #[arg(long)]
    pub dist: Option<String>,
    /// Number of points for `gen`.
    #[arg(long)]
    pub m: Option<usize>,
    /// Finite-N sampler with this many atoms.
    #[arg(long)]
    pub n_atoms: Option<usize>,
    /// Stick-breaking residual tolerance.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub k_levels: Option<String>,
    #[arg(long)]
    pub m_levels: Option<String>,
    /// k-sweep or m-sweep.
    #[arg(long)]
    pub mode: Option<String>,
    /// moments or invariance.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    /// JSON array of boxes `{"low": [...], "high": [...]}`.
    #[arg(long)]
    pub boxes: Option<PathBuf>,
    /// Cells per axis of the m-sweep box grid.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Random boxes per path for invariance checks.
    #[arg(long)]
    pub n_boxes: Option<usize>,
    /// Multiply path weights in the first bounded box by 1 + DISTORT (negative control).
    #[arg(long)]
    pub distort: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Opts {
    /// Fills unset flags from `--config`.
    pub fn merged(self) -> Result<Opts, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = data::read(&path)?;
        let file: Opts =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        macro_rules! pick {
            ($($f:ident),*) => { Opts { config: self.config, $($f: self.$f.or(file.$f)),* } };
        }
        Ok(pick!(
            seed, alpha, base, group, dist, m, n_atoms, eps, reps, k_levels, m_levels, mode, kind, data, posterior,
            boxes, grid, n_boxes, distort, out
        ))
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(o) => commands::gen(&o.merged()?),
        Command::Fit(o) => commands::fit(&o.merged()?),
        Command::Sample(o) => commands::sample(&o.merged()?),
        Command::Converge(o) => commands::converge(&o.merged()?),
        Command::Check(o) => commands::check(&o.merged()?),
    }
}
