//! `surro` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(name = "surro", version, about = "Surrogate modeling and design-space exploration")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

/// Shared sampling/search seed. All randomness flows from it; when the
/// SURRO_TEST_MODE environment variable is set, omitting it is a usage error.
#[derive(Args, Debug)]
struct SeedArg {
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> Result<u64, CliError> {
        match self.seed {
            Some(s) => Ok(s),
            None if std::env::var_os("SURRO_TEST_MODE").is_some() => Err(CliError::Usage(
                "--seed is required when SURRO_TEST_MODE is set".into(),
            )),
            None => Ok(0),
        }
    }
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Linear solver: direct | cg
    #[arg(long, default_value = "direct")]
    solver: String,
    /// CG convergence threshold on the residual norm.
    #[arg(long, default_value_t = 1e-8)]
    cg_eps: f64,
    /// CG iteration cap.
    #[arg(long, default_value_t = 1000)]
    cg_maxiter: usize,
    /// Covariance taper: none | wendland1:THETA
    #[arg(long, default_value = "none")]
    taper: String,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Dataset schema JSON; defaults to last column = output, rest = inputs.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a space-filling sample of a domain.
    Sample {
        /// Domain JSON (dimensions with min/max and optional levels).
        #[arg(long)]
        domain: PathBuf,
        /// stratified | best-candidate
        #[arg(long, default_value = "best-candidate")]
        method: String,
        /// Point count (best-candidate only; stratified draws one per cell).
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Candidates per best-candidate step.
        #[arg(long, default_value_t = 32)]
        k: usize,
        #[command(flatten)]
        seed: SeedArg,
        /// Attach the synthetic forward model as a depth output column.
        #[arg(long)]
        synthetic: bool,
        /// Gaussian noise standard deviation on the synthetic output.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a GP with fixed hyperparameters.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Hyperparameter JSON; omit to use the data-driven defaults.
        #[arg(long)]
        hp: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random-search hyperparameter optimization, then fit the best model.
    Hyperopt {
        #[command(flatten)]
        data: DataArgs,
        /// Hyperparameter box JSON; omit for the default box.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Candidate count.
        #[arg(long, default_value_t = 100)]
        r: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        seed: SeedArg,
        /// Also run variance-bearing LOO passes at the default and optimum.
        #[arg(long)]
        with_variance_finals: bool,
        /// Per-candidate trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-out cross-validation report.
    Loo {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        hp: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Include predictive variances in the report.
        #[arg(long)]
        with_variance: bool,
        #[arg(long)]
        report: PathBuf,
    },
    /// Partition along one or two variables and fit per-block GPs.
    BlockFit {
        #[command(flatten)]
        data: DataArgs,
        /// Split variables by name, comma separated (one or two).
        #[arg(long, value_delimiter = ',')]
        dims: Vec<String>,
        /// Blocks per split variable, comma separated, aligned with --dims.
        #[arg(long, value_delimiter = ',')]
        blocks: Vec<usize>,
        /// Overlap fraction appended on each side of a block for fitting.
        #[arg(long, default_value_t = 0.0)]
        overlap: f64,
        #[arg(long, default_value_t = 100)]
        r: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        seed: SeedArg,
        /// Write the per-block summary table here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare exact and approximate pipelines on one dataset.
    Bench {
        #[command(flatten)]
        data: DataArgs,
        /// Entries: full | block:B | cg:EPS:CAP, comma separated.
        #[arg(long, value_delimiter = ',')]
        compare: Vec<String>,
        /// Split variable for block entries; default picks the dimension
        /// with the lowest within-block output spread.
        #[arg(long)]
        dims: Option<String>,
        #[arg(long, default_value_t = 20)]
        r: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        report: PathBuf,
    },
    /// Predict a model over a dense space-filling sample.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter sweep rows whose output lies in target ± delta.
    Inverse {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        target: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train (or apply) a self-organizing map and write node statistics.
    Som {
        #[command(flatten)]
        data: DataArgs,
        /// Grid as NXxNY, e.g. 10x10.
        #[arg(long)]
        grid: Option<String>,
        /// 30x30 | 10x10 (sets grid and schedule together).
        #[arg(long)]
        preset: Option<String>,
        /// Distance weights: none | FILE (JSON array of per-dimension
        /// weights, or a fitted GP model whose inverse length scales are
        /// used).
        #[arg(long)]
        weights: Option<String>,
        #[command(flatten)]
        seed: SeedArg,
        /// Count outputs inside target ± delta per node.
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        stats: PathBuf,
        /// Save the trained map here.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Parallel-coordinates SVG of a dataset.
    Parplot {
        #[arg(long)]
        data: PathBuf,
        /// Axis order by input name, comma separated; default is file order.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hexagonal SOM heatmap from a node-statistics CSV.
    Heatmap {
        #[arg(long)]
        stats: PathBuf,
        /// weight:DIM | count | mean | inrange
        #[arg(long)]
        quantity: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
