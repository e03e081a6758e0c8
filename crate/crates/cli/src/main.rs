use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Wiener and first-order stable spline kernels from the command line.
#[derive(Debug, Parser)]
#[command(name = "stablekern", version)]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the status line on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

/// Kernel spec file plus exactly one grid source.
#[derive(Debug, Args)]
pub struct KernelGrid {
    /// Kernel spec JSON, e.g. `{"family":"ss1","c":1.0,"beta":0.5}`.
    #[arg(long)]
    pub kernel: PathBuf,
    #[command(flatten)]
    pub grid: GridSource,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct GridSource {
    /// Grid file, one time per line.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Uniform grid `n,delta,t_start`.
    #[arg(long, value_name = "N,DELTA,T_START")]
    pub uniform: Option<String>,
}

/// Same as [`GridSource`] but optional; `fit` falls back to `t_i = i`.
#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
pub struct OptionalGridSource {
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, value_name = "N,DELTA,T_START")]
    pub uniform: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Which {
    Precision,
    Sqrt,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dense Gram matrix as CSV.
    Gram(KernelGrid),
    /// Closed-form tridiagonal inverse as two-line CSV.
    Inverse(KernelGrid),
    /// Closed-form log-determinant as JSON.
    Logdet(KernelGrid),
    /// Bidiagonal precision factor (two-line CSV) or dense square root.
    Factor {
        #[command(flatten)]
        kg: KernelGrid,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// Upper-triangular square root U with U U^T = P, as CSV.
    Sqrt(KernelGrid),
    /// Sample paths, one per row.
    Sample {
        #[command(flatten)]
        kg: KernelGrid,
        /// Number of paths.
        #[arg(long)]
        paths: usize,
    },
    /// Constraint audit of sampled paths as JSON.
    Audit {
        #[command(flatten)]
        kg: KernelGrid,
        /// Path CSV written by `sample`.
        #[arg(long)]
        paths: PathBuf,
    },
    /// Band extension of a two-line band CSV.
    Extend {
        #[arg(long)]
        band: PathBuf,
    },
    /// Entropy of the kernel against random completions and increment laws.
    MaxentAudit {
        #[command(flatten)]
        kg: KernelGrid,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Tune hyperparameters and estimate an FIR impulse response.
    Fit {
        /// `u,y` CSV with a header line.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        order: usize,
        /// Overrides the family in the search file.
        #[arg(long)]
        kernel_family: Option<String>,
        /// SearchConfig JSON; built-in defaults when absent.
        #[arg(long)]
        search: Option<PathBuf>,
        /// Fix the noise variance instead of tuning it.
        #[arg(long)]
        sigma2: Option<f64>,
        #[command(flatten)]
        grid: OptionalGridSource,
    },
    /// Cross-check every closed form against the dense oracle.
    Check(KernelGrid),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code, e.message);
            ExitCode::from(1)
        }
    }
}
