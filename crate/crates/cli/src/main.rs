use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Variable exponent Lebesgue norms from the command line.
///
/// Inputs are JSON files: step functions and exponents as
/// `{"partition": [0.0, ..., 1.0], "values": [...]}`, sequences as
/// `{"values": [...], "exponents": [...], "orientation": "left"}`, matrices
/// as arrays of rows.
/// Output is JSON except `curve`, which writes CSV.
///
/// Exit codes: 0 ok, 1 property failure, 2 usage or validation error,
/// 3 numeric non-convergence.
#[derive(Debug, Parser)]
#[command(name = "varexp", version)]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Absolute tolerance of the initial-value ladder.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,

    /// Tabulation nodes for `embed-demo`.
    #[arg(long, global = true, default_value_t = 1024)]
    pub grid: usize,

    /// Ratio between successive initial values of the ladder.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub ladder_base: f64,

    /// Seed of the `verify` instance generator.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Cases per suite for `verify`.
    #[arg(long, global = true, default_value_t = 1000)]
    pub cases: u64,

    /// Re-check the failures stored in a `verify` report.
    #[arg(long, global = true, value_name = "FILE")]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FunctionInputs {
    /// Step function.
    #[arg(long)]
    pub f: PathBuf,
    /// Exponent.
    #[arg(long)]
    pub p: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Norm `φ_f(1)` of a step function.
    Norm(FunctionInputs),
    /// The stabilized curve `φ_f` at every breakpoint, as CSV.
    Curve(FunctionInputs),
    /// Luxemburg norm for the modular `s^p / p` (psi) or `s^p` (plain).
    Nakano {
        #[command(flatten)]
        inputs: FunctionInputs,
        #[arg(long, default_value = "psi")]
        kind: String,
        /// Relative bisection width.
        #[arg(long = "nakano-tol", default_value_t = 1e-12)]
        nakano_tol: f64,
    },
    /// Both sides of Hölder's inequality for `f`, `g` and `(p, p*)`.
    Holder {
        #[command(flatten)]
        inputs: FunctionInputs,
        #[arg(long)]
        g: PathBuf,
    },
    /// Pairing of `x` with the pointwise duality map and with the exact
    /// norming functional.
    Pair {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        p: PathBuf,
    },
    /// Norm of a finite variable exponent sequence. The input may carry
    /// `"orientation": "left"` (fold from the first element, the default)
    /// or `"right"` (fold from the last).
    Seqnorm {
        #[arg(long)]
        input: PathBuf,
    },
    /// Mixed norm `ℓ^r(ℓ^p)` of a non-negative matrix.
    Mixed {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r: f64,
    },
    /// Variation norm of the measure with density `g'`.
    Variation {
        #[arg(long = "g-prime")]
        g_prime: PathBuf,
        #[arg(long)]
        p: PathBuf,
    },
    /// Extended norm over the truncation ladder `n = 2, 4, 8, ...`.
    Extnorm(FunctionInputs),
    /// Weighted norm and the density-change isometry.
    Weighted {
        #[command(flatten)]
        inputs: FunctionInputs,
        /// Density of the measure.
        #[arg(long)]
        w: PathBuf,
    },
    /// Embedding of a built-in smooth exponent into the universal exponent.
    EmbedDemo {
        /// `affine` (2 + t) or `sine` (2 + sin 3t).
        #[arg(long, default_value = "affine")]
        exponent: String,
    },
    /// Seeded property suites.
    Verify {
        /// holder, pairing, nakano-band, estimates, mixed, isometry or all.
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
