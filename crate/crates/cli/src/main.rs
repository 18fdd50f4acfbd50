//! `adamlab`: trajectories, bound checks, counterexamples, region maps and
//! regret runs for the Adam moment recurrences, written as CSV.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 I/O error. Without `--out`, CSV goes to `$ADAMLAB_OUT_DIR/<name>.csv`
//! when that variable is set, otherwise to stdout.

mod commands;
mod error;
mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use adamlab::{BoundKind, FuzzFamily, LemmaId, OptimizerKind};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "adamlab", version, about = "Adam moment recurrences: traces, bounds and counterexamples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-step trajectory with s_t and both bounds where in scope.
    Trace(TraceArgs),
    /// Run lemma checkers over (beta1, beta2) cells.
    Verify(VerifyArgs),
    /// Counterexamples to the Kingma-Ba bound.
    #[command(subcommand)]
    Counterexample(CounterexampleCommand),
    /// Region classification over a grid of (beta1, beta2) cell centres.
    Region(RegionArgs),
    /// Online convex optimization regret run.
    Oco(OcoArgs),
}

/// Hyperparameters; defaults are beta1 = beta2 = 0.1, lambda_m = lambda_g = 1-1e-8, eta = 1.
#[derive(Debug, Clone, Args)]
struct HyperArgs {
    #[arg(long, default_value = "0.1", value_parser = parse::scalar)]
    beta1: f64,
    #[arg(long, default_value = "0.1", value_parser = parse::scalar)]
    beta2: f64,
    /// Decay of beta1 across steps; accepts `1-1e-8`.
    #[arg(long = "lambda-m", default_value = "1-1e-8", value_parser = parse::scalar)]
    lambda_m: f64,
    /// Decay of the gradient weight across steps.
    #[arg(long = "lambda-g", default_value = "1-1e-8", value_parser = parse::scalar)]
    lambda_g: f64,
    #[arg(long, default_value = "1", value_parser = parse::scalar)]
    eta: f64,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    hyper: HyperArgs,
    /// Horizon.
    #[arg(long = "T", default_value_t = 200)]
    horizon: usize,
    /// invsqrt | constant:C | uniform:LO:HI:SEED | file:PATH
    #[arg(long, default_value = "invsqrt")]
    source: adamlab::GradientSource,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Explicit cells `b1:b2,...`. Every requested check runs on these, in scope or not.
    #[arg(long, value_parser = parse::cells, conflicts_with_all = ["grid", "beta1"])]
    cells: Option<std::vec::Vec<(f64, f64)>>,
    /// A single cell (with --beta2).
    #[arg(long, requires = "beta2", value_parser = parse::scalar, conflicts_with = "grid")]
    beta1: Option<f64>,
    #[arg(long, requires = "beta1", value_parser = parse::scalar)]
    beta2: Option<f64>,
    /// N x N grid inside the log-T region (used when no cell is given).
    #[arg(long, default_value_t = 10)]
    grid: usize,
    /// Comma-separated lemma ids: L31, L32, NormMhat, NormMu, AppendixY, AppendixP.
    #[arg(long, value_delimiter = ',', default_value = "L31,L32,NormMhat,NormMu,AppendixY,AppendixP")]
    lemmas: Vec<LemmaId>,
    #[arg(long = "T", default_value_t = 500)]
    horizon: usize,
    /// `1,2,3` or `0..99`.
    #[arg(long, default_value = "0", value_parser = parse::seeds)]
    seeds: std::vec::Vec<u64>,
    /// nonnegative | mixed | invsqrt
    #[arg(long, default_value = "nonnegative")]
    family: FuzzFamily,
    #[arg(long, default_value_t = adamlab::DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum CounterexampleCommand {
    /// Preset (defaults above, g_t = 1/sqrt(t), T = 200): first t where s_t exceeds the Kingma-Ba bound.
    Fig1 {
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long = "T", default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value = "invsqrt")]
        source: adamlab::GradientSource,
        /// Per-step `t,s,bound,margin` CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// beta = 0 limit: smallest T with H_T > 4.
    Analytic {
        #[arg(long = "t-max", default_value_t = 1000)]
        t_max: u64,
    },
    /// Randomised search over hyperparameter boxes.
    Search(SearchArgs),
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// `lo:hi`
    #[arg(long, default_value = "0.05:0.3", value_parser = parse::range)]
    beta1: (f64, f64),
    #[arg(long, default_value = "0.05:0.3", value_parser = parse::range)]
    beta2: (f64, f64),
    #[arg(long, default_value = "1-1e-6:1-1e-9", value_parser = parse::range)]
    lambda: (f64, f64),
    #[arg(long, default_value = "invsqrt")]
    family: FuzzFamily,
    #[arg(long, default_value = "0", value_parser = parse::seeds)]
    seeds: std::vec::Vec<u64>,
    /// Cells drawn per seed.
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long = "T", default_value_t = 1000)]
    horizon: usize,
    /// kb | logt. A log-T crossing is a verification failure.
    #[arg(long, default_value = "kb")]
    bound: BoundKind,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RegionArgs {
    #[arg(long, default_value_t = 400)]
    resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OcoArgs {
    /// Scenario file: `key = value` lines (dim, family, center, curvature, horizon, seed, ...).
    #[arg(long)]
    config: PathBuf,
    /// adam | amsgrad | gd, comma separated. Several optimizers need --out or $ADAMLAB_OUT_DIR.
    #[arg(long, value_delimiter = ',', default_value = "adam")]
    optimizers: Vec<OptimizerKind>,
    #[arg(long, default_value = "0.1", value_parser = parse::scalar)]
    eta: f64,
    #[arg(long, default_value = "0.9", value_parser = parse::scalar)]
    beta1: f64,
    #[arg(long, default_value = "0.999", value_parser = parse::scalar)]
    beta2: f64,
    #[arg(long = "lambda-m", default_value = "1", value_parser = parse::scalar)]
    lambda_m: f64,
    #[arg(long = "lambda-g", default_value = "1", value_parser = parse::scalar)]
    lambda_g: f64,
    #[arg(long, default_value_t = adamlab::oco::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Use raw m, v instead of the bias-corrected moments.
    #[arg(long)]
    no_bias_correction: bool,
    /// Step size eta instead of eta/sqrt(t).
    #[arg(long)]
    constant_rate: bool,
    /// Starting point, broadcast to every coordinate.
    #[arg(long, default_value = "0", value_parser = parse::scalar)]
    theta0: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.render().to_string();
            eprint!("{text}");
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Trace(a) => commands::trace(a),
        Command::Verify(a) => commands::verify(a),
        Command::Counterexample(c) => match c {
            CounterexampleCommand::Fig1 {
                hyper,
                horizon,
                source,
                out,
            } => commands::fig1(hyper, horizon, source, out),
            CounterexampleCommand::Analytic { t_max } => commands::analytic(t_max),
            CounterexampleCommand::Search(a) => commands::search(a),
        },
        Command::Region(a) => commands::region(a),
        Command::Oco(a) => commands::oco(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adamlab: {e}");
            e.exit_code()
        }
    }
}
