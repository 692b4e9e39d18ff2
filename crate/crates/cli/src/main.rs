//! `xtune`: dataset generation, model training, explanation and solver
//! front end.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O
//! error. Errors are written to stderr as a JSON object; results go to
//! stdout as exactly one JSON document.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Experiment, Scale};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "xtune", version, about = "Explainable auto-tuning for accurate matrix products and IC-preconditioned CG")]
pub struct Cli {
    /// Worker threads for parallel sections (timed phases use their own
    /// configured count).
    #[arg(long, global = true, env = "XTUNE_THREADS")]
    pub threads: Option<usize>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a dataset CSV and its manifest.
    Gen(GenArgs),
    /// Train a random forest on a dataset.
    Train(TrainArgs),
    /// Evaluate a model on a dataset.
    Eval(EvalArgs),
    /// Shapley summary of a model: beeswarm CSV and SVG plus summary JSON.
    Explain(ExplainArgs),
    /// Predict the variant for A * B, run every variant and compare.
    Tune(TuneArgs),
    /// Solve A x = b with IC(m, t)-preconditioned CG.
    Solve(SolveArgs),
    /// Write the P3D heat-conduction matrix.
    P3d(P3dArgs),
    /// Time every executable variant on A * B.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset CSV path; the manifest goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Required for paper-scale grids, which run for hours.
    #[arg(long)]
    pub ack_long_run: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 0 grows trees to purity.
    #[arg(long, default_value_t = 0)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
    /// Features tried per split (default sqrt(d) for selection, d/3 for
    /// regression).
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Train on every row instead of the train split.
    #[arg(long)]
    pub all_rows: bool,
    /// One-hot encode this integer column before training.
    #[arg(long)]
    pub one_hot: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluate every row instead of the test split.
    #[arg(long)]
    pub all_rows: bool,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for beeswarm.csv, beeswarm.svg and summary.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Variant whose vote fraction is explained (classifiers only).
    #[arg(long)]
    pub target: Option<u8>,
    #[arg(long, default_value_t = 100)]
    pub background_cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Explain every row instead of the test split.
    #[arg(long)]
    pub all_rows: bool,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    /// Left operand, Matrix Market.
    #[arg(long)]
    pub a: PathBuf,
    /// Right operand, Matrix Market.
    #[arg(long)]
    pub b: PathBuf,
    /// Selection model; the built-in demo model when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Symmetric positive definite matrix, Matrix Market.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Right-hand side, one value per line; all ones when omitted.
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    /// Fill-level cap; omit with --complete for a full factorization.
    #[arg(long, default_value_t = 0)]
    pub m: u32,
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    #[arg(long)]
    pub complete: bool,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Args, Debug)]
pub struct P3dArgs {
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda2: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the right-hand side, one value per line.
    #[arg(long)]
    pub rhs_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Comma-separated variant ids; every executable variant by default.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<u8>,
    #[arg(long)]
    pub block_width: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(out) => {
            // A closed stdout (e.g. piped into `head`) is not an error.
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&out).expect("serializable output"));
            ExitCode::SUCCESS
        }
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&e).expect("serializable error"));
    ExitCode::from(e.kind.exit_code() as u8)
}
