//! `sareg`: simulation tables, real-data fits and asymptotic constants for
//! semi-recursive kernel regression.

mod fit;
mod ingest;
mod simulate;
mod svg;
mod theory;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sareg::{Estimator, Model};

#[derive(Parser, Debug)]
#[command(name = "sareg", version, about = "Semi-recursive kernel regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo comparison of the estimators on synthetic data.
    Simulate(SimulateArgs),
    /// Fit the estimators to two columns of a CSV file.
    Fit(FitArgs),
    /// Print kernel functionals, optimal bandwidth coefficients and risk ratios.
    Theory(TheoryArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Regression function(s): cos, logistic.
    #[arg(long, required = true, value_delimiter = ',', value_parser = parse_model)]
    pub model: Vec<Model>,
    /// Noise standard deviations, each in [0.1, 2].
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub sigma: Vec<f64>,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimators: nw, rec1, rec2, rec3, rec4.
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator, default_value = "nw,rec1,rec2,rec3,rec4")]
    pub estimators: Vec<Estimator>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Run replications one at a time instead of on all cores.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub x_col: String,
    #[arg(long)]
    pub y_col: String,
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator, default_value = "nw,rec1,rec4")]
    pub estimators: Vec<Estimator>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 101)]
    pub grid_size: usize,
    /// Feed observations in a random order drawn from this seed instead of file order.
    #[arg(long)]
    pub shuffle: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KernelChoice {
    Gaussian,
}

#[derive(Args, Debug)]
pub struct TheoryArgs {
    /// Print the MWISE ratios of the recursive estimators to Nadaraya–Watson.
    #[arg(long)]
    pub ratios: bool,
    /// Print the functionals of this kernel.
    #[arg(long, value_enum)]
    pub kernel: Option<KernelChoice>,
    /// Print the model's functionals and optimal bandwidth coefficients.
    #[arg(long, requires = "model")]
    pub functionals: bool,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<Model>,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse().map_err(|e: sareg::Error| e.to_string())
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse().map_err(|e: sareg::Error| e.to_string())
}

/// Errors the user can fix by changing flags; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(&args),
        Command::Fit(args) => fit::run(&args),
        Command::Theory(args) => theory::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
