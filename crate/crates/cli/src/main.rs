//! Command-line front-end: searches, constraint checks, canonical forms,
//! constant fits, synthetic data and pass-rate reports.

mod config;
mod search;
mod tools;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::EngineName;

#[derive(Parser)]
#[command(name = "isosr", version, about = "Constraint-aware symbolic regression for adsorption isotherms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct SearchArgs {
    /// TOML run configuration, or a manifest from an earlier search.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV with header `pressure,loading`; replaces the config's dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run sequentially on one thread.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum)]
    constraints: Option<OnOff>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Ga,
    Bsr,
}

impl From<EngineArg> for EngineName {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Ga => EngineName::Ga,
            EngineArg::Bsr => EngineName::Bsr,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run independent searches and write fronts, pass rates and a manifest.
    Search(SearchArgs),
    /// Evaluate the three consistency constraints for one expression.
    Check {
        expr: String,
        /// Comma-separated values for c1, c2, ...
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        params: Vec<f64>,
        /// Pressure window `lo,hi` for the monotonicity check.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        range: Option<Vec<f64>>,
    },
    /// Print the canonical form and complexities of an expression.
    Canon {
        expr: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        params: Vec<f64>,
    },
    /// Fit the constants of an expression to a dataset.
    Fit {
        expr: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample a catalogue isotherm on a pressure grid.
    Synth {
        /// langmuir, dual-site-langmuir, bet, freundlich or sips
        model: String,
        /// Defaults to the catalogue values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        params: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        lo: f64,
        #[arg(long, default_value_t = 100.0)]
        hi: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Evenly spaced instead of log-spaced pressures.
        #[arg(long)]
        linear: bool,
        /// Noise standard deviation, relative unless `--absolute`.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        absolute: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combine pass-rate tables from search directories into one wide table.
    Report {
        /// Search output directories or pass_rates.csv files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with the process exit code it maps to.
pub enum Failure {
    /// Bad input: unparsable expression, missing dataset, invalid config.
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search(a) => search::run(a),
        Command::Check { expr, params, range } => tools::check(&expr, &params, range.as_deref()),
        Command::Canon { expr, params } => tools::canon(&expr, &params),
        Command::Fit {
            expr,
            data,
            restarts,
            seed,
        } => tools::fit(&expr, &data, restarts, seed),
        Command::Synth {
            model,
            params,
            lo,
            hi,
            points,
            linear,
            noise,
            absolute,
            seed,
            out,
        } => {
            let spec = config::DatasetSpec {
                path: None,
                model: Some(model),
                params,
                lo,
                hi,
                points,
                log: !linear,
                noise,
                absolute_noise: absolute,
                seed,
            };
            tools::synth(&spec, out.as_deref())
        }
        Command::Report { inputs, out } => tools::report(&inputs, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
