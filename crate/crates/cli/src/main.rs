mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use liqhedge_core::{Engine, Error};

#[derive(Parser)]
#[command(name = "liqhedge", version, about = "Indifference pricing and hedging of calls under execution costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price the deal: theta(0, q0, S0) per share.
    Price(Common),
    /// Model and delta-hedge inventories along a price path.
    Hedge {
        #[command(flatten)]
        common: Common,
        /// CSV with columns `t,S` at the solver's time resolution; the shipped
        /// scenario path is used when omitted.
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Monte-Carlo statistics of the delta hedge and the model policy.
    Simulate(Common),
    /// Price over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// eta, gamma, q0, rho_max, r, mu, k or settlement.
        #[arg(long)]
        param: String,
        /// Comma-separated values (r and mu annualized as in the config).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
    },
}

#[derive(Args, Clone)]
pub struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Pde,
    Tree,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Pde => Engine::Pde,
            EngineArg::Tree => Engine::Tree,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonFinite { .. } | Error::NoFeasibleControl { .. } | Error::OutOfHull { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Price(c) => commands::price(&c),
        Command::Hedge { common, path } => commands::hedge(&common, path.as_deref()),
        Command::Simulate(c) => commands::simulate(&c),
        Command::Sweep { common, param, values } => commands::sweep(&common, &param, &values),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("liqhedge: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
