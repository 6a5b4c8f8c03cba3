//! Command-line front end for the reduced-order eigenvalue pipeline.
//!
//! Subcommands: fom | train | predict | evaluate. All take --config PATH;
//! --out, --jobs and --seed override the corresponding config fields.
//! Exit codes: 0 success, 1 tolerance failure, 2 invalid config,
//! 3 numerical failure.

mod commands;
mod config;
mod csvout;

use clap::{Args, Parser, Subcommand};
use commands::CmdError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "eigenrom",
    about = "Non-intrusive reduced-order modeling for parametric PDE eigenvalue problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker cap (overrides config and EIGENROM_JOBS).
    #[arg(long)]
    jobs: Option<usize>,
    /// GPR fit seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full-order model over the test design.
    Fom(CommonArgs),
    /// Train the reduced model (offline stage).
    Train(CommonArgs),
    /// Evaluate a trained model at test parameters (online stage).
    Predict(CommonArgs),
    /// Compare reduced predictions against fresh full-order solves.
    Evaluate(CommonArgs),
}

fn run(args: &CommonArgs, f: impl Fn(&config::RunConfig) -> Result<(), CmdError>) -> ExitCode {
    let mut cfg = match config::RunConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    commands::apply_overrides(&mut cfg, args.out.clone(), args.seed);
    eigenrom_core::exec::set_max_threads(commands::resolve_jobs(args.jobs, &cfg));
    match f(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Tolerance(m)) => {
            eprintln!("tolerance failure: {m}");
            ExitCode::from(1)
        }
        Err(CmdError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CmdError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Fom(args) => run(args, commands::cmd_fom),
        Command::Train(args) => run(args, commands::cmd_train),
        Command::Predict(args) => run(args, commands::cmd_predict),
        Command::Evaluate(args) => run(args, commands::cmd_evaluate),
    }
}
