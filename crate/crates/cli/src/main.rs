//! `ordscr`: fit, select and evaluate mixture models for ordinal data.

mod commands;
mod data;
mod model_file;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use commands::Outcome;

#[derive(Parser, Debug)]
#[command(name = "ordscr", version, about)]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, env = "ORDSCR_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one (G, Q) model.
    Fit(commands::fit::FitArgs),
    /// Fit a grid of models and choose one by composite BIC.
    Select(commands::select::SelectArgs),
    /// Run a seeded simulation study on a preset scenario.
    Simulate(commands::simulate::SimulateArgs),
    /// Assign observations to components with a saved model.
    Classify(commands::classify::ClassifyArgs),
    /// Compare two partitions by ARI and posterior loss.
    Evaluate(commands::evaluate::EvaluateArgs),
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match &cli.command {
        Command::Fit(a) => commands::fit::run(a),
        Command::Select(a) => commands::select::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Classify(a) => commands::classify::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
    }
}

/// Numerical breakdowns exit 2 like non-convergence; everything else is input.
fn is_numerical(err: &anyhow::Error) -> bool {
    use ordscr::Error as E;
    matches!(
        err.downcast_ref::<E>(),
        Some(
            E::Optimizer(_) | E::AllStartsFailed { .. } | E::Selection(_) | E::Conditioning { .. }
        )
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: EM did not converge; outputs were written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_numerical(&e) { 2 } else { 1 })
        }
    }
}
