use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ionfv::scenario::{
    cmd_converge, cmd_simulate, cmd_sweep, load_config, ScenarioError, SweepConfig,
};

/// Finite-volume runs of nonlocal ionic-fluid scenarios.
#[derive(Parser)]
#[command(name = "ionfv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write snapshot and energy CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-refinement study against a finer reference run.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated grid sizes, e.g. 32,64,128.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long = "ref")]
        reference: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// One run per value of a parameter, e.g. `--param kernels.steric.eta`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let summary = cmd_simulate(&load_config(&config)?, &out)?;
            println!(
                "{} steps, final E = {:.10e}, D = {:.3e}",
                summary.steps, summary.energy, summary.dissipation
            );
        }
        Command::Converge {
            config,
            n,
            reference,
            out,
        } => {
            let table = cmd_converge(&load_config(&config)?, &n, reference, &out)?;
            println!(
                "slopes: linf {:.3}, l1 {:.3}, l2 {:.3}",
                table.slope_l_inf, table.slope_l1, table.slope_l2
            );
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let sweep = SweepConfig {
                base: load_config(&config)?,
                param,
                values,
            };
            let runs = cmd_sweep(&sweep, &out)?;
            let failed = runs.iter().filter(|r| r.outcome.is_err()).count();
            println!("{} runs, {failed} failed", runs.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
