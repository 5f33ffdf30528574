use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdwave_cli::commands::{
    cmd_basis, cmd_check, cmd_constants, cmd_simulate, cmd_sweep, Overrides,
};
use sdwave_cli::{CliResult, Setup};

#[derive(Parser)]
#[command(
    name = "sdwave",
    version,
    about = "Strongly damped semilinear wave lab: simulate, sweep, check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for constant estimation (overrides constants.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps (overrides amplitude.jobs)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one amplitude; writes trajectory.csv and simulate.json
    Simulate(Common),
    /// Amplitude sweep and scaling fit; writes sweep.csv, sweep.json, sweep.svg
    Sweep(Common),
    /// Check the energy chain on a trajectory CSV; writes check.json
    Check {
        #[command(flatten)]
        common: Common,
        /// trajectory.csv written by `simulate`
        #[arg(long)]
        trajectory: PathBuf,
        /// simulate.json with the lifespan estimate of the same run
        #[arg(long)]
        lifespan: Option<PathBuf>,
    },
    /// Embedding and chain constants; writes constants.json
    Constants(Common),
    /// Print lambda_1 and the lowest modes
    Basis {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        rows: usize,
    },
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        out: c.out.clone(),
        seed: c.seed,
        jobs: c.jobs,
    }
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Simulate(c) => Ok(cmd_simulate(&Setup::load(&c.config)?, &overrides(&c))?.1),
        Command::Sweep(c) => Ok(cmd_sweep(&Setup::load(&c.config)?, &overrides(&c))?.1),
        Command::Check {
            common,
            trajectory,
            lifespan,
        } => {
            let setup = Setup::load(&common.config)?;
            Ok(cmd_check(
                &setup,
                &overrides(&common),
                &trajectory,
                lifespan.as_deref(),
            )?
            .1)
        }
        Command::Constants(c) => Ok(cmd_constants(&Setup::load(&c.config)?, &overrides(&c))?.1),
        Command::Basis { common, rows } => Ok(cmd_basis(&Setup::load(&common.config)?, rows)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
