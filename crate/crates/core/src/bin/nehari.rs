use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use nehari_core::app::{self, Command, Overrides, EXIT_USAGE};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subcommand {
    /// Compute the ground state and write solution.csv, trace.csv, report.json
    Solve,
    /// Run the invariant suite; exit 3 on any violation
    Verify,
    /// Evolve a ground state and check the e^{i omega t} ansatz
    Evolve,
    /// Solve over sweep.lambdas with warm starts
    Sweep,
}

#[derive(Debug, Parser)]
#[command(name = "nehari", version, about = "Nehari-manifold ground states of a coupled Schrödinger system")]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// Config file in `section.key = value` form; the built-in benchmark if omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding output.directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed, overriding solver.rng_seed
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let command = match cli.command {
        Subcommand::Solve => Command::Solve,
        Subcommand::Verify => Command::Verify,
        Subcommand::Evolve => Command::Evolve,
        Subcommand::Sweep => Command::Sweep,
    };
    let overrides = Overrides { out: cli.out, seed: cli.seed };
    let cfg = match app::load_config(cli.config.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    ExitCode::from(app::run(command, &cfg) as u8)
}
