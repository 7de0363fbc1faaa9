use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hybridq_cli::{run, Command, Format, Request};

#[derive(Parser)]
#[command(name = "hybridq", version, about = "Cavity, charge-qubit and molecular-ensemble simulations from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file.
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Fmt::Both)]
    format: Fmt,
    /// Overrides `seed` in [system].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the model with constant drives (or the quadratic charge-qubit pulse).
    Simulate(Common),
    /// Calibrate and simulate the two-ensemble gate.
    Gate(Common),
    /// Calibrate the charge-qubit pulse only.
    Calibrate(Common),
    /// Evaluate the physical estimators.
    Estimate(Common),
    /// Gate infidelity over a grid of charge-qubit dephasing rates.
    Sweep(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Csv,
    Json,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Gate(c) => (Command::Gate, c),
        Cmd::Calibrate(c) => (Command::Calibrate, c),
        Cmd::Estimate(c) => (Command::Estimate, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let format = match c.format {
        Fmt::Csv => Format::Csv,
        Fmt::Json => Format::Json,
        Fmt::Both => Format::Both,
    };
    let req = Request { command, scenario: c.scenario, out: c.out, format, seed: c.seed };
    match run(&req) {
        Ok((doc, files)) => {
            print!("{}", doc.summary());
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
