use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tropism_cli::presets::{DEFAULT_DS, PRESET_NAMES};
use tropism_cli::{exit_code, parse_config, preset, run_to_dir, verify, CliError, EXIT_OK, EXIT_VERIFY_FAILED};
use tropism_core::sim::RunStatus;

#[derive(Parser)]
#[command(name = "tropism", version, about = "Simulate growing stems and clinging vines around obstacles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file and write frames.csv, summary.json and figure.svg.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one of the built-in scenarios.
    Preset {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DS)]
        ds: f64,
    },
    /// Check structural invariants on a short run of a configuration.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

fn report(status: &RunStatus) {
    match status {
        RunStatus::Completed => println!("status: completed"),
        RunStatus::Breakdown { t, report } => println!(
            "status: breakdown at t = {t} (tip on boundary {}, perpendicular {}, straight off contact {})",
            report.tip_on_boundary, report.tip_perpendicular, report.straight_off_contact
        ),
        RunStatus::PushFailure { t, message, .. } => println!("status: push failure at t = {t}: {message}"),
    }
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run { config, out } => {
            let cfg = parse_config(&config)?;
            let (outcome, _) = run_to_dir(&cfg, &out)?;
            report(&outcome.status);
            Ok(exit_code(&outcome.status))
        }
        Command::Preset { name, out, ds } => {
            if !ds.is_finite() || ds <= 0.0 {
                return Err(CliError::Config(format!("--ds must be > 0, got {ds}")));
            }
            let (outcome, _) = run_to_dir(&preset(&name, ds)?, &out)?;
            report(&outcome.status);
            Ok(exit_code(&outcome.status))
        }
        Command::Verify { config, steps } => {
            let cfg = parse_config(&config)?;
            let result = verify::verify(&cfg, steps)?;
            for line in result.lines() {
                println!("{line}");
            }
            Ok(if result.passed() { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
