use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cnmm_cli::report::{render_summary, RunReport};
use cnmm_cli::runner::{run_scenario, RunError};
use cnmm_cli::scenario::Scenario;

/// Exit code for unusable input: unreadable files, malformed JSON, or a
/// scenario that fails validation.
const EXIT_BAD_INPUT: u8 = 2;
/// Exit code for a failure while executing a valid scenario.
const EXIT_RUN_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "cnmm", about = "Event-driven network management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the run report as JSON.
    Run {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Report output path.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a human-readable summary of a run report.
    Compare {
        /// Report file produced by `run`.
        #[arg(long)]
        report: PathBuf,
    },
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, out, seed } => {
            let text = match std::fs::read_to_string(&scenario) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_BAD_INPUT, format!("{}: {e}", scenario.display())),
            };
            let mut parsed: Scenario = match serde_json::from_str(&text) {
                Ok(s) => s,
                Err(e) => return fail(EXIT_BAD_INPUT, format!("{}: {e}", scenario.display())),
            };
            if let Some(seed) = seed {
                parsed.seed = seed;
            }
            let outcome = match run_scenario(&parsed) {
                Ok(o) => o,
                Err(e @ RunError::Invalid(_)) => return fail(EXIT_BAD_INPUT, e),
                Err(e) => return fail(EXIT_RUN_FAILED, e),
            };
            let json = serde_json::to_string_pretty(&outcome.report)
                .expect("report serialization is total");
            if let Err(e) = std::fs::write(&out, json + "\n") {
                return fail(EXIT_RUN_FAILED, format!("{}: {e}", out.display()));
            }
            println!(
                "wrote {} ({} protocol messages, {} alerts)",
                out.display(),
                outcome.report.cnmm.total_messages,
                outcome.report.cnmm.alerts.len()
            );
            ExitCode::SUCCESS
        }
        Command::Compare { report } => {
            let text = match std::fs::read_to_string(&report) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_BAD_INPUT, format!("{}: {e}", report.display())),
            };
            let parsed: RunReport = match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(e) => return fail(EXIT_BAD_INPUT, format!("{}: {e}", report.display())),
            };
            print!("{}", render_summary(&parsed));
            ExitCode::SUCCESS
        }
    }
}
