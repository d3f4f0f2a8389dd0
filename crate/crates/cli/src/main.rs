use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use axifree_core::io::RunConfig;
use axifree_core::runner::{self, RunStatus};
use axifree_core::verify::{self, Suite};

/// Mollified free-boundary MHD solver for axisymmetric plasma columns.
#[derive(Parser)]
#[command(name = "axifree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation; writes the series, snapshots and summary.json.
    /// AXIFREE_OUTPUT_DIR overrides the configured output directory.
    Run { config: PathBuf },
    /// Run a verification suite: identities, elliptic, mollifier, lemmas or all.
    Verify { suite: String },
    /// Check the configured initial data against the existence hypotheses.
    Validate { config: PathBuf },
}

fn print(value: &serde_json::Value) {
    // a closed pipe is not worth a panic
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(value).expect("JSON values always serialize"));
}

fn invalid(message: String) -> ExitCode {
    print(&json!({ "status": RunStatus::InvalidInput, "message": message }));
    exit(RunStatus::InvalidInput.exit_code())
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn load(path: &PathBuf) -> Result<RunConfig, String> {
    RunConfig::load(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| format!("{e:#}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(m) => return invalid(m),
            };
            match runner::run(&cfg) {
                Ok(outcome) => {
                    print(&serde_json::to_value(&outcome).expect("outcome serializes"));
                    exit(outcome.exit_code)
                }
                // failures writing the output directory
                Err(e) => invalid(e.to_string()),
            }
        }
        Command::Verify { suite } => {
            let suite = match Suite::from_name(&suite) {
                Ok(s) => s,
                Err(e) => return invalid(e.to_string()),
            };
            match verify::verify(suite) {
                Ok(reports) => {
                    let passed = reports.iter().all(|r| r.passed);
                    print(&json!({ "passed": passed, "reports": reports }));
                    exit(if passed { 0 } else { 1 })
                }
                Err(e) => {
                    print(&json!({ "passed": false, "message": e.to_string() }));
                    exit(RunStatus::SolverFailure.exit_code())
                }
            }
        }
        Command::Validate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(m) => return invalid(m),
            };
            match runner::validate_config(&cfg) {
                Ok((_, _, report)) => {
                    let code = if report.admissible { 0 } else { RunStatus::InvalidInput.exit_code() };
                    print(&json!({ "accepted": report.accepted(), "report": report }));
                    exit(code)
                }
                Err(e) => invalid(e.to_string()),
            }
        }
    }
}
