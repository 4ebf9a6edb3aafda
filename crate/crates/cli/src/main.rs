mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::Overrides;
use crate::error::CliError;

/// Secrecy bounds, exact codebook simulation and the ternary example for
/// three-node cascade networks.
///
/// Every flag can also be set through the environment variable shown with
/// it (prefix `CASCADE_`); flags win over the environment, which wins over
/// the config file.
///
/// Exit codes: 0 success, 1 runtime error, 2 config or schema error,
/// 3 infeasible problem, 4 a verification check failed.
#[derive(Debug, Parser)]
#[command(name = "cascade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config: {"seed", "restarts", "samples", "tol", "problem"}.
    #[arg(long, global = true, env = "CASCADE_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "CASCADE_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "CASCADE_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, env = "CASCADE_RESTARTS")]
    restarts: Option<usize>,
    /// Monte Carlo samples for `simulate` (0 skips sampling).
    #[arg(long, global = true, env = "CASCADE_SAMPLES")]
    samples: Option<usize>,
    /// Tolerance override for the command's checks.
    #[arg(long, global = true, env = "CASCADE_TOL")]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search the inner bound; writes bounds.json and frontier.csv.
    Bounds,
    /// Exact small-blocklength simulation; writes audit.json and payoff.csv.
    Simulate,
    /// The ternary example curve; writes curve.csv and example.json.
    Example,
    /// Equivocation value with a witness; writes equivocation.json.
    Equivocation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        seed: cli.seed,
        restarts: cli.restarts,
        samples: cli.samples,
        tol: cli.tol,
    };
    let cfg = cli.config.as_ref();
    let result = match cli.command {
        Command::Bounds => commands::bounds(cfg, &ov, &cli.out),
        Command::Simulate => commands::simulate(cfg, &ov, &cli.out),
        Command::Example => commands::example(cfg, &ov, &cli.out),
        Command::Equivocation => commands::equivocation(cfg, &ov, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match &e {
                CliError::Schema { .. } => "schema",
                CliError::Infeasible(_) => "infeasible",
                CliError::CheckFailed(_) => "check_failed",
                _ => "runtime",
            };
            let mut msg = json!({ "error": kind, "message": e.to_string() });
            match &e {
                CliError::Schema { path, .. } => msg["path"] = json!(path),
                CliError::Infeasible(reason) => msg["reason"] = json!(reason),
                _ => {}
            }
            eprintln!("error: {e}");
            println!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
