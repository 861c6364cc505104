//! Library half of the `usdpns` command-line tool.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::CommandError;
use config::load_config;

/// Decoy-state BB84 without phase randomisation: key-rate bounds and the
/// USD+PNS attack.
///
/// Probabilities are fractions throughout. Losses are overall losses in dB,
/// detector efficiency included.
#[derive(Debug, Parser)]
#[command(name = "usdpns", version)]
pub struct Cli {
    /// JSON configuration file; omitted fields take their defaults.
    #[arg(long, global = true, env = "USDPNS_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Write the output here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Override one configuration field, e.g. `--set source.mu=0.4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal and linear-optics USD success probabilities, and the failure probability.
    Usd,
    /// Believed rate and attack cap at the configured loss.
    Bounds,
    /// CSV of both bounds over the configured loss grid.
    Sweep,
    /// Loss where the believed rate meets the attack cap.
    Crossover {
        /// Bisect this bracket instead of scanning the sweep grid.
        #[arg(long, requires = "hi", value_name = "DB")]
        lo: Option<f64>,
        #[arg(long, requires = "lo", value_name = "DB")]
        hi: Option<f64>,
    },
    /// Loss range in which the attack succeeds.
    Region,
    /// Monte Carlo run of the optimal attack, compared with the analytic statistics.
    Simulate,
}

/// Runs a parsed command line, writing output and diagnostics. Returns the
/// process exit status.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8 {
    match execute(cli) {
        Ok((text, diagnostics)) => {
            for d in diagnostics {
                let _ = writeln!(stderr, "warning: {d}");
            }
            let written = match &cli.out {
                Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    2
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(String, Vec<String>), CommandError> {
    let cfg = load_config(cli.config.as_deref(), &cli.overrides)?;
    let text = match &cli.command {
        Command::Usd => commands::usd(&cfg)?,
        Command::Bounds => commands::bounds(&cfg)?,
        Command::Sweep => return commands::sweep(&cfg),
        Command::Crossover { lo, hi } => commands::crossover(&cfg, lo.zip(*hi))?,
        Command::Region => commands::region(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
    };
    Ok((text, Vec::new()))
}
