//! `beamlab`: run beam scenarios from TOML files.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure,
//! 3 failed assertion under `--assert`.

mod config;
mod error;
mod output;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ScenarioConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "beamlab", version, about = "Beam with tip body: spectra, resolvents, energy decay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the stages listed in the scenario's `run` array.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 3 if any `[assert]` check fails.
        #[arg(long)]
        assert: bool,
    },
    /// Write the energy matrix E and structure matrix S as sparse triplets.
    ExportMatrices {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(config: &ScenarioConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| config.output.dir.clone())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, assert } => {
            let config = ScenarioConfig::load(&config)?;
            let dir = out_dir(&config, out);
            let report = runner::run(&config, &dir)?;
            for a in &report.assertions {
                let status = if a.passed { "ok" } else { "FAILED" };
                eprintln!("assert {}: {status} ({})", a.name, a.detail);
            }
            eprintln!("wrote {}", Path::new(&dir).display());
            let failed: Vec<&str> = report.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
            if assert && !failed.is_empty() {
                return Err(CliError::Assertion(failed.join(", ")));
            }
            Ok(())
        }
        Command::ExportMatrices { config, out } => {
            let config = ScenarioConfig::load(&config)?;
            let dir = out_dir(&config, out);
            runner::export_matrices(&config, &dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("beamlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
