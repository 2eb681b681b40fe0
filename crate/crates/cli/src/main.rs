//! `recon`: twin experiments for coefficient reconstruction from boundary data.

mod commands;
mod config;
mod csv;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "recon", version, about = "Coefficient reconstruction twin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize measurements from the configured true coefficient.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `output.dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Noise seed, overriding `noise.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct the coefficient from a measurements file.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Turn a result directory into plot data files.
    Report {
        results: PathBuf,
        /// Destination for the `.dat` files (default: the result directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let cfg = commands::load_config(&config, seed)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            commands::generate(&cfg, &out)
        }
        Command::Reconstruct {
            config,
            measurements,
            out,
            seed,
        } => {
            let cfg = commands::load_config(&config, seed)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            commands::reconstruct(&cfg, &measurements, &out)
        }
        Command::Report { results, out } => {
            let out = out.unwrap_or_else(|| results.clone());
            for path in commands::report(&results, &out)? {
                println!("{}", path.display());
            }
            Ok(())
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
