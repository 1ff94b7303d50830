use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sobolev_lab::study::seed_from_env;
use sobolev_lab::{run_to_dir, LabError, StudyConfig};
use sobolev_lab_core::corpus;

#[derive(Parser)]
#[command(name = "sobolev-lab", version, about = "Run discrete studies of Sobolev fine properties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study config and write `<name>.csv` and `<name>.summary.txt`.
    Run {
        /// Config file.
        config: PathBuf,
        /// Worker cap.
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: Option<u16>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// List the registered test functions.
    ListCorpus,
    /// Parse and validate a config without running it.
    Validate {
        /// Config file.
        config: PathBuf,
    },
}

fn exec(cli: Cli) -> Result<(), LabError> {
    match cli.command {
        Command::Run { config, jobs, out } => {
            let cfg = StudyConfig::from_path(&config, seed_from_env()?)?;
            let (csv, summary) = run_to_dir(&cfg, &out, jobs.map(usize::from))?;
            println!("wrote {} and {}", csv.display(), summary.display());
        }
        Command::ListCorpus => {
            for e in corpus::entries() {
                println!("{:<12} {:<10} {:<18} {}", e.id, format!("{:?}", e.dims), format!("{:?}", e.smoothness), e.description);
            }
        }
        Command::Validate { config } => {
            let cfg = StudyConfig::from_path(&config, seed_from_env()?)?;
            println!("ok: {} study `{}`", cfg.kind, cfg.name);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match exec(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
