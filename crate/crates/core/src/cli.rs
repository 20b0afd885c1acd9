//! Command-line interface: `run`, `summarize` and `validate`.
//!
//! Exit codes: 0 on success, 1 for invalid configs, inputs or arguments,
//! 2 for failures while running.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::experiment::{run_experiment, summarize, write_gaps, write_outputs, ExperimentConfig};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "sixdma", version, about = "Passive 6DMA uplink simulator and experiment runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every (scheme, pattern, power, seed) cell of an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print isotropic-minus-directive gaps from a results CSV.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_FAILURE: u8 = 2;

/// Exit code for an error: configuration and argument problems are 1, the rest 2.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::ConfigAt { .. } | Error::InvalidArgument(_) => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out, jobs } => {
            if jobs == Some(0) {
                return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
            }
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
            let results = run_experiment(&cfg, jobs)?;
            let paths = write_outputs(&dir, &cfg, &results)?;
            eprintln!(
                "{} runs in {:.1}s -> {}, {}",
                results.runs.len(),
                results.runtime_s,
                paths.csv.display(),
                paths.json.display()
            );
        }
        Command::Summarize { input } => {
            let file = File::open(&input)
                .map_err(|e| Error::Config(format!("cannot open {}: {e}", input.display())))?;
            let gaps = summarize(file)?;
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_gaps(&mut lock, &gaps)?;
            lock.flush()?;
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("{}: ok, {} runs", config.display(), cfg.cells().len());
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
