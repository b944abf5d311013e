//! Command-line front end: run configs, data source strings, output files
//! and exit codes.

pub mod commands;
pub mod error;
pub mod pipeline;
pub mod source;
pub mod spec;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Overrides, Summary, TrainOutcome};
pub use error::{exit, CliError};
pub use spec::{LoadedSpec, RunSpec};

#[derive(Debug, Parser)]
#[command(name = "neglearn", version, about = "Negative-learning anomaly detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Negative passes per positive pass.
        #[arg(long)]
        q: Option<usize>,
        /// Output directory; defaults to $NEGLEARN_OUT/<run name>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a saved model on normal and anomalous data.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Data source string for normal samples.
        #[arg(long)]
        normal: String,
        /// Data source string for anomalous samples.
        #[arg(long)]
        anomaly: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train once per Q value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated Q values, e.g. 0,1,5,10.
        #[arg(long)]
        q: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train {
            config,
            seed,
            epochs,
            q,
            out,
        } => {
            let loaded = RunSpec::load(&config)?;
            let ov = Overrides {
                seed,
                epochs,
                q_negative: q,
                out,
            };
            let outcome = commands::train(&loaded, &ov)?;
            match &outcome.summary {
                Some(s) => println!("{}: auroc {:.4}", outcome.out_dir.display(), s.auroc),
                None => println!("{}", outcome.out_dir.display()),
            }
        }
        Command::Eval {
            model,
            normal,
            anomaly,
            out,
            seed,
        } => {
            let s = commands::evaluate(&model, &normal, &anomaly, &out, seed)?;
            println!("{}: auroc {:.4}", out.display(), s.auroc);
        }
        Command::Sweep {
            config,
            q,
            seed,
            epochs,
            out,
        } => {
            let qs = commands::parse_q_list(&q)?;
            let loaded = RunSpec::load(&config)?;
            let ov = Overrides {
                seed,
                epochs,
                q_negative: None,
                out,
            };
            let rows = commands::sweep(&loaded, &qs, &ov)?;
            for r in &rows {
                match (r.auroc, r.diverged) {
                    (_, true) => println!("q={}: diverged", r.q_negative),
                    (Some(a), _) => println!("q={}: auroc {a:.4}", r.q_negative),
                    (None, _) => println!("q={}: done", r.q_negative),
                }
            }
            let diverged: Vec<usize> = rows.iter().filter(|r| r.diverged).map(|r| r.q_negative).collect();
            if !diverged.is_empty() {
                return Err(CliError::SweepDiverged(diverged));
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => exit::OK,
                _ => exit::CONFIG,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
