//! Command-line front end for `dyadml`.
//!
//! ```text
//! dyadml --config run.json [--seed N] [--out PATH] [--dump-dgp PATH]
//! dyadml report a.rec b.rec [--out PATH]
//! ```
//!
//! Every failure prints one `error[code]: detail` line to stderr and exits
//! nonzero.

pub mod commands;
pub mod config;
pub mod error;
pub mod record;
pub mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub use commands::{cmd_dump_dgp, cmd_estimate, cmd_report, cmd_simulate};
pub use config::{Cell, Command, RunConfig, Score};
pub use error::CliError;
pub use record::ResultsRecord;

#[derive(Debug, Parser)]
#[command(name = "dyadml", version, about = "Double/debiased machine learning for dyadic data")]
pub struct Cli {
    /// Must agree with the config's `command` if both are given.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Record files to merge (report only).
    pub inputs: Vec<PathBuf>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; replaces the config's `output_path`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write one simulated sample for the first cell to PATH and exit.
    #[arg(long, value_name = "PATH")]
    pub dump_dgp: Option<PathBuf>,
}

fn resolve(cli: Cli) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let mut cfg = match (&cli.config, cli.command) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(Command::Report)) => RunConfig::from_json(r#"{"command":"report"}"#)?,
        (None, _) => return Err(CliError::usage("--config is required")),
    };
    if let Some(c) = cli.command {
        if c != cfg.command {
            return Err(CliError::usage(format!("command {c:?} does not match config command {:?}", cfg.command)));
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_path = Some(out);
    }
    if !cli.inputs.is_empty() {
        if cfg.command != Command::Report {
            return Err(CliError::usage("positional inputs are only accepted by report"));
        }
        cfg.inputs = cli.inputs;
    }
    Ok((cfg, cli.dump_dgp))
}

fn dispatch(cfg: &RunConfig, dump: Option<PathBuf>, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    if let Some(path) = dump {
        return cmd_dump_dgp(cfg, &path);
    }
    match cfg.command {
        Command::Simulate => cmd_simulate(cfg, out).map(drop),
        Command::Estimate => cmd_estimate(cfg, out).map(drop),
        Command::Report => cmd_report(&cfg.inputs, cfg.output_path.as_deref(), out, err).map(drop),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let _ = writeln!(err, "{}", CliError::usage(first));
            return 2;
        }
    };
    let result = resolve(cli).and_then(|(cfg, dump)| dispatch(&cfg, dump, out, err));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod guide {}
