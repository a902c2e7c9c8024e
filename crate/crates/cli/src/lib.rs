//! Command-line front end: fuse a dataset into a map, evaluate it, query it,
//! and generate synthetic corpora.
//!
//! Every command returns an exit code: 0 on success, 1 on a runtime failure,
//! 2 on a usage or configuration error. Logs go to stderr; machine-readable
//! output goes to the given writer (stdout for the binary) or to files.

pub mod eval;
pub mod fuse;
pub mod query;
pub mod synth;

use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, invalid configuration or missing inputs.
    #[error("{0}")]
    Usage(String),
    /// Failure while processing valid inputs.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "promptmap", version, about = "Open-vocabulary panoptic mapping")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse a dataset manifest into a map directory.
    Fuse(fuse::FuseArgs),
    /// Evaluate a map against a ground-truth sidecar.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
    /// Rank map submaps against a text or embedding query.
    Query(query::QueryArgs),
    /// Generate a synthetic corpus from a JSON spec.
    Synth(synth::SynthArgs),
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // A second initialisation (several runs in one process) is harmless.
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().target(env_logger::Target::Stderr).try_init();
}

/// Parses `args` (program name first) and runs the command, writing machine
/// output to `out`. Returns the process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Fuse(a) => fuse::cmd_fuse(a, out).map(|_| ()),
        Command::Eval(c) => eval::cmd_eval(c, out),
        Command::Query(a) => query::cmd_query(a, out),
        Command::Synth(a) => synth::cmd_synth(a, out),
    };
    match result.and_then(|()| out.flush().map_err(|e| CliError::Runtime(format!("writing output: {e}")))) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock())
}

pub(crate) fn write_line(out: &mut dyn Write, line: &str) -> CliResult<()> {
    writeln!(out, "{line}").map_err(|e| CliError::Runtime(format!("writing output: {e}")))
}

pub(crate) fn write_json_file<T: serde::Serialize>(path: &std::path::Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}
