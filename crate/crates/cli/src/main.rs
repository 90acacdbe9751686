//! `optrack`: tracked and reference runs, and the experiment drivers, with
//! CSV outputs and a JSON manifest per run.

mod args;
mod commands;
mod grid;
mod output;
mod source;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Experiment};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<optrack::Error> for CliError {
    fn from(e: optrack::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else if matches!(e, optrack::Error::Io(_)) {
            CliError::Io(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("OPTRACK_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("OPTRACK_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn run(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Track(a) => commands::track(&a, argv),
        Command::Oracle(a) => commands::oracle(&a, argv),
        Command::Experiment(Experiment::DtSweep(a)) => commands::dt_sweep(&a, argv),
        Command::Experiment(Experiment::Rate(a)) => commands::rate(&a, argv),
        Command::Experiment(Experiment::Contraction(a)) => commands::contraction(&a, argv),
        Command::Experiment(Experiment::Compare(a)) => commands::compare(&a, argv),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version go to stdout with status 0, usage errors exit 2
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optrack: {e}");
            ExitCode::from(e.code())
        }
    }
}
