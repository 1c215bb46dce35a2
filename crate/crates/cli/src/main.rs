//! `specden`: simulate sample covariance spectra, solve the limiting law,
//! estimate densities, and run CLT experiments.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.

mod args;
mod commands;
mod config;
mod output;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::Cli;

#[derive(Debug)]
pub enum CliError {
    Core(specden::Error),
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "cli: {m}"),
            CliError::Io(m) => write!(f, "cli: io: {m}"),
        }
    }
}

impl From<specden::Error> for CliError {
    fn from(e: specden::Error) -> Self {
        CliError::Core(e)
    }
}

/// Parses `argv` with config-file values merged in. Returns the parsed
/// command and the resolved argv recorded in manifests.
pub fn resolve(argv: &[String]) -> Result<Result<(Cli, Vec<String>), clap::Error>, CliError> {
    let argv = config::split_equals(argv);
    let mut merged = argv.clone();
    // Lenient pass: required flags may still be supplied by the config file.
    if let Ok(first) = Cli::command().ignore_errors(true).try_get_matches_from(config::os_args(&argv)) {
        if let (Some((name, sub)), Some(path)) = (first.subcommand(), first.get_one::<std::path::PathBuf>("config")) {
            merged.extend(config::config_tokens(path, name, sub)?);
        }
    }
    let matches = match Cli::command().try_get_matches_from(config::os_args(&merged)) {
        Ok(m) => m,
        Err(e) => return Ok(Err(e)),
    };
    if let Some((_, sub)) = matches.subcommand() {
        merged.extend(config::env_tokens(sub));
    }
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return Ok(Err(e)),
    };
    let resolved = config::canonical_argv(&merged)?;
    Ok(Ok((cli, resolved)))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let argv: Vec<String> = std::env::args().collect();
    let (cli, resolved) = match resolve(&argv) {
        Ok(Ok(v)) => v,
        Ok(Err(e)) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match commands::run(&cli, &resolved) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
