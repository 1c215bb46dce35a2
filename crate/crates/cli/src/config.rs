//! TOML config files and argv resolution.
//!
//! A config file holds one table per subcommand whose keys are flag names
//! (`h-exponent` or `h_exponent`). Values fill in flags absent from the command
//! line, so the precedence is flags > config > `SPECDEN_SEED` > defaults.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::ArgMatches;

use crate::CliError;

/// Flags whose values are filesystem paths.
pub const PATH_FLAGS: &[&str] = &["--eig", "--t-spectrum", "--out", "--manifest", "--out-dir", "--config"];

/// Splits `--flag=value` into two tokens.
pub fn split_equals(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    for tok in argv {
        match tok.strip_prefix("--").and_then(|rest| rest.split_once('=')) {
            Some((flag, value)) => {
                out.push(format!("--{flag}"));
                out.push(value.to_string());
            }
            None => out.push(tok.clone()),
        }
    }
    out
}

fn toml_scalar(value: &toml::Value) -> Option<String> {
    match value {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        _ => None,
    }
}

fn load_table(path: &Path, subcommand: &str) -> Result<toml::Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    match doc.get(subcommand) {
        None => Ok(toml::Table::new()),
        Some(toml::Value::Table(t)) => Ok(t.clone()),
        Some(_) => Err(CliError::usage(format!("{}: `{subcommand}` must be a table", path.display()))),
    }
}

/// Tokens for the config entries of `subcommand` not already on the command line.
pub fn config_tokens(path: &Path, subcommand: &str, sub: &ArgMatches) -> Result<Vec<String>, CliError> {
    let table = load_table(path, subcommand)?;
    let mut out = Vec::new();
    for (key, value) in &table {
        let id = key.replace('-', "_");
        let flag = format!("--{}", key.replace('_', "-"));
        if sub.try_get_raw(&id).is_err() {
            return Err(CliError::usage(format!(
                "{}: `{subcommand}` has no flag {flag}",
                path.display()
            )));
        }
        if sub.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts: Option<Vec<String>> = items.iter().map(toml_scalar).collect();
                let parts = parts.ok_or_else(|| CliError::usage(format!("{}: {key}: unsupported array item", path.display())))?;
                out.push(flag);
                out.push(parts.join(","));
            }
            other => {
                let s = toml_scalar(other)
                    .ok_or_else(|| CliError::usage(format!("{}: {key}: unsupported value", path.display())))?;
                out.push(flag);
                out.push(resolve_relative(path, key, s));
            }
        }
    }
    Ok(out)
}

/// Path values in a config file are relative to the file.
fn resolve_relative(config: &Path, key: &str, value: String) -> String {
    let flag = format!("--{}", key.replace('_', "-"));
    if !PATH_FLAGS.contains(&flag.as_str()) || Path::new(&value).is_absolute() {
        return value;
    }
    let base = config.parent().unwrap_or(Path::new("."));
    base.join(value).to_string_lossy().into_owned()
}

/// Pins values that came from the environment so a replay does not depend on it.
pub fn env_tokens(sub: &ArgMatches) -> Vec<String> {
    let mut out = Vec::new();
    for id in sub.ids() {
        let id = id.as_str();
        if sub.value_source(id) != Some(ValueSource::EnvVariable) {
            continue;
        }
        if let Ok(Some(raw)) = sub.try_get_raw(id) {
            let values: Vec<String> = raw.map(|v: &std::ffi::OsStr| v.to_string_lossy().into_owned()).collect();
            out.push(format!("--{}", id.replace('_', "-")));
            out.push(values.join(","));
        }
    }
    out
}

/// Absolute paths for path-valued flags. `--config` is dropped because its
/// contents are already merged in, and `--json` because it only affects stdout.
pub fn canonical_argv(argv: &[String]) -> Result<Vec<String>, CliError> {
    let mut out = Vec::with_capacity(argv.len());
    let mut iter = argv.iter();
    while let Some(tok) = iter.next() {
        if tok == "--config" {
            iter.next();
            continue;
        }
        if tok == "--json" {
            continue;
        }
        out.push(tok.clone());
        if PATH_FLAGS.contains(&tok.as_str()) {
            if let Some(v) = iter.next() {
                out.push(absolute(Path::new(v))?.to_string_lossy().into_owned());
            }
        }
    }
    Ok(out)
}

pub fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| CliError::io(p, e))
}

pub fn os_args(argv: &[String]) -> Vec<OsString> {
    argv.iter().map(OsString::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn equals_form_is_split() {
        let got = split_equals(&strings(&["specden", "--n=5", "--json", "x=y"]));
        assert_eq!(got, strings(&["specden", "--n", "5", "--json", "x=y"]));
    }

    #[test]
    fn canonical_drops_config_and_absolutizes_paths() {
        let got = canonical_argv(&strings(&["specden", "density", "--json", "--config", "a.toml", "--out", "d.csv", "--c", "0.5"])).unwrap();
        assert_eq!(got.len(), 6);
        assert!(Path::new(&got[3]).is_absolute());
        assert_eq!(got[4..], strings(&["--c", "0.5"]));
    }
}
