//! Layering of flag sources: command line, then `SEVBENCH_*` environment
//! variables, then `sevbench.toml`.
//!
//! The config file mirrors the command tree. Top-level keys apply to global
//! flags; a table per subcommand holds its flags, keyed by long name:
//!
//! ```toml
//! seed = 7
//!
//! [sample]
//! k = 300
//! solver = "giga"
//!
//! [bench.partition]
//! holdout-fraction = 0.25
//! ```

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgAction, Command, CommandFactory};

use crate::args::Cli;
use crate::error::CliError;

pub const DEFAULT_CONFIG: &str = "sevbench.toml";
pub const ENV_PREFIX: &str = "SEVBENCH_";

const SKIPPED: [&str; 3] = ["help", "version", "config"];

/// Returns `argv` extended with flags filled in from the environment and
/// config file, for every flag not given on the command line.
pub fn layer_argv(
    argv: Vec<OsString>,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<Vec<OsString>, CliError> {
    // Required flags may still arrive from the environment or config, so
    // the first pass must not insist on them.
    let mut root = relaxed(Cli::command());
    root.build();
    let matches = root.clone().try_get_matches_from(&argv)?;

    let config = load_config(matches.get_one::<PathBuf>("config").map(PathBuf::as_path))?;

    let mut cmd = &root;
    let mut m = &matches;
    let mut path: Vec<String> = Vec::new();
    while let Some((name, sub)) = m.subcommand() {
        cmd = cmd.find_subcommand(name).expect("parsed subcommand exists");
        m = sub;
        path.push(name.to_string());
    }
    let table = config.as_ref().and_then(|c| section(c, &path));
    if let Some(t) = table {
        check_keys(cmd, t, &path)?;
    }

    let mut extra: Vec<OsString> = Vec::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if SKIPPED.contains(&id) || m.value_source(id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let env_key = format!("{ENV_PREFIX}{}", id.to_ascii_uppercase().replace('-', "_"));
        let value = match env(&env_key) {
            Some(v) => Some(v),
            None => {
                let from_table = table.and_then(|t| t.get(long).or_else(|| t.get(id)));
                let from_root = arg
                    .is_global_set()
                    .then(|| config.as_ref().and_then(|c| c.get(long)))
                    .flatten();
                match from_table.or(from_root) {
                    Some(v) => Some(render(v).map_err(|e| CliError::Usage(format!("config key `{long}`: {e}")))?),
                    None => None,
                }
            }
        };
        let Some(value) = value else { continue };
        match arg.get_action() {
            ArgAction::SetTrue => {
                let on: bool = value
                    .parse()
                    .map_err(|_| CliError::Usage(format!("`{long}` expects true or false, got {value:?}")))?;
                if on {
                    extra.push(format!("--{long}").into());
                }
            }
            _ => {
                extra.push(format!("--{long}").into());
                extra.push(value.into());
            }
        }
    }
    let mut out = argv;
    out.extend(extra);
    Ok(out)
}

fn relaxed(cmd: Command) -> Command {
    let names: Vec<String> = cmd.get_subcommands().map(|c| c.get_name().to_string()).collect();
    let mut cmd = cmd.mut_args(|a| a.required(false));
    for name in names {
        cmd = cmd.mut_subcommand(name, relaxed);
    }
    cmd
}

fn load_config(explicit: Option<&Path>) -> Result<Option<toml::Table>, CliError> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let p = PathBuf::from(DEFAULT_CONFIG);
            if !p.exists() {
                return Ok(None);
            }
            p
        }
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    Ok(Some(table))
}

fn section<'a>(config: &'a toml::Table, path: &[String]) -> Option<&'a toml::Table> {
    let mut t = config;
    for p in path {
        t = t.get(p)?.as_table()?;
    }
    Some(t)
}

fn check_keys(cmd: &Command, table: &toml::Table, path: &[String]) -> Result<(), CliError> {
    for (key, value) in table {
        if value.is_table() && cmd.find_subcommand(key).is_some() {
            continue;
        }
        let known = cmd
            .get_arguments()
            .any(|a| a.get_long() == Some(key.as_str()) || a.get_id().as_str() == key);
        if !known {
            return Err(CliError::Usage(format!("unknown key `{key}` in config section [{}]", path.join("."))));
        }
    }
    Ok(())
}

fn render(v: &toml::Value) -> Result<String, String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items.iter().map(render).collect::<Result<Vec<_>, _>>()?.join(","),
        other => return Err(format!("unsupported value {other}")),
    })
}
