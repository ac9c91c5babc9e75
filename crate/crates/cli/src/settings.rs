//! Config resolution and `section.key=value` overrides.

use std::path::{Path, PathBuf};

use ambiport_core::Config;

use crate::CliError;

/// Directory searched for relative config paths and for the default file.
pub const CONFIG_DIR_ENV: &str = "AMBIPORT_CONFIG_DIR";
/// File picked up from the config directory when no `--config` is given.
pub const DEFAULT_FILE: &str = "ambiport.toml";

/// Finds the config file to load, if any.
pub fn resolve_path(config: Option<&Path>, dir: Option<&Path>) -> Result<Option<PathBuf>, CliError> {
    match (config, dir) {
        (Some(p), _) if p.exists() => Ok(Some(p.to_path_buf())),
        (Some(p), Some(d)) if p.is_relative() && d.join(p).exists() => Ok(Some(d.join(p))),
        (Some(p), _) => Err(CliError::Config(format!("config file {} not found", p.display()))),
        (None, Some(d)) if d.join(DEFAULT_FILE).exists() => Ok(Some(d.join(DEFAULT_FILE))),
        (None, _) => Ok(None),
    }
}

/// Loads the config (or the built-in defaults) and applies overrides in order.
pub fn load(config: Option<&Path>, dir: Option<&Path>, overrides: &[String]) -> Result<Config, CliError> {
    let mut c = match resolve_path(config, dir)? {
        Some(p) => Config::load(&p)?,
        None => Config::default(),
    };
    for o in overrides {
        c = apply_override(&c, o)?;
    }
    Ok(c)
}

/// Sets one dotted key, e.g. `market.r=0.03` or `prior.probs=[0.5, 0.5]`.
/// The key must already exist; switch aggregators with an inline table such as
/// `ambiguity={kind="power", lambda=0.7}`.
pub fn apply_override(config: &Config, assignment: &str) -> Result<Config, CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad key `{key}`")));
    }
    let value = parse_value(raw.trim());
    let mut root = toml::Value::try_from(config).map_err(|e| CliError::Config(e.to_string()))?;
    let mut node = &mut root;
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{key}` does not name a config key")))?;
        let last = i + 1 == parts.len();
        if last {
            if !table.contains_key(*part) {
                return Err(CliError::Config(format!("unknown config key `{key}`")));
            }
            table.insert(part.to_string(), value.clone());
            break;
        }
        node = table
            .get_mut(*part)
            .ok_or_else(|| CliError::Config(format!("unknown config key `{key}`")))?;
    }
    root.try_into::<Config>()
        .map_err(|e| CliError::Config(format!("{key}: {e}")))
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
