//! Experiment configuration: flat `key = value` text with one `[command]`
//! section per subcommand, or the same content as JSON.
//!
//! Keys before the first section apply to every command. Values are read as
//! JSON literals where possible (`3`, `0.25`, `[2, 4]`, `true`) and as bare
//! strings otherwise. Unknown keys are rejected when the section is decoded.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const COMMANDS: [&str; 7] = ["tables", "transfer", "correlate", "fringes", "quench", "tomography-fit", "tomography-synthesize"];

fn literal(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.trim_matches('\'').to_string()))
}

fn parse_sections(text: &str, command: &str) -> Result<Map<String, Value>, CliError> {
    let mut out = Map::new();
    let mut current: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !COMMANDS.contains(&name) {
                return Err(CliError::Config(format!("line {}: unknown section [{name}]", k + 1)));
            }
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", k + 1)))?;
        let applies = current.as_deref().is_none_or(|c| c == command);
        if applies && out.insert(key.trim().to_string(), literal(value)).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key '{}'", k + 1, key.trim())));
        }
    }
    Ok(out)
}

fn parse_json(text: &str, command: &str) -> Result<Map<String, Value>, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(CliError::Config("JSON configuration must be an object".into()));
    };
    let sectioned = map.keys().any(|k| COMMANDS.contains(&k.as_str()));
    if !sectioned {
        return Ok(map);
    }
    let mut out = Map::new();
    let mut section = None;
    for (k, v) in map {
        if COMMANDS.contains(&k.as_str()) {
            if !v.is_object() {
                return Err(CliError::Config(format!("section '{k}' must be an object")));
            }
            if k == command {
                section = Some(v);
            }
        } else {
            out.insert(k, v);
        }
    }
    if let Some(Value::Object(s)) = section {
        for (k, v) in s {
            out.insert(k, v);
        }
    }
    Ok(out)
}

/// Raw keys for `command` from `text`.
pub fn parse(text: &str, command: &str) -> Result<Map<String, Value>, CliError> {
    if text.trim_start().starts_with('{') {
        parse_json(text, command)
    } else {
        parse_sections(text, command)
    }
}

/// Reads the configuration for `command`; no file means all defaults.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, command: &str) -> Result<T, CliError> {
    let map = match path {
        Some(p) => parse(&std::fs::read_to_string(p)?, command)?,
        None => Map::new(),
    };
    serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Config(format!("[{command}] {e}")))
}

/// SHA-256 over the command name and the fully resolved configuration.
pub fn hash<T: Serialize>(command: &str, config: &T) -> String {
    let body = serde_json::to_string(&(command, config)).expect("configs serialise");
    hex::encode(Sha256::digest(body.as_bytes()))
}
