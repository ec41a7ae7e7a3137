//! `--config FILE`: a JSON object whose keys mirror the subcommand's long
//! flags (`"gamma": 0.5`, `"out_dir": "runs/a"`). Values are appended as
//! flags unless the same flag was given on the command line.

use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::Value;

use crate::{usage, CliResult};

fn config_path(argv: &[OsString]) -> CliResult<Option<PathBuf>> {
    let mut it = argv.iter().skip(1);
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return match it.next() {
                Some(p) => Ok(Some(PathBuf::from(p))),
                None => Err(usage("--config needs a path")),
            };
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(p)));
        }
    }
    Ok(None)
}

fn given(argv: &[OsString], flag: &str) -> bool {
    let eq = format!("{flag}=");
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&eq)
    })
}

fn scalar(key: &str, v: &Value) -> CliResult<Option<String>> {
    Ok(match v {
        Value::Null | Value::Bool(false) => None,
        Value::Bool(true) => Some(String::new()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(|i| match i {
                    Value::Number(n) => Ok(n.to_string()),
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(usage(format!("config key `{key}`: unsupported list item {i}"))),
                })
                .collect::<CliResult<Vec<_>>>()?;
            Some(parts.join(","))
        }
        Value::Object(_) => return Err(usage(format!("config key `{key}`: nested objects are not flags"))),
    })
}

/// Returns `argv` with config-file values appended as flags.
pub fn merge_config(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let bytes = std::fs::read(&path)
        .map_err(|e| crate::CliError::Core(traitgeo::Error::Io { path: path.clone(), source: e }))?;
    let doc: Value = serde_json::from_slice(&bytes)
        .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(map) = doc else {
        return Err(usage(format!("config {}: expected a JSON object", path.display())));
    };
    let mut out = argv.clone();
    for (key, value) in &map {
        if key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if given(&argv, &flag) {
            continue;
        }
        match scalar(key, value)? {
            None => {}
            Some(v) if v.is_empty() && matches!(value, Value::Bool(true)) => out.push(flag.into()),
            Some(v) => {
                out.push(flag.into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}
