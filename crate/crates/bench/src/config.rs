//! Flat `key=value` config files, merged into the command line.
//!
//! Each `key=value` line becomes `--key value`; `key=true` becomes a bare
//! `--key` and `key=false` is dropped. File arguments are placed directly
//! after the subcommand, so flags given on the command line override them.
//! Blank lines and lines starting with `#` are ignored.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::{BenchError, Result};

pub const CONFIG_FLAG: &str = "--config";

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            BenchError::Usage(format!(
                "config line {}: expected key=value, got `{line}`",
                n + 1
            ))
        })?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() {
            return Err(BenchError::Usage(format!(
                "config line {}: empty key",
                n + 1
            )));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn as_args(pairs: Vec<(String, String)>) -> Vec<OsString> {
    let mut args = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => args.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{k}").into());
                args.push(v.into());
            }
        }
    }
    args
}

/// Removes `--config <path>` (or `--config=<path>`) from `argv` and splices
/// the file's arguments in after the subcommand.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == CONFIG_FLAG {
            let p = it
                .next()
                .ok_or_else(|| BenchError::Usage(format!("{CONFIG_FLAG} needs a path")))?;
            path = Some(p);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file_args = as_args(parse_config(&text)?);
    // argv[0] is the program; the subcommand is the first non-flag token.
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(rest.len(), |i| i + 2);
    rest.splice(at..at, file_args);
    Ok(rest)
}
