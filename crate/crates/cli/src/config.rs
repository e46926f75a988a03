//! `--config=path` files: `key=value` lines spliced in front of the
//! command-line flags so that explicit flags win.

use std::ffi::OsString;
use std::fs;

fn parse_line(line: &str) -> Result<Option<(String, String)>, String> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| format!("config line without '=': {line}"))?;
    let key = key.trim().trim_start_matches("--");
    if key.is_empty() {
        return Err(format!("config line without a key: {line}"));
    }
    Ok(Some((key.to_string(), value.trim().to_string())))
}

/// Flags for the lines of a config file. `key=true` becomes `--key`,
/// `key=false` is dropped.
pub fn config_flags(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let Some((key, value)) = parse_line(line)? else {
            continue;
        };
        match value.as_str() {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => out.push(format!("--{key}={value}").into()),
        }
    }
    Ok(out)
}

/// Removes `--config` from `args` and inserts the file's flags right after
/// the subcommand.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if s == "--config" {
            let p = iter.next().ok_or("--config requires a path")?;
            path = Some(p.to_string_lossy().into_owned());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let flags = config_flags(&text)?;
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|i| i + 2)
        .unwrap_or(rest.len());
    rest.splice(sub..sub, flags);
    Ok(rest)
}
