//! `--config` files: `key=value` lines expanded into flags.

use std::ffi::OsString;
use std::fs;

use crate::CliError;

fn parse_lines(text: &str, origin: &str) -> Result<Vec<OsString>, CliError> {
    let mut args = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected key=value", no + 1)))?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!(
                "{origin}:{}: invalid key '{key}'",
                no + 1
            )));
        }
        // single-letter keys keep their case (d, N, L)
        let flag = if key.len() == 1 {
            key.to_string()
        } else {
            key.replace('_', "-")
        };
        args.push(OsString::from(format!("--{flag}")));
        args.push(OsString::from(value.trim()));
    }
    Ok(args)
}

/// Replaces `--config <path>` with the file's flags, placed directly after the
/// subcommand so that explicit flags (which come later) win.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut files = Vec::new();
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a path".into()))?;
            files.push(path);
        } else if let Some(path) = text.strip_prefix("--config=") {
            files.push(OsString::from(path));
        } else {
            rest.push(arg);
        }
    }
    if files.is_empty() {
        return Ok(rest);
    }
    let mut injected = Vec::new();
    for path in files {
        let shown = path.to_string_lossy().into_owned();
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read config {shown}: {e}")))?;
        injected.extend(parse_lines(&text, &shown)?);
    }
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|i| i + 2)
        .ok_or_else(|| CliError::Usage("--config given without a subcommand".into()))?;
    rest.splice(sub..sub, injected);
    Ok(rest)
}
