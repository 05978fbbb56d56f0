//! Run manifests: sorted key=value lines echoing the fully resolved
//! configuration, written next to every output and re-loadable to reproduce
//! a run byte for byte (the generated-at comment line aside).

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::RunError;

/// Write `manifest.txt` into `dir`.
pub fn write(dir: &Path, subcommand: &str, entries: &[(String, String)]) -> Result<(), RunError> {
    let mut lines: Vec<String> = entries
        .iter()
        .map(|(k, v)| format!("arg.{k}={v}"))
        .collect();
    lines.push(format!("subcommand={subcommand}"));
    lines.sort();
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = format!("# generated_unix={stamp}\n");
    out.push_str(&lines.join("\n"));
    out.push('\n');
    fs::write(dir.join("manifest.txt"), out).map_err(RunError::from)
}

/// Rebuild the argv that produced a manifest.
pub fn to_argv(manifest: &str) -> Result<Vec<String>, RunError> {
    let mut subcommand = None;
    let mut args = Vec::new();
    for line in manifest.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            RunError::Config(format!("manifest line without '=': '{line}'"))
        })?;
        if key == "subcommand" {
            subcommand = Some(value.to_owned());
        } else if let Some(flag) = key.strip_prefix("arg.") {
            args.push(format!("--{flag}"));
            args.push(value.to_owned());
        } else {
            return Err(RunError::Config(format!("unknown manifest key '{key}'")));
        }
    }
    let sub = subcommand
        .ok_or_else(|| RunError::Config("manifest is missing the subcommand line".into()))?;
    let mut argv = vec!["binshrink".to_owned(), sub];
    argv.extend(args);
    Ok(argv)
}
