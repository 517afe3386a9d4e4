//! Flat config files: one `key = value` per line, `#` comments. Keys mirror
//! the CLI flags one-to-one (underscores and dashes both accepted). The file
//! is expanded into flags placed right after the subcommand, so any flag
//! given on the command line overrides it.

use anyhow::{anyhow, Context};

/// Rewrites argv, splicing in the flags from a `--config FILE` if present.
pub fn argv_with_config(argv: Vec<String>) -> anyhow::Result<Vec<String>> {
    let Some(path) = find_config(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {path}"))?;
    let extra = parse_config(&text)?;
    // program name, then subcommand, then config-derived flags, then the rest
    if argv.len() < 2 {
        return Err(anyhow!("--config requires a subcommand"));
    }
    let mut out = argv[..2].to_vec();
    out.extend(extra);
    out.extend(argv[2..].iter().cloned());
    Ok(out)
}

fn find_config(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            return it.next().cloned();
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            return Some(path.to_string());
        }
    }
    None
}

fn parse_config(text: &str) -> anyhow::Result<Vec<String>> {
    let mut flags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key = value", lineno + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(anyhow!("config line {}: empty key or value", lineno + 1));
        }
        if key == "config" {
            return Err(anyhow!("config line {}: config files cannot nest", lineno + 1));
        }
        // booleans become bare value-taking flags (clap parses "true"/"false")
        flags.push(format!("--{key}"));
        flags.push(value.to_string());
    }
    Ok(flags)
}
