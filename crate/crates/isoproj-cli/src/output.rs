//! Deterministic report emission: JSON with sorted keys, RFC-4180 CSV fields.

use anyhow::Context;
use serde_json::Value;
use std::path::Path;

/// Pretty-prints `value` to `out`, or stdout when no path is given.
/// serde_json sorts object keys, so output is byte-stable for a given seed.
pub fn emit_json(value: &Value, out: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Quotes a CSV field per RFC 4180 when it contains commas, quotes, or
/// newlines; numeric fields pass through untouched.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
