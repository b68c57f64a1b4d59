//! Report assembly: a JSON document with a provenance header plus the
//! plot-ready CSV renderings, written under a shared path prefix.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{Format, RunConfig};

/// Every report carries the tool version and the resolved configuration
/// that produced it, so a run can be reproduced from its own output.
#[derive(Serialize)]
pub struct Document<'a, T: Serialize> {
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub result: T,
}

pub fn document<'a, T: Serialize>(config: &'a RunConfig, result: T) -> Document<'a, T> {
    Document {
        version: env!("CARGO_PKG_VERSION"),
        command: &config.command,
        config,
        result,
    }
}

/// Write the requested formats under `<prefix>.<command>.{json,csv}`.
/// Returns the written paths. No-op when no prefix was configured.
pub fn write_reports<T: Serialize>(
    config: &RunConfig,
    result: &T,
    csv: &str,
) -> Result<Vec<PathBuf>> {
    let Some(prefix) = &config.output.prefix else {
        return Ok(Vec::new());
    };
    let format = config.output.format.unwrap_or(Format::Json);
    let mut written = Vec::new();
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() && !dir.exists() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
        }
    }
    let stem = prefix.as_os_str().to_string_lossy();
    if format.wants_json() {
        let path = PathBuf::from(format!("{stem}.{}.json", config.command));
        let doc = document(config, result);
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        std::fs::write(&path, text)
            .with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
    }
    if format.wants_csv() {
        let path = PathBuf::from(format!("{stem}.{}.csv", config.command));
        std::fs::write(&path, csv)
            .with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

/// One number for the human summary: 12 decimals, trailing zeros trimmed,
/// so exact integers print bare ("1") and `1 + 9e-16` does not print as a
/// sixteen-digit number. Full precision lives in the JSON/CSV reports.
pub fn short(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let text = format!("{v:.12}");
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    match trimmed {
        "-0" => "0".to_string(),
        t => t.to_string(),
    }
}

/// Compact list rendering for the human summary: `[a, b, c]`.
pub fn list(values: &[f64]) -> String {
    let inner: Vec<String> = values.iter().map(|&v| short(v)).collect();
    format!("[{}]", inner.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FlagOverrides, resolve};

    #[test]
    fn lists_render_like_numbers() {
        assert_eq!(list(&[0.0, 1.0, 2.5]), "[0, 1, 2.5]");
        assert_eq!(list(&[]), "[]");
        assert_eq!(short(1.0 + 9e-16), "1");
        assert_eq!(short(-1.2247448713915887), "-1.224744871392");
        assert_eq!(short(-1e-17), "0");
    }

    #[test]
    fn reports_land_under_the_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let mut flags = FlagOverrides::default();
        flags.system = Some("harmonic".into());
        flags.params.insert("omega".into(), 1.0);
        flags.out = Some(dir.path().join("run"));
        flags.format = Some(Format::Both);
        let cfg = resolve("analyze", None, flags).unwrap();
        let written = write_reports(&cfg, &vec![1.0, 2.0], "a,b\n1,2\n").unwrap();
        assert_eq!(written.len(), 2);
        assert!(dir.path().join("run.analyze.json").exists());
        assert!(dir.path().join("run.analyze.csv").exists());
        let text = std::fs::read_to_string(dir.path().join("run.analyze.json")).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(doc["command"], "analyze");
        assert_eq!(doc["config"]["system"]["name"], "harmonic");
        assert_eq!(doc["result"][1], 2.0);
    }
}
