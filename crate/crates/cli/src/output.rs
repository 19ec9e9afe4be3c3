//! Artifact writing: CSV files, text reports and JSON manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(contents).map_err(|e| CliError::io(path, e))
}

/// Full-precision float text that round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One measured-versus-expected comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    /// Human-readable acceptance rule, e.g. `|Δ| ≤ 1e-6`.
    pub rule: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, expected: f64, rule: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            measured,
            expected,
            rule: rule.into(),
            pass,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: measured {:.6e}, expected {:.6e} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.expected,
            self.rule
        )
    }
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("check,measured,expected,rule,pass\n");
    for c in checks {
        s.push_str(&format!(
            "{},{},{},\"{}\",{}\n",
            c.name,
            fmt_f64(c.measured),
            fmt_f64(c.expected),
            c.rule.replace('"', "'"),
            c.pass
        ));
    }
    s
}

#[derive(Serialize)]
struct Manifest<'a, S: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    outputs: &'a [String],
    summary: &'a S,
    config: &'a RunConfig,
}

/// Writes `<stem>.manifest.json` next to the outputs. Contents depend only on
/// the inputs, so reruns produce identical bytes.
pub fn write_manifest<S: Serialize>(
    dir: &Path,
    stem: &str,
    command: &str,
    config: &RunConfig,
    outputs: &[PathBuf],
    summary: &S,
) -> Result<PathBuf, CliError> {
    let names: Vec<String> = outputs
        .iter()
        .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = Manifest {
        tool: "unravel",
        version: env!("CARGO_PKG_VERSION"),
        command,
        outputs: &names,
        summary,
        config,
    };
    let path = dir.join(format!("{stem}.manifest.json"));
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&path, text.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_roundtrips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn manifest_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        let outs = vec![dir.path().join("a.csv")];
        let p1 = write_manifest(dir.path(), "a", "test", &cfg, &outs, &serde_json::json!({"x": 1.5})).unwrap();
        let first = fs::read(&p1).unwrap();
        write_manifest(dir.path(), "a", "test", &cfg, &outs, &serde_json::json!({"x": 1.5})).unwrap();
        assert_eq!(first, fs::read(&p1).unwrap());
        let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
        assert_eq!(v["outputs"][0], "a.csv");
        assert_eq!(v["config"]["damped_ho"]["dim"], 15);
    }
}
