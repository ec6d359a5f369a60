//! Result persistence: `report.json`, CSV tables, `timings.json` and kernel dumps.
//!
//! `report.json` holds only deterministic content; wall-clock timings go to
//! `timings.json` so two runs with the same seed produce identical reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub passed: bool,
    pub config: &'a ScenarioConfig,
    pub result: T,
}

/// Output directory with helpers that refuse to write non-finite numbers.
#[derive(Debug, Clone)]
pub struct OutputDir {
    pub path: PathBuf,
}

impl OutputDir {
    pub fn create(path: &Path) -> Result<Self> {
        std::fs::create_dir_all(path)
            .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
        Ok(OutputDir {
            path: path.to_path_buf(),
        })
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path.join(name);
        std::fs::write(&p, text)
            .map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let v = serde_json::to_value(value)
            .map_err(|e| Error::Io(format!("cannot serialize {name}: {e}")))?;
        if let Some(path) = non_finite_path(&v, String::new()) {
            return Err(Error::Io(format!(
                "non-finite number at `{path}` in {name}"
            )));
        }
        let mut text = serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_timings(&self, timings: &BTreeMap<String, f64>) -> Result<PathBuf> {
        self.write_json(TIMINGS_FILE, timings)
    }
}

/// `serde_json` turns NaN and infinities into `null`. Every optional field of the
/// report types is skipped when absent, so any `null` left marks a non-finite float.
fn non_finite_path(v: &serde_json::Value, at: String) -> Option<String> {
    match v {
        serde_json::Value::Null => Some(at),
        serde_json::Value::Array(a) => a
            .iter()
            .enumerate()
            .find_map(|(i, x)| non_finite_path(x, format!("{at}[{i}]"))),
        serde_json::Value::Object(o) => o.iter().find_map(|(k, x)| {
            let p = if at.is_empty() {
                k.clone()
            } else {
                format!("{at}.{k}")
            };
            non_finite_path(x, p)
        }),
        _ => None,
    }
}

/// Largest finite stand-in for quantities that can legitimately be unbounded.
pub fn finite_or_max(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::MAX
    }
}

/// Finite check for a named result field.
pub fn require_finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Io(format!("non-finite value for `{name}`")))
    }
}
