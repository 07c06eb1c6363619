//! Text formats for mechanisms, trajectories, results and audits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

mod audit;
mod mechanism;
mod problem;
mod result;
mod trajectory;

pub use audit::{write_audit_csv, write_curve_csv};
pub use mechanism::{load_mechanism, mechanism_sha256, parse_mechanism, write_mechanism};
pub use problem::{parse_step_problem_csv, write_step_problem_csv, write_trace_csv};
pub use result::{parse_result, write_result, ResultHeader};
pub use trajectory::{parse_sidecar, parse_trajectory_csv, write_sidecar, write_trajectory_csv, TrajectoryMeta};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tool version and configuration hash stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub version: String,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(config_sha256: &str) -> Self {
        Self { version: TOOL_VERSION.to_string(), config_sha256: config_sha256.to_string() }
    }

    pub fn write_key_values(&self, out: &mut String) {
        let _ = writeln!(out, "tool_version={}", self.version);
        let _ = writeln!(out, "config_sha256={}", self.config_sha256);
    }

    /// Same information as `#` comment lines, for CSV files.
    pub fn write_comment(&self, out: &mut String) {
        let _ = writeln!(out, "# tool_version={}", self.version);
        let _ = writeln!(out, "# config_sha256={}", self.config_sha256);
    }
}

/// `key=value` lines; `#` comments and blank lines are skipped.
pub fn parse_key_values(text: &str, what: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(what, i + 1, "expected `key=value`"))?;
        let k = k.trim();
        if kv.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::parse(what, i + 1, format!("duplicate key `{k}`")));
        }
    }
    Ok(kv)
}

pub(crate) fn join<T: std::fmt::Display>(items: &[T], sep: &str) -> String {
    let mut out = String::new();
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        let _ = write!(out, "{x}");
    }
    out
}
