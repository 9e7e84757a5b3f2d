//! Run reports and their JSON/CSV rendering.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Bumped whenever a field or CSV column changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub versions: BTreeMap<String, String>,
    pub metrics: Vec<Metric>,
    pub checks: Vec<Check>,
    /// Plot-ready rows; this is what `--format csv` writes.
    pub rows: Vec<Value>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert(
            env!("CARGO_PKG_NAME").to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            versions,
            metrics: Vec::new(),
            checks: Vec::new(),
            rows: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) -> &mut Metric {
        self.metrics.push(Metric {
            name: name.to_string(),
            value,
            stderr: None,
            expected: None,
        });
        self.metrics.last_mut().expect("just pushed")
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn rows<T: Serialize>(&mut self, rows: impl IntoIterator<Item = T>) {
        self.rows.extend(
            rows.into_iter()
                .map(|r| serde_json::to_value(r).unwrap_or(Value::Null)),
        );
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Writes `rows` as CSV. The header is the union of keys in first-seen
    /// order; nested values are written as JSON.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
        let mut header: Vec<String> = Vec::new();
        for r in &self.rows {
            if let Value::Object(m) = r {
                for k in m.keys() {
                    if !header.contains(k) {
                        header.push(k.clone());
                    }
                }
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&header).map_err(io)?;
        for r in &self.rows {
            let rec: Vec<String> = header
                .iter()
                .map(|k| match r.get(k) {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                })
                .collect();
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}
