//! Scenario outcomes and the files written for them.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::OutputFormat;
use crate::error::{CliError, Result};
use crate::plot::line_plot;

/// A CSV document held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub text: String,
}

impl Table {
    pub fn from_writer<F>(name: &str, write: F) -> Result<Self>
    where
        F: FnOnce(&mut Vec<u8>) -> resonet_core::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf)?;
        Ok(Self { name: name.into(), text: String::from_utf8(buf).expect("CSV writers emit UTF-8") })
    }

    pub fn from_rows(name: &str, header: &str, rows: &[Vec<String>]) -> Self {
        let mut text = String::with_capacity(64 * (rows.len() + 1));
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        Self { name: name.into(), text }
    }

    pub fn header(&self) -> &str {
        self.text.lines().next().unwrap_or("")
    }

    /// Rows as objects keyed by the header, numbers parsed where possible.
    pub fn to_json(&self) -> Value {
        let mut lines = self.text.lines();
        let keys: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let rows = lines
            .map(|l| {
                let obj: Map<String, Value> = keys
                    .iter()
                    .zip(l.split(','))
                    .map(|(k, v)| {
                        let val = v
                            .parse::<f64>()
                            .ok()
                            .and_then(serde_json::Number::from_f64)
                            .map_or_else(|| Value::String(v.to_string()), Value::Number);
                        (k.to_string(), val)
                    })
                    .collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), x_label: x_label.into(), y_label: y_label.into(), points }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value >= threshold }
    }
}

/// Everything a scenario produces.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub summary: Map<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub series: Vec<Series>,
    /// Opaque files written as is, `(file name, bytes)`.
    pub binaries: Vec<(String, Vec<u8>)>,
    /// Per-replica metrics, used by sweeps.
    pub metric_names: Vec<String>,
    pub metric_rows: Vec<Vec<f64>>,
}

impl Outcome {
    pub fn with_checks(checks: Vec<Check>) -> Self {
        Self { checks, ..Self::default() }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn put<T: Serialize>(&mut self, key: &str, v: T) {
        self.summary
            .insert(key.into(), serde_json::to_value(v).expect("summary values serialize"));
    }

    pub fn metrics(&mut self, names: &[&str], rows: Vec<Vec<f64>>) {
        self.metric_names = names.iter().map(|s| s.to_string()).collect();
        self.metric_rows = rows;
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes the tables, `report.json` and, if asked, one SVG per series.
/// Returns the written paths in order.
pub fn write_outcome(
    dir: &Path,
    scenario: &str,
    seed: u64,
    outcome: &Outcome,
    format: OutputFormat,
    plot: bool,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    for t in &outcome.tables {
        let path = match format {
            OutputFormat::Csv => {
                let p = dir.join(format!("{}.csv", t.name));
                write_file(&p, t.text.as_bytes())?;
                p
            }
            OutputFormat::Json => {
                let p = dir.join(format!("{}.json", t.name));
                let text = serde_json::to_string_pretty(&t.to_json()).expect("table serializes");
                write_file(&p, format!("{text}\n").as_bytes())?;
                p
            }
        };
        written.push(path);
    }
    for (name, bytes) in &outcome.binaries {
        let p = dir.join(name);
        write_file(&p, bytes)?;
        written.push(p);
    }
    if plot {
        for s in &outcome.series {
            let p = dir.join(format!("{}.svg", s.name));
            write_file(&p, line_plot(&s.name, &s.x_label, &s.y_label, &s.points).as_bytes())?;
            written.push(p);
        }
    }
    let report = report_json(scenario, seed, outcome);
    let p = dir.join("report.json");
    write_file(&p, format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")).as_bytes())?;
    written.push(p);
    Ok(written)
}

pub fn report_json(scenario: &str, seed: u64, outcome: &Outcome) -> Value {
    let mut m = Map::new();
    m.insert("scenario".into(), Value::String(scenario.into()));
    m.insert("seed".into(), Value::from(seed));
    m.insert("pass".into(), Value::Bool(outcome.pass()));
    m.insert("checks".into(), serde_json::to_value(&outcome.checks).expect("checks serialize"));
    m.insert("summary".into(), Value::Object(outcome.summary.clone()));
    Value::Object(m)
}
