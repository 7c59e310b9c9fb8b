//! Parameter sweeps: one experiment per axis value, run in parallel, then
//! merged into a long table and a table of medians.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use resonet_core::format::fmt_sig;
use resonet_core::studies::median;
use serde::Serialize;
use serde_json::Value;

use crate::config::{self, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::{self, Outcome, Table};
use crate::scenarios::run_scenario;

/// Fields that may be swept.
pub const AXES: &[&str] = &[
    "m",
    "n",
    "t_end",
    "dt",
    "sample_dt",
    "seed",
    "replicas",
    "x_max",
    "alpha",
    "eps",
    "t_settle",
    "t_split",
    "branch",
    "network.gamma_o",
    "network.gamma_a",
    "network.gamma_b",
    "network.gamma_ab",
    "network.gamma_ba",
    "network.k_threshold",
];

/// Splits a comma-separated list; items parse as JSON, bare words as strings.
pub fn parse_values(list: &str) -> Result<Vec<Value>> {
    let items: Vec<Value> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string())))
        .collect();
    if items.is_empty() {
        return Err(CliError::config("--values", "the value list is empty"));
    }
    Ok(items)
}

fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), fmt_sig),
        other => other.to_string(),
    }
}

fn set_path(doc: &mut Value, path: &str, v: Value) {
    let mut cur = doc;
    let mut parts = path.split('.').peekable();
    while let Some(p) = parts.next() {
        let obj = cur.as_object_mut().expect("sweep base is an object");
        if parts.peek().is_none() {
            obj.insert(p.to_string(), v);
            return;
        }
        cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
}

/// Seed for cell `k`: the high half of the word carries the cell index so
/// replica seeds `seed ^ i` of different cells never collide.
pub fn cell_seed(base: u64, k: usize) -> u64 {
    base ^ ((k as u64) << 32)
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub value: Value,
    pub seed: u64,
    pub dir: PathBuf,
    pub status: String,
    pub pass: Option<bool>,
    pub error: Option<String>,
}

pub struct SweepResult {
    pub long: Table,
    pub medians: Table,
    pub cells: Vec<CellSummary>,
}

fn cell_config(base: &Value, axis: &str, value: &Value, seed: u64) -> Result<ExperimentConfig> {
    let mut doc = base.clone();
    set_path(&mut doc, axis, value.clone());
    if axis != "seed" {
        set_path(&mut doc, "seed", Value::from(seed));
    }
    let cfg = config::parse_value(doc)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs every cell; failures are recorded per cell. `base` is the raw
/// configuration document with command-line overrides applied.
pub fn run_sweep(base: &Value, axis: &str, values: &[Value], out_dir: &Path) -> Result<SweepResult> {
    if !AXES.contains(&axis) {
        return Err(CliError::config("--axis", format!("{axis:?} is not a sweepable field; expected one of {}", AXES.join(", "))));
    }
    if values.is_empty() {
        return Err(CliError::config("--values", "the value list is empty"));
    }
    let probe = config::parse_value(base.clone())?;
    let scenario = probe.scenario()?;
    let base_seed = probe.seed.unwrap_or(0);
    let format = probe.output.format;
    output::create_dir(out_dir)?;

    let results: Vec<(CellSummary, Option<Outcome>)> = values
        .par_iter()
        .enumerate()
        .map(|(k, v)| {
            let seed = if axis == "seed" { v.as_u64().unwrap_or(base_seed) } else { cell_seed(base_seed, k) };
            let dir = out_dir.join(format!("cell_{k:03}"));
            let run = cell_config(base, axis, v, seed).and_then(|cfg| {
                let outcome = run_scenario(&cfg)?;
                output::write_outcome(&dir, scenario.name(), seed, &outcome, format, false)?;
                Ok(outcome)
            });
            match run {
                Ok(o) => (
                    CellSummary { value: v.clone(), seed, dir, status: "ok".into(), pass: Some(o.pass()), error: None },
                    Some(o),
                ),
                Err(e) => (
                    CellSummary {
                        value: v.clone(),
                        seed,
                        dir,
                        status: "failed".into(),
                        pass: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let names: Vec<String> = results
        .iter()
        .find_map(|(_, o)| o.as_ref().map(|o| o.metric_names.clone()))
        .unwrap_or_default();
    let mut long_rows = Vec::new();
    let mut median_rows = Vec::new();
    for (cell, outcome) in &results {
        let label = value_label(&cell.value);
        match outcome {
            Some(o) => {
                for (i, row) in o.metric_rows.iter().enumerate() {
                    let mut r = vec![label.clone(), i.to_string(), cell.status.clone()];
                    r.extend(row.iter().map(|v| fmt_sig(*v)));
                    long_rows.push(r);
                }
                let mut r = vec![label, cell.status.clone(), o.metric_rows.len().to_string()];
                for j in 0..names.len() {
                    let col: Vec<f64> = o.metric_rows.iter().filter_map(|row| row.get(j).copied()).collect();
                    r.push(if col.is_empty() { "nan".into() } else { fmt_sig(median(&col)) });
                }
                median_rows.push(r);
            }
            None => {
                let mut r = vec![label.clone(), String::new(), cell.status.clone()];
                r.extend(names.iter().map(|_| "nan".to_string()));
                long_rows.push(r);
                let mut r = vec![label, cell.status.clone(), "0".into()];
                r.extend(names.iter().map(|_| "nan".to_string()));
                median_rows.push(r);
            }
        }
    }
    let column = axis.replace('.', "_");
    let metric_cols = names.join(",");
    let sep = if names.is_empty() { "" } else { "," };
    let long = Table::from_rows("sweep", &format!("{column},replica,status{sep}{metric_cols}"), &long_rows);
    let medians = Table::from_rows("medians", &format!("{column},status,replicas{sep}{metric_cols}"), &median_rows);
    Ok(SweepResult { long, medians, cells: results.into_iter().map(|(c, _)| c).collect() })
}

pub fn write_sweep(out_dir: &Path, scenario: &str, axis: &str, r: &SweepResult) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in [&r.long, &r.medians] {
        let p = out_dir.join(format!("{}.csv", t.name));
        output::write_file(&p, t.text.as_bytes())?;
        written.push(p);
    }
    let report = serde_json::json!({
        "scenario": scenario,
        "axis": axis,
        "cells": r.cells,
    });
    let p = out_dir.join("sweep_report.json");
    output::write_file(&p, format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")).as_bytes())?;
    written.push(p);
    Ok(written)
}
