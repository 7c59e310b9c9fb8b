//! Experiment runner for the resonet toolkit: JSON-configured scenarios,
//! parameter sweeps, CSV/JSON artifacts and SVG line plots.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod scenarios;
pub mod sweep;

use std::path::{Path, PathBuf};

use serde_json::Value;

pub use config::{ExperimentConfig, Scenario};
pub use error::{CliError, Result};
pub use output::Outcome;

/// Applies `RESONET_THREADS` to the global thread pool.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("RESONET_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::config("RESONET_THREADS", format!("expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config("RESONET_THREADS", e.to_string()))
}

/// Command-line overrides of file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub plot: bool,
}

/// Merges overrides into the raw document, so sweeps see them too.
pub fn apply_overrides(doc: &mut Value, o: &Overrides) -> Result<()> {
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| CliError::config("<root>", "the configuration must be a JSON object"))?;
    if let Some(s) = o.scenario {
        obj.insert("scenario".into(), Value::String(s.name().into()));
    }
    if let Some(seed) = o.seed {
        obj.insert("seed".into(), Value::from(seed));
    }
    if o.out.is_some() || o.plot {
        let out = obj.entry("output").or_insert_with(|| Value::Object(Default::default()));
        let out = out
            .as_object_mut()
            .ok_or_else(|| CliError::config("output", "must be an object"))?;
        if let Some(dir) = &o.out {
            out.insert("dir".into(), Value::String(dir.to_string_lossy().into_owned()));
        }
        if o.plot {
            out.insert("plot".into(), Value::Bool(true));
        }
    }
    Ok(())
}

pub fn read_document(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config("<root>", e.to_string()))
}

/// Runs one scenario and writes its artifacts. Failed acceptance checks
/// surface as [`CliError::ChecksFailed`] after everything is written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Outcome, Vec<PathBuf>)> {
    let scenario = cfg.scenario()?;
    let outcome = scenarios::run_scenario(cfg)?;
    let written = output::write_outcome(
        &cfg.output.dir,
        scenario.name(),
        cfg.seed.unwrap_or(0),
        &outcome,
        cfg.output.format,
        cfg.output.plot,
    )?;
    Ok((outcome, written))
}

pub fn failed_checks(outcome: &Outcome) -> Option<CliError> {
    let failed: Vec<String> = outcome
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} = {} (threshold {})", c.name, c.value, c.threshold))
        .collect();
    (!failed.is_empty()).then(|| CliError::ChecksFailed(format!("checks failed: {}", failed.join("; "))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_win() {
        let mut doc = serde_json::json!({"scenario": "sync", "seed": 3, "output": {"dir": "a"}});
        let o = Overrides {
            scenario: Some(Scenario::Attractor),
            seed: Some(9),
            out: Some(PathBuf::from("b")),
            plot: true,
        };
        apply_overrides(&mut doc, &o).unwrap();
        let cfg = config::parse_value(doc).unwrap();
        assert_eq!(cfg.scenario, Some(Scenario::Attractor));
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.output.dir, PathBuf::from("b"));
        assert!(cfg.output.plot);
    }
}
