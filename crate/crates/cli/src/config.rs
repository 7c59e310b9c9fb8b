//! Experiment configuration: a single JSON document, validated before any run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use resonet_core::fluid::BranchPolicy;
use resonet_core::{NetworkParams, TriangleState};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    CycleCheck,
    FixedPoint,
    Attractor,
    BranchSplit,
    Lyapunov,
    Sync,
    DesRun,
    NlmpRun,
    MeasureRun,
    EulerConvergence,
    Oscillation,
    MomentBound,
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::CycleCheck,
        Scenario::FixedPoint,
        Scenario::Attractor,
        Scenario::BranchSplit,
        Scenario::Lyapunov,
        Scenario::Sync,
        Scenario::DesRun,
        Scenario::NlmpRun,
        Scenario::MeasureRun,
        Scenario::EulerConvergence,
        Scenario::Oscillation,
        Scenario::MomentBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CycleCheck => "cycle-check",
            Scenario::FixedPoint => "fixed-point",
            Scenario::Attractor => "attractor",
            Scenario::BranchSplit => "branch-split",
            Scenario::Lyapunov => "lyapunov",
            Scenario::Sync => "sync",
            Scenario::DesRun => "des-run",
            Scenario::NlmpRun => "nlmp-run",
            Scenario::MeasureRun => "measure-run",
            Scenario::EulerConvergence => "euler-convergence",
            Scenario::Oscillation => "oscillation",
            Scenario::MomentBound => "moment-bound",
        }
    }

    /// Top-level keys that must be present in the file.
    pub fn required(self) -> &'static [&'static str] {
        match self {
            Scenario::DesRun => &["m", "n", "t_end"],
            Scenario::NlmpRun => &["n", "t_end"],
            Scenario::EulerConvergence => &["n"],
            _ => &[],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

/// Service rates and compact-set radius; absent fields take the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub gamma_o: Option<f64>,
    pub gamma_a: Option<f64>,
    pub gamma_b: Option<f64>,
    pub gamma_ab: Option<f64>,
    pub gamma_ba: Option<f64>,
    pub k_threshold: Option<f64>,
}

impl NetworkSection {
    pub fn params(&self) -> Result<NetworkParams> {
        let d = NetworkParams::default();
        let fields = [
            ("gamma_o", self.gamma_o, d.gamma_o),
            ("gamma_a", self.gamma_a, d.gamma_a),
            ("gamma_b", self.gamma_b, d.gamma_b),
            ("gamma_ab", self.gamma_ab, d.gamma_ab),
            ("gamma_ba", self.gamma_ba, d.gamma_ba),
            ("k_threshold", self.k_threshold, d.k_threshold),
        ];
        let mut v = [0.0; 6];
        for (slot, (name, given, default)) in v.iter_mut().zip(fields) {
            let x = given.unwrap_or(default);
            if !(x.is_finite() && x > 0.0) {
                return Err(CliError::config(
                    format!("network.{name}"),
                    format!("must be finite and positive, got {x}"),
                ));
            }
            *slot = x;
        }
        Ok(NetworkParams::new(v[0], v[1], v[2], v[3], v[4], v[5])?)
    }
}

/// Initial condition. `counts` with a single row is broadcast to all triangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Delta { state: [f64; 5] },
    CyclePhase { phase: f64 },
    Counts { counts: Vec<[u32; 5]> },
    Atoms { atoms: Vec<(f64, [f64; 5])> },
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::config("init", msg));
        match self {
            InitConfig::Delta { state } => {
                if let Err(e) = TriangleState::from_array(*state).validate() {
                    return bad(e.to_string());
                }
            }
            InitConfig::CyclePhase { phase } => {
                if !phase.is_finite() {
                    return bad(format!("phase must be finite, got {phase}"));
                }
            }
            InitConfig::Counts { counts } => {
                if counts.is_empty() {
                    return bad("counts must hold at least one row".into());
                }
            }
            InitConfig::Atoms { atoms } => {
                if atoms.is_empty() {
                    return bad("atoms must hold at least one entry".into());
                }
                for (w, x) in atoms {
                    if !(w.is_finite() && *w > 0.0) {
                        return bad(format!("atom weight must be positive, got {w}"));
                    }
                    if let Err(e) = TriangleState::from_array(*x).validate() {
                        return bad(e.to_string());
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub plot: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), format: OutputFormat::Csv, plot: false }
    }
}

/// Acceptance thresholds checked by the scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub waypoint_tol: f64,
    pub period: f64,
    pub period_tol: f64,
    pub fixed_point_tol: f64,
    pub attractor_tol: f64,
    pub split_min: f64,
    pub symmetric_tol: f64,
    pub min_decrease: f64,
    pub sync_tol: f64,
    pub max_median: f64,
    pub min_alternations: usize,
    pub max_drift: f64,
    pub max_krov: f64,
    pub moment_factor: f64,
    pub boundary_mass: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            waypoint_tol: 1e-3,
            period: 2.0,
            period_tol: 1e-2,
            fixed_point_tol: 1e-6,
            attractor_tol: 1e-3,
            split_min: 0.1,
            symmetric_tol: 1e-3,
            min_decrease: 0.05,
            sync_tol: 1e-6,
            max_median: 0.05,
            min_alternations: 5,
            max_drift: 0.1,
            max_krov: 0.15,
            moment_factor: 2.0,
            boundary_mass: resonet_core::nlmp::BOUNDARY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub network: NetworkSection,
    pub m: Option<usize>,
    pub n: Option<u32>,
    pub t_end: Option<f64>,
    /// Integration step of the deterministic engines; snapshot spacing of
    /// the simulator.
    pub dt: Option<f64>,
    /// Output spacing of the master-equation and fluid trajectories.
    pub sample_dt: Option<f64>,
    pub branch: Option<BranchPolicy>,
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub x_max: Option<usize>,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub t_settle: Option<f64>,
    pub t_split: Option<f64>,
    pub l_range: Option<[f64; 2]>,
    pub compare_nlmp: Option<bool>,
    pub init: Option<InitConfig>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parses a JSON document, reporting the dotted key path of the first error.
pub fn parse_value(value: serde_json::Value) -> Result<ExperimentConfig> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<root>".to_string() } else { path };
        CliError::config(key, e.into_inner().to_string())
    })
}

pub fn parse_str(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::config("<root>", e.to_string()))?;
    parse_value(value)
}

pub fn load(path: &Path) -> Result<(ExperimentConfig, serde_json::Value)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config("<root>", e.to_string()))?;
    Ok((parse_value(value.clone())?, value))
}

fn positive(key: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => {
            Err(CliError::config(key, format!("must be finite and positive, got {x}")))
        }
        _ => Ok(()),
    }
}

fn at_least_one(key: &str, v: Option<usize>) -> Result<()> {
    match v {
        Some(0) => Err(CliError::config(key, "must be at least 1")),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario.ok_or_else(|| CliError::config("scenario", "no scenario given"))
    }

    pub fn params(&self) -> Result<NetworkParams> {
        self.network.params()
    }

    /// Field checks shared by every scenario plus the scenario's required keys.
    pub fn validate(&self) -> Result<()> {
        let scenario = self.scenario()?;
        self.params()?;
        for key in scenario.required() {
            let present = match *key {
                "m" => self.m.is_some(),
                "n" => self.n.is_some(),
                "t_end" => self.t_end.is_some(),
                _ => true,
            };
            if !present {
                return Err(CliError::config(*key, format!("required by scenario {scenario}")));
            }
        }
        at_least_one("m", self.m)?;
        at_least_one("n", self.n.map(|n| n as usize))?;
        at_least_one("replicas", self.replicas)?;
        at_least_one("x_max", self.x_max)?;
        positive("t_end", self.t_end)?;
        positive("dt", self.dt)?;
        positive("sample_dt", self.sample_dt)?;
        positive("alpha", self.alpha)?;
        positive("eps", self.eps)?;
        positive("t_split", self.t_split)?;
        if let Some(t) = self.t_settle {
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::config("t_settle", format!("must be non-negative, got {t}")));
            }
        }
        if let Some([lo, hi]) = self.l_range {
            if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
                return Err(CliError::config("l_range", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
            }
        }
        if let Some(init) = &self.init {
            init.validate()?;
        }
        Ok(())
    }
}
