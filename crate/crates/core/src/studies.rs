//! Multi-engine experiments: stochastic paths against the fluid orbit,
//! the simulator against the master equation, and long master-equation runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::des::{self, InitSpec, SimConfig};
use crate::error::{Error, Result};
use crate::metrics::{
    exp_moment_lattice, krov_lattice_to_delta, moment_bound_check, oscillation_report,
    MomentBoundReport, OscillationReport,
};
use crate::model::{CycleTrajectory, NetworkParams, TriangleState};
use crate::nlmp::{integrate_with, MarginalLattice, NlmpConfig};

/// Median of a non-empty sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        (v[k - 1] + v[k]) / 2.0
    }
}

fn start_counts(n: u32) -> [u32; 5] {
    [0, n, 0, 0, 0]
}

/// Sup over the snapshot grid of the L1 distance from a single triangle's
/// rescaled path to the orbit (as a set).
pub fn euler_sup_distance(n: u32, tau_end: f64, seed: u64, params: &NetworkParams) -> Result<f64> {
    let cycle = CycleTrajectory::new(params)?;
    let cfg = SimConfig::new(1, n, tau_end * n as f64, seed, InitSpec::Counts(vec![start_counts(n)]));
    let traj = des::run(&cfg, params)?;
    let mut sup: f64 = 0.0;
    for (_, x) in des::euler_rescale(&traj, n)? {
        sup = sup.max(cycle.distance(&x).0);
    }
    Ok(sup)
}

/// [`euler_sup_distance`] for seeds `seed ^ i`, in replica order.
pub fn euler_convergence(
    n: u32,
    tau_end: f64,
    replicas: usize,
    seed: u64,
    params: &NetworkParams,
) -> Result<Vec<f64>> {
    (0..replicas)
        .into_par_iter()
        .map(|i| euler_sup_distance(n, tau_end, seed ^ i as u64, params))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementConfig {
    pub n: u32,
    pub x_max: usize,
    pub m: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Horizon in fluid time.
    pub tau_end: f64,
    /// Comparison grid spacing in fluid time.
    pub dtau: f64,
    /// Master-equation step in unscaled time.
    pub h: f64,
}

impl Default for AgreementConfig {
    fn default() -> Self {
        Self { n: 5, x_max: 25, m: 500, replicas: 20, seed: 1, tau_end: 2.0, dtau: 0.01, h: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Per-replica sup L1 distance between scaled mean vectors.
    pub sup_distances: Vec<f64>,
    pub median: f64,
}

/// Runs the master equation once and `replicas` simulations of `m`
/// triangles from the same start, comparing mean vectors on a common grid.
pub fn nlmp_des_agreement(cfg: &AgreementConfig, params: &NetworkParams) -> Result<AgreementReport> {
    if cfg.replicas == 0 {
        return Err(Error::invalid("replicas must be at least 1"));
    }
    let nf = cfg.n as f64;
    let t_end = cfg.tau_end * nf;
    let dt = cfg.dtau * nf;
    let mu0 = MarginalLattice::product_delta(cfg.x_max, cfg.n, start_counts(cfg.n))?;
    let mut ncfg = NlmpConfig::new(t_end, cfg.h);
    ncfg.record_dt = Some(dt);
    let nl = integrate_with(&mu0, params, &ncfg, |_, _| {})?;

    let mut scfg = SimConfig::new(cfg.m, cfg.n, t_end, cfg.seed, InitSpec::Counts(vec![start_counts(cfg.n); cfg.m]));
    scfg.dt_out = Some(dt);
    let runs = des::run_replicas(&scfg, params, cfg.replicas);
    let mut sups = Vec::with_capacity(runs.len());
    for run in runs {
        let run = run?;
        let mut sup: f64 = 0.0;
        for (t, m) in run.times.iter().zip(&run.means) {
            let k = (t / dt).round() as usize;
            let Some(s) = nl.samples.get(k) else { break };
            let d: f64 = (0..5).map(|c| (m[c] / nf - s.scaled_means[c]).abs()).sum();
            sup = sup.max(d);
        }
        sups.push(sup);
    }
    Ok(AgreementReport { median: median(&sups), sup_distances: sups })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistenceConfig {
    pub n: u32,
    pub x_max: usize,
    pub tau_end: f64,
    pub dtau: f64,
    pub h: f64,
    pub alpha: f64,
    pub boundary_threshold: f64,
}

impl Default for PersistenceConfig {
    fn default() -> Self {
        Self {
            n: 50,
            x_max: 200,
            tau_end: 10.0,
            dtau: 0.01,
            h: 0.02,
            alpha: 0.05,
            boundary_threshold: crate::nlmp::BOUNDARY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub oscillation: OscillationReport,
    /// Transport distance to the orbit point nearest to the mean, `[τ, d]`.
    pub krov_series: Vec<(f64, f64)>,
    pub max_krov: f64,
    /// `[τ, E exp(α L)]`.
    pub exp_moment_series: Vec<(f64, f64)>,
    /// Later moments against twice the running maximum over the first period.
    pub moment_check: MomentBoundReport,
    /// Mean path in fluid time.
    pub mean_path: Vec<(f64, TriangleState)>,
}

/// Long master-equation run from `(0, N, 0, 0, 0)` with oscillation,
/// distance and moment diagnostics in fluid time.
pub fn oscillation_persistence(cfg: &PersistenceConfig, params: &NetworkParams) -> Result<PersistenceReport> {
    let cycle = CycleTrajectory::new(params)?;
    let nf = cfg.n as f64;
    let mu0 = MarginalLattice::product_delta(cfg.x_max, cfg.n, start_counts(cfg.n))?;
    let mut ncfg = NlmpConfig::new(cfg.tau_end * nf, cfg.h);
    ncfg.record_dt = Some(cfg.dtau * nf);
    ncfg.boundary_threshold = cfg.boundary_threshold;
    let mut mean_path = Vec::new();
    let mut krov_series = Vec::new();
    let mut exp_moment_series = Vec::new();
    integrate_with(&mu0, params, &ncfg, |t, mu| {
        let tau = t / nf;
        let mean = TriangleState::from_array(mu.scaled_means());
        let (_, phase) = cycle.distance(&mean);
        let target = cycle.point(phase).expect("phase lies in the period");
        krov_series.push((tau, krov_lattice_to_delta(mu, &target)));
        exp_moment_series.push((tau, exp_moment_lattice(mu, cfg.alpha, params)));
        mean_path.push((tau, mean));
    })?;
    let oscillation = oscillation_report(&mean_path);
    let max_krov = krov_series.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let first = cycle.period();
    let reference = exp_moment_series
        .iter()
        .filter(|(t, _)| *t <= first)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let moment_check = moment_bound_check(&exp_moment_series, 2.0 * reference, first);
    Ok(PersistenceReport {
        oscillation,
        krov_series,
        max_krov,
        exp_moment_series,
        moment_check,
        mean_path,
    })
}
