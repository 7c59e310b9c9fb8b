//! Experiments on the closed fluid system: underload of the cyclic regime,
//! attraction to the orbit, Lyapunov decrease and synchronization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluid::closed::{
    run_closed, run_closed_with, run_open, BranchPolicy, ClosedRunConfig, FlowRates,
};
use crate::fluid::ensemble::ParticleEnsemble;
use crate::model::{lyapunov_l, CycleTrajectory, NetworkParams, TriangleState};

/// Time-averaged service loads over one period of the orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Underload {
    pub rho_o: f64,
    pub rho_abar: f64,
    pub rho_bbar: f64,
}

/// Integrates the service rates of the closed run started on the orbit over
/// one period at step `h`.
pub fn underload_integrals(
    cycle: &CycleTrajectory,
    params: &NetworkParams,
    h: f64,
) -> Result<Underload> {
    let x0 = cycle.point(0.0)?;
    let tr = run_closed(
        &ParticleEnsemble::delta(x0)?,
        params,
        cycle.period(),
        h,
        BranchPolicy::Symmetric,
    )?;
    let mut int = [0.0; 5];
    let n = tr.records.len() - 1;
    for r in &tr.records[..n] {
        for (acc, z) in int.iter_mut().zip(r.outflow_rates) {
            *acc += z * h;
        }
    }
    let span = n as f64 * h;
    let [o, a, ba, b, ab] = int;
    Ok(Underload {
        rho_o: o / params.gamma_o / span,
        rho_abar: (a / params.gamma_a + ba / params.gamma_ba) / span,
        rho_bbar: (b / params.gamma_b + ab / params.gamma_ab) / span,
    })
}

/// Node loads of constant flows: `(λ_o/γ_o, λ_a/γ_a + λ_ba/γ_ba, λ_b/γ_b + λ_ab/γ_ab)`.
pub fn node_loads(service: &[f64; 5], params: &NetworkParams) -> (f64, f64, f64) {
    let [o, a, ba, b, ab] = *service;
    (
        o / params.gamma_o,
        a / params.gamma_a + ba / params.gamma_ba,
        b / params.gamma_b + ab / params.gamma_ab,
    )
}

/// Rejects states farther than `eps` from the orbit.
pub fn check_near_cycle(cycle: &CycleTrajectory, x: &TriangleState, eps: f64) -> Result<()> {
    let (d, _) = cycle.distance(x);
    if d > eps.max(1e-12) {
        return Err(Error::invalid(format!(
            "state is at distance {d} from the cycle, more than eps = {eps}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorConfig {
    pub eps: f64,
    pub n_samples: usize,
    pub policy: BranchPolicy,
    pub seed: u64,
    pub h: f64,
    /// Distances are tracked from this time on.
    pub t_settle: f64,
    pub t_end: f64,
}

impl Default for AttractorConfig {
    fn default() -> Self {
        Self {
            eps: 0.01,
            n_samples: 20,
            policy: BranchPolicy::Symmetric,
            seed: 0,
            h: 1e-3,
            t_settle: 5.0,
            t_end: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorSample {
    pub phase: f64,
    pub initial: TriangleState,
    pub initial_dist: f64,
    /// Largest distance to the orbit over `[t_settle, t_end]`.
    pub max_dist_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorReport {
    pub samples: Vec<AttractorSample>,
    pub max_dist_after: f64,
}

/// Draws a mass-1 state within L1 distance `eps` of a random orbit point.
pub fn perturbed_cycle_point<R: Rng>(
    cycle: &CycleTrajectory,
    eps: f64,
    rng: &mut R,
) -> (f64, TriangleState) {
    let phase = rng.random::<f64>() * cycle.period();
    let c = cycle.point(phase).expect("finite phase");
    let mut q = [0.0; 5];
    for v in q.iter_mut() {
        *v = -(1.0 - rng.random::<f64>()).ln();
    }
    let sum: f64 = q.iter().sum();
    // |(1-s)c + s q - c| = s |q - c| <= 2s
    let s = 0.5 * eps * rng.random::<f64>();
    let mut x = c.to_array();
    for (xi, qi) in x.iter_mut().zip(q) {
        *xi = (1.0 - s) * *xi + s * qi / sum;
    }
    (phase, TriangleState::from_array(x))
}

pub fn attractor_experiment(
    params: &NetworkParams,
    cfg: &AttractorConfig,
) -> Result<AttractorReport> {
    if !(0.0..=0.05).contains(&cfg.eps) {
        return Err(Error::invalid(format!("eps must lie in [0, 0.05], got {}", cfg.eps)));
    }
    if cfg.n_samples == 0 {
        return Err(Error::invalid("at least one sample is required"));
    }
    let cycle = CycleTrajectory::new(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<_> = (0..cfg.n_samples)
        .map(|_| perturbed_cycle_point(&cycle, cfg.eps, &mut rng))
        .collect();
    let samples = starts
        .into_par_iter()
        .map(|(phase, x0)| {
            check_near_cycle(&cycle, &x0, cfg.eps)?;
            let run = ClosedRunConfig::new(cfg.t_end, cfg.h, cfg.policy);
            let tr = run_closed_with(&ParticleEnsemble::delta(x0)?, params, &run)?;
            let max_dist_after = tr
                .records
                .iter()
                .filter(|r| r.t >= cfg.t_settle - 1e-12)
                .map(|r| r.diagnostics.dist_to_cycle)
                .fold(0.0, f64::max);
            Ok(AttractorSample {
                phase,
                initial: x0,
                initial_dist: cycle.distance(&x0).0,
                max_dist_after,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_dist_after = samples.iter().map(|s| s.max_dist_after).fold(0.0, f64::max);
    Ok(AttractorReport {
        samples,
        max_dist_after,
    })
}

/// Inflow rates along one period of the orbit, one entry per step.
pub fn cyclic_inflow(params: &NetworkParams, h: f64) -> Result<Vec<FlowRates>> {
    let cycle = CycleTrajectory::new(params)?;
    let tr = run_closed(
        &ParticleEnsemble::delta(cycle.point(0.0)?)?,
        params,
        cycle.period(),
        h,
        BranchPolicy::Symmetric,
    )?;
    let n = tr.records.len() - 1;
    Ok(tr.records[..n].iter().map(|r| r.rates).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovDecay {
    pub l_before: f64,
    pub l_after: f64,
    pub decrease: f64,
}

/// Drives `δ_{x0}` for one period with the orbit's inflow rates and compares
/// the Lyapunov functional before and after.
pub fn lyapunov_decay_check(
    x0: &TriangleState,
    params: &NetworkParams,
    h: f64,
) -> Result<LyapunovDecay> {
    let l_before = lyapunov_l(x0, params);
    if l_before <= params.k_threshold {
        return Err(Error::invalid(format!(
            "initial state must lie outside the compact set (L = {l_before})"
        )));
    }
    let inflow = cyclic_inflow(params, h)?;
    lyapunov_decay_with(x0, params, h, &inflow)
}

/// As [`lyapunov_decay_check`] with precomputed cyclic inflows.
pub fn lyapunov_decay_with(
    x0: &TriangleState,
    params: &NetworkParams,
    h: f64,
    inflow: &[FlowRates],
) -> Result<LyapunovDecay> {
    let l_before = lyapunov_l(x0, params);
    if l_before <= params.k_threshold {
        return Err(Error::invalid(format!(
            "initial state must lie outside the compact set (L = {l_before})"
        )));
    }
    let path = run_open(
        &ParticleEnsemble::delta(*x0)?,
        params,
        h,
        inflow.len(),
        |k| inflow[k],
    )?;
    let end = path.last().expect("non-empty path").atoms()[0].state;
    let l_after = lyapunov_l(&end, params);
    Ok(LyapunovDecay {
        l_before,
        l_after,
        decrease: l_before - l_after,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    pub k_cutoff: f64,
    pub t_end: f64,
    pub h: f64,
    /// Closeness required between the initial ensemble and some orbit point.
    pub eps: f64,
    pub policy: BranchPolicy,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            k_cutoff: 10.0,
            t_end: 5.0,
            h: 1e-3,
            eps: 0.05,
            policy: BranchPolicy::Symmetric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncReport {
    pub t_sync: Option<f64>,
    /// Diameter of the tracked atoms at the end of the run (or at `t_sync`).
    pub residual: f64,
}

/// Transport distance from `ens` to the closest point mass on the orbit,
/// with the minimizing phase.
pub fn distance_to_cycle_measure(cycle: &CycleTrajectory, ens: &ParticleEnsemble) -> (f64, f64) {
    cycle.minimize_convex(|c| ens.expect(|x| x.l1(c)))
}

pub fn synchronization_check(
    ens0: &ParticleEnsemble,
    params: &NetworkParams,
    cfg: &SyncConfig,
) -> Result<SyncReport> {
    let cycle = CycleTrajectory::new(params)?;
    let (d, _) = distance_to_cycle_measure(&cycle, ens0);
    if d >= cfg.eps {
        return Err(Error::invalid(format!(
            "initial ensemble is at distance {d} from the cycle, not below eps = {}",
            cfg.eps
        )));
    }
    let tr = run_closed(ens0, params, cfg.t_end, cfg.h, cfg.policy)?;
    let mut residual = f64::NAN;
    for r in &tr.records {
        let tracked: Vec<_> = r
            .ensemble
            .atoms()
            .iter()
            .filter(|a| a.state.to_array().iter().all(|v| *v < cfg.k_cutoff))
            .collect();
        let mut diam: f64 = 0.0;
        for (i, a) in tracked.iter().enumerate() {
            for b in &tracked[i + 1..] {
                diam = diam.max(a.state.l1(&b.state));
            }
        }
        residual = diam;
        if diam <= 1e-6 {
            return Ok(SyncReport {
                t_sync: Some(r.t),
                residual,
            });
        }
    }
    Ok(SyncReport {
        t_sync: None,
        residual,
    })
}
