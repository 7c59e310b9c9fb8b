//! Explicit time stepping of the marginal master equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkParams;

use super::lattice::{rates, rhs_with_rates, Block, MarginalLattice, RateVector};

/// Largest tolerated normalization drift in a single step.
pub const RENORM_TOL: f64 = 1e-6;

/// Default boundary-mass alarm threshold.
pub const BOUNDARY_THRESHOLD: f64 = 1e-6;

/// Stability radius of classical RK4 on the negative real axis.
const RK4_RADIUS: f64 = 2.785;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlmpConfig {
    pub t_end: f64,
    pub h: f64,
    pub method: Method,
    /// Spacing of recorded samples; every step when `None`.
    pub record_dt: Option<f64>,
    pub boundary_threshold: f64,
}

impl NlmpConfig {
    pub fn new(t_end: f64, h: f64) -> Self {
        Self {
            t_end,
            h,
            method: Method::Rk4,
            record_dt: Some(0.01),
            boundary_threshold: BOUNDARY_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::invalid(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::invalid(format!("h must be positive, got {}", self.h)));
        }
        if let Some(dt) = self.record_dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::invalid(format!("record_dt must be positive, got {dt}")));
            }
        }
        if !(self.boundary_threshold > 0.0) {
            return Err(Error::invalid("boundary_threshold must be positive"));
        }
        Ok(())
    }
}

/// Gershgorin bound on the spectral radius of the linearized generator.
pub fn max_event_rate(params: &NetworkParams) -> f64 {
    let node_a = params.gamma_a + params.gamma_ba + params.gamma_b + params.gamma_o / 2.0;
    let node_b = params.gamma_b + params.gamma_ab + params.gamma_a + params.gamma_o / 2.0;
    let node_o = params.gamma_o + params.gamma_ab + params.gamma_ba;
    2.0 * node_a.max(node_b).max(node_o)
}

/// Largest stable step for the given method.
pub fn step_limit(params: &NetworkParams, method: Method) -> f64 {
    let radius = match method {
        Method::Rk4 => RK4_RADIUS,
        Method::Euler => 2.0,
    };
    radius / max_event_rate(params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlmpSample {
    pub t: f64,
    /// `E[n_i] / N` in class order.
    pub scaled_means: [f64; 5],
    pub rates: RateVector,
    pub boundary_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlmpTrajectory {
    pub samples: Vec<NlmpSample>,
    pub final_state: MarginalLattice,
    pub final_time: f64,
    pub steps: usize,
    /// Largest per-step normalization correction.
    pub max_drift: f64,
}

fn sample(t: f64, mu: &MarginalLattice, params: &NetworkParams) -> NlmpSample {
    NlmpSample {
        t,
        scaled_means: mu.scaled_means(),
        rates: rates(mu, params),
        boundary_mass: mu.boundary_mass(),
    }
}

fn eval(mu: &MarginalLattice, params: &NetworkParams, out: &mut [f64]) {
    let r = rates(mu, params);
    rhs_with_rates(mu, &r, params, out);
}

fn axpy_into(dst: &mut MarginalLattice, base: &MarginalLattice, a: f64, k: &[f64]) {
    for ((d, b), k) in dst.data_mut().iter_mut().zip(base.data()).zip(k) {
        *d = b + a * k;
    }
}

/// Clamps negatives and rescales each marginal to unit mass; returns the
/// largest correction.
fn renormalize(mu: &mut MarginalLattice) -> f64 {
    let mut worst: f64 = 0.0;
    for b in [Block::O, Block::ABar, Block::BBar] {
        let r = mu.range(b);
        let block = &mut mu.data_mut()[r];
        let mut neg = 0.0;
        let mut s = 0.0;
        for v in block.iter_mut() {
            if *v < 0.0 {
                neg -= *v;
                *v = 0.0;
            }
            s += *v;
        }
        worst = worst.max((s - 1.0).abs()).max(neg);
        if s > 0.0 {
            for v in block.iter_mut() {
                *v /= s;
            }
        }
    }
    worst
}

/// Integrates from `mu0` and records samples on the `record_dt` grid.
pub fn integrate(
    mu0: &MarginalLattice,
    params: &NetworkParams,
    config: &NlmpConfig,
) -> Result<NlmpTrajectory> {
    integrate_with(mu0, params, config, |_, _| {})
}

/// Like [`integrate`]; `observer` also sees the full lattice at each record.
pub fn integrate_with<F>(
    mu0: &MarginalLattice,
    params: &NetworkParams,
    config: &NlmpConfig,
    mut observer: F,
) -> Result<NlmpTrajectory>
where
    F: FnMut(f64, &MarginalLattice),
{
    params.validate()?;
    config.validate()?;
    mu0.validate(1e-9)?;
    let limit = step_limit(params, config.method);
    if config.h > limit {
        return Err(Error::StepTooLarge { h: config.h, limit });
    }
    let threshold = config.boundary_threshold;
    let b0 = mu0.boundary_mass();
    if b0 > threshold {
        return Err(Error::TruncationOverflow { time: 0.0, boundary_mass: b0, threshold });
    }

    // Records fall on a uniform grid ending exactly at t_end; the step is
    // shrunk so that each record interval holds a whole number of steps.
    let (n_records, per_record) = if config.t_end == 0.0 {
        (0, 1)
    } else {
        let dt_rec = config.record_dt.unwrap_or(config.h).min(config.t_end);
        let n_rec = ((config.t_end / dt_rec) - 1e-9).ceil().max(1.0) as usize;
        let sub = ((config.t_end / n_rec as f64 / config.h) - 1e-9).ceil().max(1.0) as usize;
        (n_rec, sub)
    };
    let n_steps = n_records * per_record;
    let h = if n_steps == 0 { config.h } else { config.t_end / n_steps as f64 };
    let len = mu0.data().len();
    let mut mu = mu0.clone();
    let mut stage = mu0.clone();
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut k3 = vec![0.0; len];
    let mut k4 = vec![0.0; len];
    let mut max_drift: f64 = 0.0;
    let mut samples = vec![sample(0.0, &mu, params)];
    observer(0.0, &mu);

    for step in 1..=n_steps {
        let t = if step % per_record == 0 {
            config.t_end * (step / per_record) as f64 / n_records as f64
        } else {
            step as f64 * h
        };
        match config.method {
            Method::Euler => {
                eval(&mu, params, &mut k1);
                for (v, k) in mu.data_mut().iter_mut().zip(&k1) {
                    *v += h * k;
                }
            }
            Method::Rk4 => {
                eval(&mu, params, &mut k1);
                axpy_into(&mut stage, &mu, h / 2.0, &k1);
                eval(&stage, params, &mut k2);
                axpy_into(&mut stage, &mu, h / 2.0, &k2);
                eval(&stage, params, &mut k3);
                axpy_into(&mut stage, &mu, h, &k3);
                eval(&stage, params, &mut k4);
                for (i, v) in mu.data_mut().iter_mut().enumerate() {
                    *v += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        let drift = renormalize(&mut mu);
        if !drift.is_finite() || drift > RENORM_TOL {
            return Err(Error::NumericalFailure {
                what: "normalization breach".into(),
                time: t,
                residual: drift,
            });
        }
        max_drift = max_drift.max(drift);
        let bm = mu.boundary_mass();
        if bm > threshold {
            return Err(Error::TruncationOverflow { time: t, boundary_mass: bm, threshold });
        }
        if step % per_record == 0 {
            samples.push(sample(t, &mu, params));
            observer(t, &mu);
        }
    }

    Ok(NlmpTrajectory {
        samples,
        final_time: if n_steps == 0 { 0.0 } else { config.t_end },
        final_state: mu,
        steps: n_steps,
        max_drift,
    })
}
