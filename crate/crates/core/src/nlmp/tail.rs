//! Upper-orthant tail sums `u(x) = Σ_{y ≥ x} ν(y)` and the master equation
//! written directly on them.

use crate::error::{Error, Result};
use crate::model::NetworkParams;

use super::lattice::{MarginalLattice, RateVector};

/// Slack allowed on the inclusion-exclusion inverse before a tail array is
/// rejected as non-monotone.
const MONOTONE_TOL: f64 = 1e-12;

/// Tail sums per marginal, same shapes and layout as [`MarginalLattice`].
#[derive(Debug, Clone, PartialEq)]
pub struct TailCoordinates {
    pub x_max: usize,
    pub n: u32,
    pub u_o: Vec<f64>,
    pub u_abar: Vec<f64>,
    pub u_bbar: Vec<f64>,
}

impl TailCoordinates {
    fn dim(&self) -> usize {
        self.x_max + 1
    }

    /// Flattened `[u_o | u_abar | u_bbar]`.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.u_o.clone();
        v.extend_from_slice(&self.u_abar);
        v.extend_from_slice(&self.u_bbar);
        v
    }
}

fn tail_1d(m: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; m.len()];
    let mut acc = 0.0;
    for k in (0..m.len()).rev() {
        acc += m[k];
        u[k] = acc;
    }
    u
}

fn tail_2d(m: &[f64], d: usize) -> Vec<f64> {
    let mut u = vec![0.0; d * d];
    for k in (0..d).rev() {
        let mut row = 0.0;
        for l in (0..d).rev() {
            row += m[k * d + l];
            let below = if k + 1 < d { u[(k + 1) * d + l] } else { 0.0 };
            u[k * d + l] = row + below;
        }
    }
    u
}

fn at(u: &[f64], d: usize, k: usize, l: usize) -> f64 {
    if k < d && l < d {
        u[k * d + l]
    } else {
        0.0
    }
}

fn untail_1d(u: &[f64], name: &str) -> Result<Vec<f64>> {
    let d = u.len();
    let mut m = vec![0.0; d];
    for k in 0..d {
        let next = if k + 1 < d { u[k + 1] } else { 0.0 };
        m[k] = u[k] - next;
        if m[k] < -MONOTONE_TOL {
            return Err(Error::invalid(format!(
                "{name} is not monotone at {k}: mass {:e}",
                m[k]
            )));
        }
    }
    Ok(m)
}

fn untail_2d(u: &[f64], d: usize, name: &str) -> Result<Vec<f64>> {
    let mut m = vec![0.0; d * d];
    for k in 0..d {
        for l in 0..d {
            let v = at(u, d, k, l) - at(u, d, k + 1, l) - at(u, d, k, l + 1) + at(u, d, k + 1, l + 1);
            if v < -MONOTONE_TOL {
                return Err(Error::invalid(format!(
                    "{name} has negative inclusion-exclusion mass {v:e} at ({k}, {l})"
                )));
            }
            m[k * d + l] = v;
        }
    }
    Ok(m)
}

pub fn to_tail(mu: &MarginalLattice) -> TailCoordinates {
    let d = mu.dim();
    TailCoordinates {
        x_max: mu.x_max(),
        n: mu.n(),
        u_o: tail_1d(mu.mu_o()),
        u_abar: tail_2d(mu.mu_abar(), d),
        u_bbar: tail_2d(mu.mu_bbar(), d),
    }
}

fn check_shape(u: &TailCoordinates) -> Result<()> {
    let d = u.dim();
    if u.u_o.len() != d || u.u_abar.len() != d * d || u.u_bbar.len() != d * d {
        return Err(Error::invalid("tail arrays have the wrong shape"));
    }
    Ok(())
}

pub fn from_tail(u: &TailCoordinates) -> Result<MarginalLattice> {
    check_shape(u)?;
    let d = u.dim();
    let mu_o = untail_1d(&u.u_o, "u_o")?;
    let mu_abar = untail_2d(&u.u_abar, d, "u_abar")?;
    let mu_bbar = untail_2d(&u.u_bbar, d, "u_bbar")?;
    // Clamp the tolerated rounding negatives so the result is a valid lattice.
    let fix = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    MarginalLattice::new(u.x_max, u.n, fix(mu_o), fix(mu_abar), fix(mu_bbar))
}

/// Rates read off the tails.
pub fn tail_rates(u: &TailCoordinates, params: &NetworkParams) -> RateVector {
    let d = u.dim();
    let p1 = |v: &[f64]| if d > 1 { v[1] } else { 0.0 };
    RateVector {
        lambda_o: params.gamma_o * p1(&u.u_o),
        lambda_ba: params.gamma_ba * at(&u.u_abar, d, 0, 1),
        lambda_a: params.gamma_a * (at(&u.u_abar, d, 1, 0) - at(&u.u_abar, d, 1, 1)),
        lambda_ab: params.gamma_ab * at(&u.u_bbar, d, 0, 1),
        lambda_b: params.gamma_b * (at(&u.u_bbar, d, 1, 0) - at(&u.u_bbar, d, 1, 1)),
    }
}

fn drift_1d(u: &[f64], alpha: f64, gamma: f64) -> Vec<f64> {
    let d = u.len();
    let g = |k: usize| if k < d { u[k] } else { 0.0 };
    (0..d)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                alpha * (g(k - 1) - g(k)) - gamma * (g(k) - g(k + 1))
            }
        })
        .collect()
}

/// Flux balance of the orthant `{light ≥ k, heavy ≥ l}`.
fn drift_2d(u: &[f64], d: usize, alpha: f64, beta: f64, g_light: f64, g_heavy: f64) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for k in 0..d {
        for l in 0..d {
            let here = at(u, d, k, l);
            let mut v = 0.0;
            if k >= 1 {
                v += alpha * (at(u, d, k - 1, l) - here);
            }
            if l >= 1 {
                v += beta * (at(u, d, k, l - 1) - here);
                v -= g_heavy * (here - at(u, d, k, l + 1));
            } else if k >= 1 {
                let p_light_k_heavy_0 =
                    here - at(u, d, k + 1, 0) - at(u, d, k, 1) + at(u, d, k + 1, 1);
                v -= g_light * p_light_k_heavy_0;
            }
            out[k * d + l] = v;
        }
    }
    out
}

/// Time derivative of the tails.
pub fn rhs_tail(u: &TailCoordinates, params: &NetworkParams) -> Result<TailCoordinates> {
    check_shape(u)?;
    // Validity check only; the derivative is computed on `u` itself.
    from_tail(u)?;
    let d = u.dim();
    let r = tail_rates(u, params);
    Ok(TailCoordinates {
        x_max: u.x_max,
        n: u.n,
        u_o: drift_1d(&u.u_o, r.lambda_ab + r.lambda_ba, params.gamma_o),
        u_abar: drift_2d(&u.u_abar, d, r.lambda_o / 2.0, r.lambda_b, params.gamma_a, params.gamma_ba),
        u_bbar: drift_2d(&u.u_bbar, d, r.lambda_o / 2.0, r.lambda_a, params.gamma_b, params.gamma_ab),
    })
}
