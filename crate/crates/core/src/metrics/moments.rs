//! Exponential moments of the workload functional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::ensemble::ParticleEnsemble;
use crate::model::{lyapunov_l, NetworkParams};
use crate::nlmp::MarginalLattice;

/// Exponents above this are reported as `+inf`.
pub const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    pub alpha: f64,
    /// Time horizon over which moments are reported.
    pub horizon: f64,
    /// Permit `alpha > 1`.
    #[serde(default)]
    pub allow_large_alpha: bool,
}

impl MomentConfig {
    pub fn new(alpha: f64, horizon: f64) -> Self {
        Self { alpha, horizon, allow_large_alpha: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.alpha > 1.0 && !self.allow_large_alpha {
            return Err(Error::invalid(format!(
                "alpha = {} exceeds 1; set allow_large_alpha to use it",
                self.alpha
            )));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::invalid("horizon must be non-negative"));
        }
        Ok(())
    }
}

/// Measures accepted by [`exp_moment`].
#[derive(Debug, Clone, Copy)]
pub enum Measure<'a> {
    Ensemble(&'a ParticleEnsemble),
    Lattice(&'a MarginalLattice),
}

/// `E[exp(α L)]` under the measure; lattices use scaled counts `n / N`.
pub fn exp_moment(measure: Measure<'_>, alpha: f64, params: &NetworkParams) -> f64 {
    match measure {
        Measure::Ensemble(e) => exp_moment_ensemble(e, alpha, params),
        Measure::Lattice(mu) => exp_moment_lattice(mu, alpha, params),
    }
}

/// Written as `1 + Σ w (e^{αL} - 1)` so the value is exactly 1 when `L`
/// vanishes on the support.
pub fn exp_moment_ensemble(ens: &ParticleEnsemble, alpha: f64, params: &NetworkParams) -> f64 {
    let mut acc = 0.0;
    for a in ens.atoms() {
        let z = alpha * lyapunov_l(&a.state, params);
        if z > EXP_GUARD && a.weight > 0.0 {
            return f64::INFINITY;
        }
        acc += a.weight * z.exp_m1();
    }
    1.0 + acc
}

/// Sorted `(value, probability)` pairs with equal values pooled.
fn histogram(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.retain(|(_, p)| *p > 0.0);
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (x, p) in v {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += p,
            _ => out.push((x, p)),
        }
    }
    out
}

/// Running CDF of a histogram evaluated on an increasing query sequence.
struct Cdf<'a> {
    h: &'a [(f64, f64)],
    total: f64,
    pos: usize,
    acc: f64,
}

impl<'a> Cdf<'a> {
    fn new(h: &'a [(f64, f64)]) -> Self {
        Self { h, total: h.iter().map(|(_, p)| p).sum(), pos: 0, acc: 0.0 }
    }

    fn at(&mut self, x: f64) -> f64 {
        while self.pos < self.h.len() && self.h[self.pos].0 <= x {
            self.acc += self.h[self.pos].1;
            self.pos += 1;
        }
        if self.pos == self.h.len() {
            1.0
        } else {
            self.acc / self.total
        }
    }
}

/// The node workloads are functions of independent marginals, so the law of
/// their maximum is the product of the three CDFs.
pub fn exp_moment_lattice(mu: &MarginalLattice, alpha: f64, params: &NetworkParams) -> f64 {
    let n = mu.n() as f64;
    let d = mu.dim();
    let t_o = histogram(
        mu.mu_o()
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 / n / params.gamma_o, *p))
            .collect(),
    );
    let node = |m: &[f64], g_light: f64, g_heavy: f64| {
        let mut v = Vec::with_capacity(d * d);
        for k in 0..d {
            for l in 0..d {
                v.push(((l as f64 / n) / g_heavy + (k as f64 / n) / g_light, m[k * d + l]));
            }
        }
        histogram(v)
    };
    let t_a = node(mu.mu_abar(), params.gamma_a, params.gamma_ba);
    let t_b = node(mu.mu_bbar(), params.gamma_b, params.gamma_ab);

    let mut grid: Vec<f64> = t_o.iter().chain(&t_a).chain(&t_b).map(|(x, _)| *x).collect();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let (mut fo, mut fa, mut fb) = (Cdf::new(&t_o), Cdf::new(&t_a), Cdf::new(&t_b));
    let mut prev = 0.0;
    let mut acc = 0.0;
    for x in grid {
        let g = fo.at(x) * fa.at(x) * fb.at(x);
        let dp = (g - prev).max(0.0);
        prev = g;
        if x >= params.k_threshold && dp > 0.0 {
            let z = alpha * x;
            if z > EXP_GUARD {
                return f64::INFINITY;
            }
            acc += dp * z.exp_m1();
        }
    }
    1.0 + acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundReport {
    pub pass: bool,
    /// Supremum over the checked window.
    pub sup: f64,
    pub bound: f64,
    /// Time of the first sample above the bound.
    pub first_violation: Option<f64>,
}

/// Checks `sup_{t ≥ window_start} m(t) ≤ bound` on a sampled series.
pub fn moment_bound_check(series: &[(f64, f64)], bound: f64, window_start: f64) -> MomentBoundReport {
    let mut sup = f64::NEG_INFINITY;
    let mut first_violation = None;
    for (t, v) in series.iter().filter(|(t, _)| *t >= window_start) {
        sup = sup.max(*v);
        if first_violation.is_none() && !(*v <= bound) {
            first_violation = Some(*t);
        }
    }
    MomentBoundReport {
        pass: first_violation.is_none(),
        sup,
        bound,
        first_violation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TriangleState;

    fn p() -> NetworkParams {
        NetworkParams::default()
    }

    #[test]
    fn ensemble_examples() {
        let inside = TriangleState::new(0.0, 1.0, 0.0, 0.0, 0.0);
        let far = TriangleState::new(60.0, 0.0, 0.0, 0.0, 0.0);
        let e = ParticleEnsemble::delta(inside).unwrap();
        assert_eq!(exp_moment(Measure::Ensemble(&e), 0.1, &p()), 1.0);
        let e = ParticleEnsemble::delta(far).unwrap();
        let v = exp_moment(Measure::Ensemble(&e), 0.1, &p());
        assert!((v - 2f64.exp()).abs() < 1e-14);
        let e = ParticleEnsemble::new(vec![(0.5, inside), (0.5, far)]).unwrap();
        let v = exp_moment(Measure::Ensemble(&e), 0.1, &p());
        assert!((v - (1.0 + 2f64.exp()) / 2.0).abs() < 1e-14);
        let e = ParticleEnsemble::delta(TriangleState::new(3000.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(exp_moment(Measure::Ensemble(&e), 1.0, &p()), f64::INFINITY);
    }

    #[test]
    fn lattice_matches_product_enumeration() {
        // Small lattice with spread marginals; brute force over the joint.
        let x_max = 6;
        let d = x_max + 1;
        let n = 1u32;
        let mut mu_o = vec![0.0; d];
        mu_o[0] = 0.5;
        mu_o[6] = 0.5;
        let mut a = vec![0.0; d * d];
        a[0] = 0.25;
        a[6 * d + 6] = 0.25;
        a[3 * d + 5] = 0.5;
        let mut b = vec![0.0; d * d];
        b[2] = 0.6;
        b[5 * d + 1] = 0.4;
        let mu = MarginalLattice::new(x_max, n, mu_o.clone(), a.clone(), b.clone()).unwrap();
        let params = NetworkParams { k_threshold: 1.0, ..p() };
        let alpha = 0.3;
        let mut brute = 0.0;
        for (o, po) in mu_o.iter().enumerate() {
            for (ia, pa) in a.iter().enumerate() {
                for (ib, pb) in b.iter().enumerate() {
                    let w = po * pa * pb;
                    if w == 0.0 {
                        continue;
                    }
                    let x = TriangleState::new(
                        o as f64,
                        (ia / d) as f64,
                        (ia % d) as f64,
                        (ib / d) as f64,
                        (ib % d) as f64,
                    );
                    brute += w * (alpha * lyapunov_l(&x, &params)).exp();
                }
            }
        }
        let v = exp_moment_lattice(&mu, alpha, &params);
        assert!((v - brute).abs() < 1e-12, "{v} vs {brute}");
    }

    #[test]
    fn lattice_interior_is_one() {
        let mu = MarginalLattice::product_delta(10, 5, [0, 5, 0, 0, 0]).unwrap();
        assert_eq!(exp_moment(Measure::Lattice(&mu), 0.5, &p()), 1.0);
    }

    #[test]
    fn bound_check_examples() {
        let flat: Vec<_> = (0..10).map(|i| (i as f64, 1.0)).collect();
        assert!(moment_bound_check(&flat, 1.0, 0.0).pass);
        let decay: Vec<_> = (0..10).map(|i| (i as f64, 3.0 * (-(i as f64)).exp() + 1.0)).collect();
        assert!(moment_bound_check(&decay, 2.0, 2.0).pass);
        let grow: Vec<_> = (0..10).map(|i| (i as f64, 1.0 + i as f64)).collect();
        let r = moment_bound_check(&grow, 4.5, 0.0);
        assert!(!r.pass);
        assert_eq!(r.first_violation, Some(4.0));
        assert_eq!(r.sup, 10.0);
    }

    #[test]
    fn config_validation() {
        assert!(MomentConfig::new(0.05, 10.0).validate().is_ok());
        assert!(MomentConfig::new(0.0, 10.0).validate().is_err());
        assert!(MomentConfig::new(2.0, 10.0).validate().is_err());
        let mut c = MomentConfig::new(2.0, 10.0);
        c.allow_large_alpha = true;
        assert!(c.validate().is_ok());
    }
}
