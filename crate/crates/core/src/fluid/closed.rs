//! The closed fluid triangle and its mean-field ensemble version.
//!
//! Each time step holds the inflow rates constant. The rates solve the
//! closure `y_o = z_ab + z_ba`, `y_a = y_b = z_o / 2`, `y_ab = z_a`,
//! `y_ba = z_b`, where each `z` is the mass-weighted mean outflow rate over
//! the atoms during the step. The `y_ab <-> y_ba` loop through the two
//! priority nodes can have several solutions; [`BranchPolicy`] picks one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::ensemble::{Atom, ParticleEnsemble};
use crate::fluid::reflection::{priority_step, reflect_step};
use crate::model::{lyapunov_l, CycleTrajectory, NetworkParams, TriangleState};

/// Largest admissible time step.
pub const MAX_STEP: f64 = 0.05;

/// Selection rule among multiple solutions of the closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    /// Largest `y_ab`: fluid `A` is served first.
    AFirst,
    /// Mirror image of [`BranchPolicy::AFirst`].
    BFirst,
    /// Solution with the smallest `|y_ab - y_ba|`.
    #[default]
    Symmetric,
}

impl BranchPolicy {
    pub fn swapped(self) -> Self {
        match self {
            BranchPolicy::AFirst => BranchPolicy::BFirst,
            BranchPolicy::BFirst => BranchPolicy::AFirst,
            BranchPolicy::Symmetric => BranchPolicy::Symmetric,
        }
    }
}

impl std::str::FromStr for BranchPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "a_first" => Ok(BranchPolicy::AFirst),
            "b_first" => Ok(BranchPolicy::BFirst),
            "symmetric" => Ok(BranchPolicy::Symmetric),
            other => Err(Error::invalid(format!("unknown branch policy {other:?}"))),
        }
    }
}

/// Inflow rates of the five classes over one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowRates {
    pub y_o: f64,
    pub y_a: f64,
    pub y_ba: f64,
    pub y_b: f64,
    pub y_ab: f64,
}

impl FlowRates {
    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            y_o: v[0],
            y_a: v[1],
            y_ba: v[2],
            y_b: v[3],
            y_ab: v[4],
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.y_o, self.y_a, self.y_ba, self.y_b, self.y_ab]
    }

    pub fn swap_ab(&self) -> Self {
        Self {
            y_o: self.y_o,
            y_a: self.y_b,
            y_ba: self.y_ab,
            y_b: self.y_a,
            y_ab: self.y_ba,
        }
    }

    pub fn l1(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    fn validate(&self) -> Result<()> {
        for v in self.to_array() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "inflow rates must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Stopping rule for the rate fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Rates together with the solver log.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    pub rates: FlowRates,
    pub iterations: usize,
    /// Closure defect `|y_o' - y_o|` after each sweep.
    pub residuals: Vec<f64>,
    /// Whether the priority loop had more than one solution on the last sweep.
    pub multiple_branches: bool,
}

/// Per-atom outflow rates `(z_o, z_a, z_ba, z_b, z_ab)` and new state.
fn atom_step(
    p: &NetworkParams,
    x: &TriangleState,
    y: &FlowRates,
    h: f64,
) -> Result<(TriangleState, [f64; 5])> {
    let (o1, z_o) = reflect_step(p.gamma_o, x.x_o, y.y_o, h);
    let na = priority_step(p.gamma_ba, p.gamma_a, x.x_ba, x.x_a, y.y_ba, y.y_a, h)?;
    let nb = priority_step(p.gamma_ab, p.gamma_b, x.x_ab, x.x_b, y.y_ab, y.y_b, h)?;
    Ok((
        TriangleState::new(o1, na.light, na.heavy, nb.light, nb.heavy),
        [z_o, na.z_light, na.z_heavy, nb.z_light, nb.z_heavy],
    ))
}

/// Aggregated outflows as functions of the inflow rates, for one orientation.
struct Closure<'a> {
    atoms: &'a [Atom],
    p: NetworkParams,
    h: f64,
}

impl Closure<'_> {
    fn z_o(&self, y_o: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * reflect_step(self.p.gamma_o, a.state.x_o, y_o, self.h).1)
            .sum()
    }

    /// `(z_a, z_ba)` at node `Ā`.
    fn node_a(&self, y_a: f64, y_ba: f64) -> Result<(f64, f64)> {
        let (mut zl, mut zh) = (0.0, 0.0);
        for a in self.atoms {
            let s = priority_step(
                self.p.gamma_ba,
                self.p.gamma_a,
                a.state.x_ba,
                a.state.x_a,
                y_ba,
                y_a,
                self.h,
            )?;
            zl += a.weight * s.z_light;
            zh += a.weight * s.z_heavy;
        }
        Ok((zl, zh))
    }

    /// `(z_b, z_ab)` at node `B̄`.
    fn node_b(&self, y_b: f64, y_ab: f64) -> Result<(f64, f64)> {
        let (mut zl, mut zh) = (0.0, 0.0);
        for a in self.atoms {
            let s = priority_step(
                self.p.gamma_ab,
                self.p.gamma_b,
                a.state.x_ab,
                a.state.x_b,
                y_ab,
                y_b,
                self.h,
            )?;
            zl += a.weight * s.z_light;
            zh += a.weight * s.z_heavy;
        }
        Ok((zl, zh))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum InnerMode {
    Greatest,
    Balanced,
    Reduced,
}

const MONOTONE_ITERS: usize = 400;
const SCAN_POINTS: usize = 1024;

/// Largest fixed point of an increasing map `f` on `[0, hi]` with `f(hi) <= hi`.
fn greatest_fixed_point<F: Fn(f64) -> Result<f64>>(f: &F, hi: f64, tol: f64) -> Result<f64> {
    let mut y = hi;
    for _ in 0..MONOTONE_ITERS {
        let n = f(y)?;
        if (y - n).abs() <= tol {
            return Ok(n);
        }
        y = n;
    }
    // Slow contraction: bracket the highest sign change of f(y) - y below y.
    let top = y;
    let mut prev = top;
    for j in (0..SCAN_POINTS).rev() {
        let p = top * j as f64 / SCAN_POINTS as f64;
        if f(p)? - p >= 0.0 {
            return bisect(f, p, prev);
        }
        prev = p;
    }
    Ok(0.0)
}

/// Smallest fixed point of an increasing map `f` on `[0, hi]` with `f(0) >= 0`.
fn least_fixed_point<F: Fn(f64) -> Result<f64>>(f: &F, hi: f64, tol: f64) -> Result<f64> {
    let mut y = 0.0;
    for _ in 0..MONOTONE_ITERS {
        let n = f(y)?;
        if (y - n).abs() <= tol {
            return Ok(n);
        }
        y = n;
    }
    let bottom = y;
    let mut prev = bottom;
    for j in 1..=SCAN_POINTS {
        let p = bottom + (hi - bottom) * j as f64 / SCAN_POINTS as f64;
        if f(p)? - p <= 0.0 {
            return bisect(f, prev, p);
        }
        prev = p;
    }
    Ok(hi)
}

/// Root of `f(y) - y` between `lo` and `hi`, where the sign differs at the ends.
fn bisect<F: Fn(f64) -> Result<f64>>(f: &F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let g_lo = f(lo)? - lo;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = f(mid)? - mid;
        if g == 0.0 {
            return Ok(mid);
        }
        if (g > 0.0) == (g_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the priority loop for `(y_ab, y_ba)` given the light inflows.
fn solve_inner(
    c: &Closure,
    y_a: f64,
    y_b: f64,
    mode: InnerMode,
    tol: f64,
) -> Result<(f64, f64, bool)> {
    let za = |y_ba: f64| c.node_a(y_a, y_ba).map(|z| z.0);
    let zb = |y_ab: f64| c.node_b(y_b, y_ab).map(|z| z.0);
    match mode {
        InnerMode::Reduced => {
            // y = z_a(y) with y_ab = y_ba = y; z_a is decreasing in y.
            let hi = za(0.0)?;
            let g = |y: f64| za(y).map(|z| z - y);
            if g(hi)? >= 0.0 {
                return Ok((hi, hi, false));
            }
            let (mut lo, mut up) = (0.0, hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + up);
                if mid <= lo || mid >= up {
                    break;
                }
                if g(mid)? > 0.0 {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            let y = if g(up)?.abs() < g(lo)?.abs() { up } else { lo };
            Ok((y, y, false))
        }
        InnerMode::Greatest | InnerMode::Balanced => {
            let f = |y_ab: f64| -> Result<f64> { za(zb(y_ab)?) };
            let hi = za(0.0)?;
            let greatest = greatest_fixed_point(&f, hi, tol)?;
            if mode == InnerMode::Greatest {
                let least = least_fixed_point(&f, hi, tol)?;
                let multiple = greatest - least > 1e-9 * hi.max(1.0);
                return Ok((greatest, zb(greatest)?, multiple));
            }
            let least = least_fixed_point(&f, hi, tol)?;
            if greatest - least <= 1e-9 * hi.max(1.0) {
                return Ok((greatest, zb(greatest)?, false));
            }
            let mut candidates = vec![least];
            let mut prev = least;
            let mut g_prev = f(least)? - least;
            for j in 1..SCAN_POINTS {
                let p = least + (greatest - least) * j as f64 / SCAN_POINTS as f64;
                let g = f(p)? - p;
                if (g > 0.0) != (g_prev > 0.0) && g_prev != 0.0 {
                    candidates.push(bisect(&f, prev, p)?);
                }
                prev = p;
                g_prev = g;
            }
            candidates.push(greatest);
            let mut best = (f64::INFINITY, least, 0.0);
            for y_ab in candidates {
                let y_ba = zb(y_ab)?;
                let gap = (y_ab - y_ba).abs();
                if gap < best.0 {
                    best = (gap, y_ab, y_ba);
                }
            }
            Ok((best.1, best.2, true))
        }
    }
}

fn solve_oriented(
    ens: &ParticleEnsemble,
    p: &NetworkParams,
    h: f64,
    mode: InnerMode,
    settings: &PicardSettings,
    warm: Option<f64>,
) -> Result<PicardOutcome> {
    let c = Closure {
        atoms: ens.atoms(),
        p: *p,
        h,
    };
    let mut y_o = warm.unwrap_or_else(|| {
        ens.expect(|x| {
            let mut g = 0.0;
            if x.x_ab > 0.0 {
                g += p.gamma_ab;
            }
            if x.x_ba > 0.0 {
                g += p.gamma_ba;
            }
            g
        })
    });
    let inner_tol = settings.tol * 1e-2;
    let mut residuals = Vec::new();
    for it in 0..settings.max_iter {
        let z_o = c.z_o(y_o);
        let y_a = z_o / 2.0;
        let y_b = z_o / 2.0;
        let (y_ab, y_ba, multiple) = solve_inner(&c, y_a, y_b, mode, inner_tol)?;
        let rates = FlowRates {
            y_o,
            y_a,
            y_ba,
            y_b,
            y_ab,
        };
        let z_ba = c.node_a(y_a, y_ba)?.1;
        let z_ab = c.node_b(y_b, y_ab)?.1;
        let y_o_next = z_ab + z_ba;
        // the next sweep differs from this one only through y_o
        let defect = (y_o_next - y_o).abs();
        residuals.push(defect);
        if defect <= settings.tol {
            return Ok(PicardOutcome {
                rates,
                iterations: it + 1,
                residuals,
                multiple_branches: multiple,
            });
        }
        // damp after half the budget in case the plain sweep cycles
        y_o = if it >= settings.max_iter / 2 {
            0.5 * (y_o + y_o_next)
        } else {
            y_o_next
        };
    }
    Err(Error::NumericalFailure {
        what: "rate fixed point did not converge".into(),
        time: 0.0,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

fn swap_outcome(mut o: PicardOutcome) -> PicardOutcome {
    o.rates = o.rates.swap_ab();
    o
}

fn lexicographic_less(a: &ParticleEnsemble, b: &ParticleEnsemble) -> bool {
    for (x, y) in a.atoms().iter().zip(b.atoms()) {
        let ord = x.weight.total_cmp(&y.weight).then_with(|| {
            x.state
                .to_array()
                .iter()
                .zip(y.state.to_array().iter())
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if ord.is_ne() {
            return ord.is_lt();
        }
    }
    false
}

/// Solves for the step's inflow rates and returns the solver log.
///
/// `warm` seeds the `y_o` sweep; `None` uses the saturated-heavy guess.
/// The result is exactly equivariant under `A <-> B` exchange with
/// `AFirst <-> BFirst`.
pub fn picard_solve(
    ens: &ParticleEnsemble,
    params: &NetworkParams,
    h: f64,
    policy: BranchPolicy,
    settings: &PicardSettings,
    warm: Option<f64>,
) -> Result<PicardOutcome> {
    check_step(h)?;
    match policy {
        BranchPolicy::AFirst => solve_oriented(ens, params, h, InnerMode::Greatest, settings, warm),
        BranchPolicy::BFirst => solve_oriented(
            &ens.swap_ab(),
            &params.swapped(),
            h,
            InnerMode::Greatest,
            settings,
            warm,
        )
        .map(swap_outcome),
        BranchPolicy::Symmetric => {
            if *params == params.swapped() && ens.is_swap_symmetric() {
                return solve_oriented(ens, params, h, InnerMode::Reduced, settings, warm);
            }
            let mirror = ens.swap_ab();
            if lexicographic_less(&mirror, ens) {
                solve_oriented(
                    &mirror,
                    &params.swapped(),
                    h,
                    InnerMode::Balanced,
                    settings,
                    warm,
                )
                .map(swap_outcome)
            } else {
                solve_oriented(ens, params, h, InnerMode::Balanced, settings, warm)
            }
        }
    }
}

/// Fixed-point inflow rates for one step of size `h`.
pub fn picard_rates(
    ens: &ParticleEnsemble,
    params: &NetworkParams,
    h: f64,
    policy: BranchPolicy,
    tol: f64,
    max_iter: usize,
) -> Result<FlowRates> {
    picard_solve(ens, params, h, policy, &PicardSettings { tol, max_iter }, None).map(|o| o.rates)
}

fn check_step(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    if h > MAX_STEP {
        return Err(Error::StepTooLarge { h, limit: MAX_STEP });
    }
    Ok(())
}

/// One advanced ensemble with the per-atom outflow rates
/// `(z_o, z_a, z_ba, z_b, z_ab)` over the step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub ensemble: ParticleEnsemble,
    pub outflows: Vec<[f64; 5]>,
}

/// Advances every atom by `h` under the given inflow rates. Atoms are not
/// merged here.
pub fn nhds_step_ensemble(
    ens: &ParticleEnsemble,
    params: &NetworkParams,
    rates: &FlowRates,
    h: f64,
) -> Result<StepResult> {
    check_step(h)?;
    rates.validate()?;
    let mut atoms = Vec::with_capacity(ens.len());
    let mut outflows = Vec::with_capacity(ens.len());
    for a in ens.atoms() {
        let (x, z) = atom_step(params, &a.state, rates, h)?;
        atoms.push(Atom {
            weight: a.weight,
            state: x,
        });
        outflows.push(z);
    }
    Ok(StepResult {
        ensemble: ParticleEnsemble::from_atoms_unchecked(atoms),
        outflows,
    })
}

/// Settings for [`run_closed_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedRunConfig {
    pub t_end: f64,
    pub h: f64,
    pub policy: BranchPolicy,
    pub picard: PicardSettings,
    /// Keep every `record_stride`-th step (the final step is always kept).
    pub record_stride: usize,
}

impl ClosedRunConfig {
    pub fn new(t_end: f64, h: f64, policy: BranchPolicy) -> Self {
        Self {
            t_end,
            h,
            policy,
            picard: PicardSettings::default(),
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub picard_iterations: usize,
    pub picard_residual: f64,
    pub multiple_branches: bool,
    pub mean_mass: f64,
    pub lyapunov_mean: f64,
    /// Distance of the mean state to the orbit (NaN if the parameters admit none).
    pub dist_to_cycle: f64,
    pub cycle_phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedRecord {
    pub t: f64,
    pub ensemble: ParticleEnsemble,
    /// Rates for the step starting at `t`.
    pub rates: FlowRates,
    /// Mean outflow rates `(z_o, z_a, z_ba, z_b, z_ab)` over that step.
    pub outflow_rates: [f64; 5],
    pub diagnostics: StepDiagnostics,
}

impl ClosedRecord {
    pub fn mean(&self) -> TriangleState {
        self.ensemble.mean()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedTrajectory {
    pub params: NetworkParams,
    pub h: f64,
    pub records: Vec<ClosedRecord>,
}

impl ClosedTrajectory {
    pub fn last(&self) -> &ClosedRecord {
        self.records.last().expect("trajectory has at least the initial record")
    }

    /// Record closest to time `t`.
    pub fn at(&self, t: f64) -> &ClosedRecord {
        let mut best = &self.records[0];
        for r in &self.records {
            if (r.t - t).abs() < (best.t - t).abs() {
                best = r;
            }
        }
        best
    }
}

pub(crate) fn steps_for(t_end: f64, h: f64) -> Result<usize> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::invalid(format!("t_end must be non-negative, got {t_end}")));
    }
    Ok((t_end / h - 1e-9).ceil().max(0.0) as usize)
}

/// Runs the closed system with default solver settings and every step recorded.
pub fn run_closed(
    ens0: &ParticleEnsemble,
    params: &NetworkParams,
    t_end: f64,
    h: f64,
    policy: BranchPolicy,
) -> Result<ClosedTrajectory> {
    run_closed_with(ens0, params, &ClosedRunConfig::new(t_end, h, policy))
}

pub fn run_closed_with(
    ens0: &ParticleEnsemble,
    params: &NetworkParams,
    cfg: &ClosedRunConfig,
) -> Result<ClosedTrajectory> {
    params.validate()?;
    check_step(cfg.h)?;
    let steps = steps_for(cfg.t_end, cfg.h)?;
    let stride = cfg.record_stride.max(1);
    let cycle = CycleTrajectory::new(params).ok();
    let mut ens = ens0.clone().merged();
    let mut warm = None;
    let mut records = Vec::with_capacity(steps / stride + 2);
    for k in 0..=steps {
        let t = k as f64 * cfg.h;
        let out = picard_solve(&ens, params, cfg.h, cfg.policy, &cfg.picard, warm)
            .map_err(|e| e.at_time(t))?;
        warm = Some(out.rates.y_o);
        let step = nhds_step_ensemble(&ens, params, &out.rates, cfg.h).map_err(|e| e.at_time(t))?;
        if k % stride == 0 || k == steps {
            let mean = ens.mean();
            let (dist, phase) = cycle.map_or((f64::NAN, f64::NAN), |c| c.distance(&mean));
            let mut outflow_rates = [0.0; 5];
            for (a, z) in ens.atoms().iter().zip(&step.outflows) {
                for (acc, v) in outflow_rates.iter_mut().zip(z) {
                    *acc += a.weight * v;
                }
            }
            records.push(ClosedRecord {
                t,
                ensemble: ens.clone(),
                rates: out.rates,
                outflow_rates,
                diagnostics: StepDiagnostics {
                    picard_iterations: out.iterations,
                    picard_residual: out.residuals.last().copied().unwrap_or(0.0),
                    multiple_branches: out.multiple_branches,
                    mean_mass: mean.total(),
                    lyapunov_mean: ens.expect(|x| lyapunov_l(x, params)),
                    dist_to_cycle: dist,
                    cycle_phase: phase,
                },
            });
        }
        if k == steps {
            break;
        }
        ens = step.ensemble.merged();
    }
    Ok(ClosedTrajectory {
        params: *params,
        h: cfg.h,
        records,
    })
}

/// Drives the ensemble with externally supplied inflow rates; `inflow(k)`
/// gives the rates on step `k`. Returns the ensemble after every step,
/// starting with the initial one.
pub fn run_open<F: Fn(usize) -> FlowRates>(
    ens0: &ParticleEnsemble,
    params: &NetworkParams,
    h: f64,
    steps: usize,
    inflow: F,
) -> Result<Vec<ParticleEnsemble>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(ens0.clone());
    let mut ens = ens0.clone();
    for k in 0..steps {
        ens = nhds_step_ensemble(&ens, params, &inflow(k), h)
            .map_err(|e| e.at_time(k as f64 * h))?
            .ensemble;
        out.push(ens.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cycle_point;

    fn p() -> NetworkParams {
        NetworkParams::default()
    }

    fn delta(x: TriangleState) -> ParticleEnsemble {
        ParticleEnsemble::delta(x).unwrap()
    }

    #[test]
    fn star_rates() {
        for policy in [BranchPolicy::AFirst, BranchPolicy::BFirst, BranchPolicy::Symmetric] {
            let r = picard_rates(&delta(TriangleState::star()), &p(), 1e-3, policy, 1e-12, 100)
                .unwrap();
            assert_eq!(r.to_array(), [3.0, 1.5, 1.5, 1.5, 1.5], "{policy:?}");
        }
    }

    #[test]
    fn branch_dependent_rates() {
        let x = TriangleState::new(0.5, 0.25, 0.0, 0.25, 0.0);
        let sym = picard_rates(&delta(x), &p(), 1e-3, BranchPolicy::Symmetric, 1e-12, 100).unwrap();
        assert!((sym.y_ab - 10.0 / 6.0).abs() < 1e-9);
        assert_eq!(sym.y_ab, sym.y_ba);
        assert!((sym.y_o - 10.0 / 3.0).abs() < 1e-9);
        assert_eq!(sym.y_a, 1.5);
        assert_eq!(sym.y_b, 1.5);

        let af = picard_rates(&delta(x), &p(), 1e-3, BranchPolicy::AFirst, 1e-12, 100).unwrap();
        assert!((af.y_ab - 10.0).abs() < 1e-9, "{af:?}");
        assert!(af.y_ba.abs() < 1e-9);
        assert!((af.y_o - 2.0).abs() < 1e-9);

        let bf = picard_rates(&delta(x), &p(), 1e-3, BranchPolicy::BFirst, 1e-12, 100).unwrap();
        assert_eq!(bf, af.swap_ab());
    }

    #[test]
    fn star_is_fixed() {
        let e = delta(TriangleState::star());
        let r = picard_rates(&e, &p(), 1e-3, BranchPolicy::Symmetric, 1e-12, 100).unwrap();
        let s = nhds_step_ensemble(&e, &p(), &r, 1e-3).unwrap();
        assert_eq!(s.ensemble.atoms()[0].state, TriangleState::star());
    }

    #[test]
    fn empty_atom_stays_empty() {
        let e = delta(TriangleState::default());
        let s = nhds_step_ensemble(&e, &p(), &FlowRates::default(), 1e-3).unwrap();
        assert_eq!(s.ensemble.atoms()[0].state, TriangleState::default());
    }

    #[test]
    fn step_too_large() {
        let e = delta(TriangleState::star());
        let err = nhds_step_ensemble(&e, &p(), &FlowRates::default(), 0.06).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn cycle_moves_along_itself() {
        let e = delta(cycle_point(0.0).unwrap());
        let tr = run_closed(&e, &p(), 0.5, 1e-3, BranchPolicy::Symmetric).unwrap();
        for r in &tr.records {
            let expect = cycle_point(r.t).unwrap();
            assert!(r.mean().l1(&expect) < 1e-9, "t={} {:?}", r.t, r.mean());
        }
    }

    #[test]
    fn duplicate_atoms_match_single() {
        let x = cycle_point(0.0).unwrap();
        let a = run_closed(&delta(x), &p(), 1.0, 1e-3, BranchPolicy::Symmetric).unwrap();
        let e2 = ParticleEnsemble::new(vec![(0.5, x), (0.5, x)]).unwrap();
        let b = run_closed(&e2, &p(), 1.0, 1e-3, BranchPolicy::Symmetric).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.ensemble, rb.ensemble);
        }
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("a_first".parse::<BranchPolicy>().unwrap(), BranchPolicy::AFirst);
        assert_eq!("B-FIRST".parse::<BranchPolicy>().unwrap(), BranchPolicy::BFirst);
        assert!("middle".parse::<BranchPolicy>().is_err());
        assert_eq!(BranchPolicy::default(), BranchPolicy::Symmetric);
    }

    #[test]
    fn asymmetric_ensemble_symmetric_policy_equivariant() {
        let x = TriangleState::new(0.3, 0.3, 0.0, 0.4, 0.0);
        let y = TriangleState::new(0.1, 0.5, 0.05, 0.35, 0.0);
        let e = ParticleEnsemble::new(vec![(0.6, x), (0.4, y)]).unwrap();
        let s = PicardSettings::default();
        let r1 = picard_solve(&e, &p(), 1e-3, BranchPolicy::Symmetric, &s, None).unwrap();
        let r2 = picard_solve(&e.swap_ab(), &p(), 1e-3, BranchPolicy::Symmetric, &s, None).unwrap();
        assert_eq!(r1.rates.swap_ab(), r2.rates);
    }
}
