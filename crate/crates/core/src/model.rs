//! Network parameters, the five-coordinate state, the periodic orbit of the
//! closed fluid triangle and the workload Lyapunov functional.
//!
//! Coordinates are always ordered `(O, A, BA, B, AB)`. Node `Ā` holds the
//! light class `A` and the heavy class `BA` (heavy preempts light); node `B̄`
//! holds light `B` and heavy `AB`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical index of each class inside a `[f64; 5]` state vector.
pub const IDX_O: usize = 0;
pub const IDX_A: usize = 1;
pub const IDX_BA: usize = 2;
pub const IDX_B: usize = 3;
pub const IDX_AB: usize = 4;

/// Class labels in canonical order.
pub const CLASS_NAMES: [&str; 5] = ["o", "a", "ba", "b", "ab"];

/// Service rates of the five classes and the radius of the compact set used
/// by the Lyapunov functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    pub gamma_o: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_ab: f64,
    pub gamma_ba: f64,
    pub k_threshold: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            gamma_o: 3.0,
            gamma_a: 10.0,
            gamma_b: 10.0,
            gamma_ab: 2.0,
            gamma_ba: 2.0,
            k_threshold: 10.0,
        }
    }
}

impl NetworkParams {
    pub fn new(
        gamma_o: f64,
        gamma_a: f64,
        gamma_b: f64,
        gamma_ab: f64,
        gamma_ba: f64,
        k_threshold: f64,
    ) -> Result<Self> {
        let p = Self {
            gamma_o,
            gamma_a,
            gamma_b,
            gamma_ab,
            gamma_ba,
            k_threshold,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks every field; the error message starts with the offending field name.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named_fields() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!(
                    "{name}: must be finite and strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn named_fields(&self) -> [(&'static str, f64); 6] {
        [
            ("gamma_o", self.gamma_o),
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("gamma_ab", self.gamma_ab),
            ("gamma_ba", self.gamma_ba),
            ("k_threshold", self.k_threshold),
        ]
    }

    /// Service rates in canonical `(O, A, BA, B, AB)` order.
    pub fn rates(&self) -> [f64; 5] {
        [
            self.gamma_o,
            self.gamma_a,
            self.gamma_ba,
            self.gamma_b,
            self.gamma_ab,
        ]
    }

    pub fn gamma_max(&self) -> f64 {
        self.rates().into_iter().fold(0.0, f64::max)
    }

    /// The parameter set with the roles of `A` and `B` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            gamma_a: self.gamma_b,
            gamma_b: self.gamma_a,
            gamma_ab: self.gamma_ba,
            gamma_ba: self.gamma_ab,
            ..*self
        }
    }
}

/// A point of the non-negative orthant in `(O, A, BA, B, AB)` order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TriangleState {
    pub x_o: f64,
    pub x_a: f64,
    pub x_ba: f64,
    pub x_b: f64,
    pub x_ab: f64,
}

impl TriangleState {
    pub const fn new(x_o: f64, x_a: f64, x_ba: f64, x_b: f64, x_ab: f64) -> Self {
        Self {
            x_o,
            x_a,
            x_ba,
            x_b,
            x_ab,
        }
    }

    /// The fixed point `∗`: all fluid parked at `Ō`.
    pub const fn star() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.x_o, self.x_a, self.x_ba, self.x_b, self.x_ab]
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.to_array().into_iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "state coordinate x_{} must be finite and non-negative, got {v}",
                    CLASS_NAMES[i]
                )));
            }
        }
        Ok(())
    }

    /// Total mass. Summed so that the result is unchanged by [`Self::swap_ab`].
    pub fn total(&self) -> f64 {
        self.x_o + ((self.x_a + self.x_b) + (self.x_ba + self.x_ab))
    }

    /// Exchanges the roles of `A` and `B`: `(x_a, x_ba) <-> (x_b, x_ab)`.
    pub fn swap_ab(&self) -> Self {
        Self::new(self.x_o, self.x_b, self.x_ab, self.x_a, self.x_ba)
    }

    /// L1 distance, summed in a swap-symmetric order.
    pub fn l1(&self, other: &Self) -> f64 {
        let d = |a: f64, b: f64| (a - b).abs();
        d(self.x_o, other.x_o)
            + ((d(self.x_a, other.x_a) + d(self.x_b, other.x_b))
                + (d(self.x_ba, other.x_ba) + d(self.x_ab, other.x_ab)))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * c))
    }
}

/// Workload functional: zero inside the compact set, the largest scaled node
/// workload outside of it.
pub fn lyapunov_l(x: &TriangleState, params: &NetworkParams) -> f64 {
    let m = workload_max(x, params);
    if m < params.k_threshold {
        0.0
    } else {
        m
    }
}

/// `max{x_ab/γ_ab + x_b/γ_b, x_ba/γ_ba + x_a/γ_a, x_o/γ_o}`.
pub fn workload_max(x: &TriangleState, params: &NetworkParams) -> f64 {
    let node_b = x.x_ab / params.gamma_ab + x.x_b / params.gamma_b;
    let node_a = x.x_ba / params.gamma_ba + x.x_a / params.gamma_a;
    let node_o = x.x_o / params.gamma_o;
    node_b.max(node_a).max(node_o)
}

/// The periodic orbit `C` of the closed fluid triangle, started at
/// `(0, 1, 0, 0, 0)`.
///
/// Each half period has two linear pieces: the light class drains into the
/// opposite node (where it becomes heavy and blocks the other light class),
/// then the heavy buffer drains while the blocked class keeps filling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleTrajectory {
    first: HalfCycle,
    second: HalfCycle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HalfCycle {
    /// End of the drain piece.
    t_drain: f64,
    /// Length of the half.
    t_half: f64,
    /// Decay rate of the draining light class on the first piece.
    drain_rate: f64,
    /// Growth rate of the heavy buffer on the first piece.
    heavy_rate: f64,
    /// Growth rate of the blocked light class (both pieces); also the
    /// heavy buffer's decay rate on the second piece.
    trickle: f64,
}

impl HalfCycle {
    fn new(gamma_light: f64, gamma_heavy: f64) -> Self {
        let trickle = gamma_heavy / 2.0;
        let drain_rate = gamma_light - trickle;
        let t_drain = 1.0 / drain_rate;
        let heavy_rate = gamma_light - gamma_heavy;
        let heavy_peak = heavy_rate * t_drain;
        Self {
            t_drain,
            t_half: t_drain + heavy_peak / trickle,
            drain_rate,
            heavy_rate,
            trickle,
        }
    }

    /// Returns `(source light, destination heavy, destination light)`.
    fn at(&self, s: f64) -> (f64, f64, f64) {
        if s <= self.t_drain {
            (
                (1.0 - self.drain_rate * s).max(0.0),
                self.heavy_rate * s,
                self.trickle * s,
            )
        } else {
            let peak = self.heavy_rate * self.t_drain;
            let ds = s - self.t_drain;
            (
                0.0,
                (peak - self.trickle * ds).max(0.0),
                (self.trickle * self.t_drain + self.trickle * ds).min(1.0),
            )
        }
    }
}

impl CycleTrajectory {
    /// Builds the orbit for `params`. The construction assumes the heavy
    /// classes are slower than the light ones and that `Ō` can pass the
    /// heavy outflow through without queueing.
    pub fn new(params: &NetworkParams) -> Result<Self> {
        params.validate()?;
        if params.gamma_ab >= params.gamma_a || params.gamma_ba >= params.gamma_b {
            return Err(Error::invalid(
                "cycle requires gamma_ab < gamma_a and gamma_ba < gamma_b",
            ));
        }
        if params.gamma_ab > params.gamma_o || params.gamma_ba > params.gamma_o {
            return Err(Error::invalid(
                "cycle requires gamma_ab <= gamma_o and gamma_ba <= gamma_o",
            ));
        }
        Ok(Self {
            first: HalfCycle::new(params.gamma_a, params.gamma_ab),
            second: HalfCycle::new(params.gamma_b, params.gamma_ba),
        })
    }

    pub fn period(&self) -> f64 {
        self.first.t_half + self.second.t_half
    }

    pub fn half_period(&self) -> f64 {
        self.first.t_half
    }

    /// Phase boundaries of the four linear pieces, `[0, .., period]`.
    pub fn breakpoints(&self) -> [f64; 5] {
        let h = self.first.t_half;
        [
            0.0,
            self.first.t_drain,
            h,
            h + self.second.t_drain,
            h + self.second.t_half,
        ]
    }

    pub fn point(&self, phase: f64) -> Result<TriangleState> {
        if !phase.is_finite() {
            return Err(Error::invalid(format!("phase must be finite, got {phase}")));
        }
        Ok(self.point_unchecked(phase))
    }

    fn point_unchecked(&self, phase: f64) -> TriangleState {
        let period = self.period();
        let mut s = phase.rem_euclid(period);
        if s >= period {
            s = 0.0;
        }
        if s <= self.first.t_half {
            let (a, ab, b) = self.first.at(s);
            TriangleState::new(0.0, a, 0.0, b, ab)
        } else {
            let (b, ba, a) = self.second.at(s - self.first.t_half);
            TriangleState::new(0.0, a, ba, b, 0.0)
        }
    }

    /// L1 distance from `x` to the orbit and a minimizing phase in `[0, period)`.
    ///
    /// On each affine piece of the orbit the distance is convex and piecewise
    /// linear in the phase, so its minimum sits at a piece end or at a phase
    /// where one coordinate of the orbit crosses the matching coordinate of
    /// `x`; all such candidates are evaluated.
    pub fn distance(&self, x: &TriangleState) -> (f64, f64) {
        let bp = self.breakpoints();
        let xs = x.to_array();
        let mut best = (f64::INFINITY, 0.0);
        let consider = |phi: f64, best: &mut (f64, f64)| {
            let d = self.point_unchecked(phi).l1(x);
            if d < best.0 - 1e-13 || ((d - best.0).abs() <= 1e-13 && phi < best.1) {
                *best = (d, phi);
            }
        };
        for w in bp.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let p0 = self.point_unchecked(lo).to_array();
            // interior point avoids the wrap at the period end
            let probe = lo + 0.5 * (hi - lo);
            let pm = self.point_unchecked(probe).to_array();
            consider(lo, &mut best);
            consider(hi, &mut best);
            for i in 0..5 {
                let slope = (pm[i] - p0[i]) / (probe - lo);
                if slope != 0.0 {
                    let phi = lo + (xs[i] - p0[i]) / slope;
                    if phi > lo && phi < hi {
                        consider(phi, &mut best);
                    }
                }
            }
        }
        if best.1 >= self.period() - 1e-12 {
            best.1 = 0.0;
        }
        best
    }

    /// Minimizes `cost(point(phase))` over one period, for a cost that is
    /// convex in the state. Each piece of the orbit is affine in the phase,
    /// so the composite is convex per piece and a ternary search per piece
    /// finds the exact minimum. Returns `(min, argmin phase)`.
    pub fn minimize_convex<F: Fn(&TriangleState) -> f64>(&self, cost: F) -> (f64, f64) {
        let bp = self.breakpoints();
        let f = |phi: f64| cost(&self.point_unchecked(phi));
        let mut best = (f64::INFINITY, 0.0);
        for w in bp.windows(2) {
            let (d, phi) = ternary(&f, w[0], w[1]);
            // near-ties go to the earlier piece
            if d < best.0 - 1e-13 {
                best = (d, phi);
            }
        }
        if best.1 >= self.period() - 1e-12 {
            best.1 = 0.0;
        }
        best
    }
}

fn ternary<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mid = 0.5 * (lo + hi);
    // the minimum of a convex piece often sits exactly on a breakpoint
    [(f(mid), mid), (f(lo), lo), (f(hi), hi)]
        .into_iter()
        .fold((f64::INFINITY, mid), |acc, c| if c.0 < acc.0 { c } else { acc })
}

fn default_cycle() -> CycleTrajectory {
    CycleTrajectory::new(&NetworkParams::default()).expect("default parameters admit a cycle")
}

/// Point of the default-parameter orbit at `phase` (reduced modulo the period).
pub fn cycle_point(phase: f64) -> Result<TriangleState> {
    default_cycle().point(phase)
}

/// Distance to the default-parameter orbit and the minimizing phase.
pub fn dist_to_cycle(x: &TriangleState) -> (f64, f64) {
    default_cycle().distance(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &TriangleState, b: &TriangleState, tol: f64) -> bool {
        a.l1(b) <= tol
    }

    #[test]
    fn default_params() {
        let p = NetworkParams::default();
        assert_eq!(p.rates(), [3.0, 10.0, 2.0, 10.0, 2.0]);
        assert_eq!(p.k_threshold, 10.0);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn validation_names_field() {
        let mut p = NetworkParams::default();
        p.gamma_a = -1.0;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("gamma_a"), "{err}");
        p.gamma_a = f64::NAN;
        assert!(p.validate().is_err());
        p.gamma_a = 10.0;
        p.k_threshold = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn cycle_waypoints() {
        let c = default_cycle();
        assert!((c.period() - 2.0).abs() < 1e-15);
        let p0 = cycle_point(0.0).unwrap();
        assert_eq!(p0, TriangleState::new(0.0, 1.0, 0.0, 0.0, 0.0));
        let p19 = cycle_point(1.0 / 9.0).unwrap();
        assert!(close(
            &p19,
            &TriangleState::new(0.0, 0.0, 0.0, 1.0 / 9.0, 8.0 / 9.0),
            1e-14
        ));
        let p1 = cycle_point(1.0).unwrap();
        assert!(close(&p1, &TriangleState::new(0.0, 0.0, 0.0, 1.0, 0.0), 1e-14));
        let p2 = cycle_point(2.0).unwrap();
        assert_eq!(p2, p0);
        assert!(cycle_point(f64::NAN).is_err());
        assert!(cycle_point(f64::INFINITY).is_err());
    }

    #[test]
    fn cycle_mass_and_symmetry() {
        for k in 0..2000 {
            let phi = k as f64 * 1e-3;
            let x = cycle_point(phi).unwrap();
            assert!((x.total() - 1.0).abs() < 1e-14, "phi={phi}");
            let nonzero = x.to_array().iter().filter(|v| **v > 0.0).count();
            assert!(nonzero <= 3);
            let shifted = cycle_point(phi + 1.0).unwrap();
            assert!(close(&shifted, &x.swap_ab(), 1e-14), "phi={phi}");
        }
    }

    #[test]
    fn lyapunov_examples() {
        let p = NetworkParams::default();
        assert_eq!(lyapunov_l(&TriangleState::new(0.0, 1.0, 0.0, 0.0, 0.0), &p), 0.0);
        assert_eq!(lyapunov_l(&TriangleState::new(60.0, 0.0, 0.0, 0.0, 0.0), &p), 20.0);
        assert_eq!(lyapunov_l(&TriangleState::new(0.0, 0.0, 0.0, 0.0, 40.0), &p), 20.0);
        // boundary of the compact set belongs to the outside
        assert_eq!(lyapunov_l(&TriangleState::new(30.0, 0.0, 0.0, 0.0, 0.0), &p), 10.0);
        assert_eq!(
            lyapunov_l(&TriangleState::new(29.999, 0.0, 0.0, 0.0, 0.0), &p),
            0.0
        );
    }

    #[test]
    fn lyapunov_swap_invariant() {
        let p = NetworkParams::default();
        let x = TriangleState::new(1.0, 50.0, 20.0, 3.0, 7.0);
        assert_eq!(lyapunov_l(&x, &p), lyapunov_l(&x.swap_ab(), &p));
    }

    #[test]
    fn dist_examples() {
        let (d, phi) = dist_to_cycle(&TriangleState::new(0.0, 1.0, 0.0, 0.0, 0.0));
        assert!(d < 1e-12 && phi.abs() < 1e-9, "{d} {phi}");
        let (d, phi) = dist_to_cycle(&TriangleState::new(0.0, 0.0, 0.0, 1.0, 0.0));
        assert!(d < 1e-12 && (phi - 1.0).abs() < 1e-9, "{d} {phi}");
        let (d, phi) = dist_to_cycle(&TriangleState::new(0.1, 0.9, 0.0, 0.0, 0.0));
        assert!((d - 0.2).abs() < 1e-9, "{d}");
        // the minimizing set is the flat piece [0, 1/90]
        assert!(phi <= 1.0 / 90.0 + 1e-9, "{phi}");
    }

    #[test]
    fn dist_matches_brute_force_grid() {
        let c = default_cycle();
        let n = 1_000_000;
        let probes = [
            TriangleState::new(0.1, 0.9, 0.0, 0.0, 0.0),
            TriangleState::new(0.05, 0.3, 0.1, 0.2, 0.35),
            TriangleState::new(0.0, 0.02, 0.5, 0.48, 0.0),
        ];
        for x in probes {
            let brute = (0..n)
                .map(|k| c.point_unchecked(2.0 * k as f64 / n as f64).l1(&x))
                .fold(f64::INFINITY, f64::min);
            let (d, _) = c.distance(&x);
            // the grid can only overshoot the true minimum
            assert!(d <= brute + 1e-12, "{d} vs {brute}");
            assert!(brute - d < 1e-4, "{d} vs {brute}");
        }
    }

    #[test]
    fn dist_zero_on_cycle() {
        let c = default_cycle();
        for k in 0..10_000 {
            let phi = 2.0 * k as f64 / 10_000.0;
            let (d, _) = c.distance(&c.point(phi).unwrap());
            assert!(d < 1e-9, "phi={phi} d={d}");
        }
    }

    #[test]
    fn asymmetric_cycle_conserves_mass() {
        let p = NetworkParams::new(3.0, 9.0, 11.0, 2.2, 1.8, 10.0).unwrap();
        let c = CycleTrajectory::new(&p).unwrap();
        for k in 0..500 {
            let x = c.point(c.period() * k as f64 / 500.0).unwrap();
            assert!((x.total() - 1.0).abs() < 1e-12);
        }
        let bad = NetworkParams::new(3.0, 1.0, 10.0, 2.0, 2.0, 10.0).unwrap();
        assert!(CycleTrajectory::new(&bad).is_err());
    }
}
