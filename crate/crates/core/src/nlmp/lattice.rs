//! Truncated marginals of the self-consistent master equation and its
//! right-hand side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkParams;

/// Marginals `μ_O` on `{0..x_max}` and `μ_Ā`, `μ_B̄` on `{0..x_max}²`.
///
/// Storage is one flat vector `[μ_O | μ_Ā | μ_B̄]`; the 2D blocks are
/// row-major with the light class as row index: `μ_Ā[n_a][n_ba]` and
/// `μ_B̄[n_b][n_ab]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalLattice {
    x_max: usize,
    n: u32,
    data: Vec<f64>,
}

/// Service-completion rates implied by a lattice state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateVector {
    pub lambda_o: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_ab: f64,
    pub lambda_ba: f64,
}

impl RateVector {
    /// Rates in class order `(O, A, BA, B, AB)`.
    pub fn to_canonical(&self) -> [f64; 5] {
        [
            self.lambda_o,
            self.lambda_a,
            self.lambda_ba,
            self.lambda_b,
            self.lambda_ab,
        ]
    }
}

/// Which marginal a block of the flat vector holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    O,
    ABar,
    BBar,
}

impl MarginalLattice {
    pub fn new(
        x_max: usize,
        n: u32,
        mu_o: Vec<f64>,
        mu_abar: Vec<f64>,
        mu_bbar: Vec<f64>,
    ) -> Result<Self> {
        if x_max == 0 {
            return Err(Error::invalid("x_max must be at least 1"));
        }
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        let d = x_max + 1;
        if mu_o.len() != d || mu_abar.len() != d * d || mu_bbar.len() != d * d {
            return Err(Error::invalid(format!(
                "marginal shapes must be {d}, {d}x{d}, {d}x{d}"
            )));
        }
        let mut data = mu_o;
        data.extend(mu_abar);
        data.extend(mu_bbar);
        let s = Self { x_max, n, data };
        s.validate(1e-9)?;
        Ok(s)
    }

    /// Product of point masses at the given counts.
    pub fn product_delta(x_max: usize, n: u32, counts: [u32; 5]) -> Result<Self> {
        let d = x_max + 1;
        if counts.iter().any(|c| *c as usize > x_max) {
            return Err(Error::invalid(format!("counts {counts:?} exceed x_max = {x_max}")));
        }
        let [o, a, ba, b, ab] = counts.map(|c| c as usize);
        let mut mu_o = vec![0.0; d];
        mu_o[o] = 1.0;
        let mut mu_abar = vec![0.0; d * d];
        mu_abar[a * d + ba] = 1.0;
        let mut mu_bbar = vec![0.0; d * d];
        mu_bbar[b * d + ab] = 1.0;
        Self::new(x_max, n, mu_o, mu_abar, mu_bbar)
    }

    pub(crate) fn from_raw(x_max: usize, n: u32, data: Vec<f64>) -> Self {
        Self { x_max, n, data }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        for (name, block) in [
            ("mu_o", self.mu_o()),
            ("mu_abar", self.mu_abar()),
            ("mu_bbar", self.mu_bbar()),
        ] {
            if block.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid(format!("{name} has negative or non-finite entries")));
            }
            let s: f64 = block.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::invalid(format!("{name} sums to {s}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn x_max(&self) -> usize {
        self.x_max
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.x_max + 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn range(&self, b: Block) -> std::ops::Range<usize> {
        let d = self.dim();
        match b {
            Block::O => 0..d,
            Block::ABar => d..d + d * d,
            Block::BBar => d + d * d..d + 2 * d * d,
        }
    }

    pub fn mu_o(&self) -> &[f64] {
        &self.data[self.range(Block::O)]
    }

    pub fn mu_abar(&self) -> &[f64] {
        &self.data[self.range(Block::ABar)]
    }

    pub fn mu_bbar(&self) -> &[f64] {
        &self.data[self.range(Block::BBar)]
    }

    /// Distribution of the count of one class (`0..5` in class order).
    pub fn class_marginal(&self, class: usize) -> Vec<f64> {
        let d = self.dim();
        let rows = |m: &[f64]| -> Vec<f64> { (0..d).map(|k| m[k * d..(k + 1) * d].iter().sum()).collect() };
        let cols = |m: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; d];
            for k in 0..d {
                for (l, o) in out.iter_mut().enumerate() {
                    *o += m[k * d + l];
                }
            }
            out
        };
        match class {
            0 => self.mu_o().to_vec(),
            1 => rows(self.mu_abar()),
            2 => cols(self.mu_abar()),
            3 => rows(self.mu_bbar()),
            4 => cols(self.mu_bbar()),
            _ => panic!("class index {class} out of range"),
        }
    }

    /// Expected counts `E[n_i]` in class order.
    pub fn means(&self) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .class_marginal(i)
                .iter()
                .enumerate()
                .map(|(k, p)| k as f64 * p)
                .sum();
        }
        out
    }

    /// Expected counts divided by `n`.
    pub fn scaled_means(&self) -> [f64; 5] {
        let n = self.n as f64;
        self.means().map(|v| v / n)
    }

    /// Largest mass any marginal puts on cells touching `x_max`.
    pub fn boundary_mass(&self) -> f64 {
        let d = self.dim();
        let xm = self.x_max;
        let edge = |m: &[f64]| -> f64 {
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    if k == xm || l == xm {
                        s += m[k * d + l];
                    }
                }
            }
            s
        };
        self.mu_o()[xm]
            .max(edge(self.mu_abar()))
            .max(edge(self.mu_bbar()))
    }
}

/// Rates from the indicator structure of the priority service.
pub fn rates(mu: &MarginalLattice, params: &NetworkParams) -> RateVector {
    let d = mu.dim();
    let busy_o: f64 = mu.mu_o()[1..].iter().sum();
    let node = |m: &[f64]| -> (f64, f64) {
        // (P(light > 0, heavy = 0), P(heavy > 0))
        let mut light_only = 0.0;
        let mut heavy = 0.0;
        for k in 0..d {
            let row = &m[k * d..(k + 1) * d];
            if k > 0 {
                light_only += row[0];
            }
            heavy += row[1..].iter().sum::<f64>();
        }
        (light_only, heavy)
    };
    let (a_only, ba_busy) = node(mu.mu_abar());
    let (b_only, ab_busy) = node(mu.mu_bbar());
    let clamp = |p: f64, g: f64| (g * p).clamp(0.0, g);
    RateVector {
        lambda_o: clamp(busy_o, params.gamma_o),
        lambda_a: clamp(a_only, params.gamma_a),
        lambda_ba: clamp(ba_busy, params.gamma_ba),
        lambda_b: clamp(b_only, params.gamma_b),
        lambda_ab: clamp(ab_busy, params.gamma_ab),
    }
}

/// Birth-death part for `μ_O`: arrivals at `alpha`, service at `gamma`.
fn rhs_1d(mu: &[f64], out: &mut [f64], alpha: f64, gamma: f64) {
    let xm = mu.len() - 1;
    for k in 0..=xm {
        let v = mu[k];
        let mut acc = 0.0;
        if k >= 1 {
            acc += alpha * mu[k - 1] - gamma * v;
        }
        if k < xm {
            acc += gamma * mu[k + 1] - alpha * v;
        }
        out[k] = acc;
    }
}

/// Priority node: light arrivals at `alpha`, heavy arrivals at `beta`;
/// the light class is served only when the heavy queue is empty.
fn rhs_2d(mu: &[f64], out: &mut [f64], d: usize, alpha: f64, beta: f64, g_light: f64, g_heavy: f64) {
    let xm = d - 1;
    for k in 0..d {
        for l in 0..d {
            let i = k * d + l;
            let v = mu[i];
            let mut acc = 0.0;
            if k >= 1 {
                acc += alpha * mu[i - d];
            }
            if k < xm {
                acc -= alpha * v;
            }
            if l >= 1 {
                acc += beta * mu[i - 1] - g_heavy * v;
            }
            if l < xm {
                acc += g_heavy * mu[i + 1] - beta * v;
            }
            if l == 0 {
                if k < xm {
                    acc += g_light * mu[i + d];
                }
                if k >= 1 {
                    acc -= g_light * v;
                }
            }
            out[i] = acc;
        }
    }
}

/// Writes the time derivative of `mu` into `out` (same layout) with the
/// given rates.
pub(crate) fn rhs_with_rates(
    mu: &MarginalLattice,
    r: &RateVector,
    params: &NetworkParams,
    out: &mut [f64],
) {
    let d = mu.dim();
    let ro = mu.range(Block::O);
    let ra = mu.range(Block::ABar);
    let rb = mu.range(Block::BBar);
    rhs_1d(mu.mu_o(), &mut out[ro], r.lambda_ab + r.lambda_ba, params.gamma_o);
    rhs_2d(
        mu.mu_abar(),
        &mut out[ra],
        d,
        r.lambda_o / 2.0,
        r.lambda_b,
        params.gamma_a,
        params.gamma_ba,
    );
    rhs_2d(
        mu.mu_bbar(),
        &mut out[rb],
        d,
        r.lambda_o / 2.0,
        r.lambda_a,
        params.gamma_b,
        params.gamma_ab,
    );
}

/// Time derivative with externally fixed rates; the equation is then linear
/// in `mu`.
pub fn rhs_frozen(mu: &MarginalLattice, rates: &RateVector, params: &NetworkParams) -> MarginalLattice {
    let mut out = vec![0.0; mu.data().len()];
    rhs_with_rates(mu, rates, params, &mut out);
    MarginalLattice::from_raw(mu.x_max(), mu.n(), out)
}

/// Time derivative of the marginals, with rates taken from `mu` itself.
pub fn rhs(mu: &MarginalLattice, params: &NetworkParams) -> MarginalLattice {
    let r = rates(mu, params);
    let mut out = vec![0.0; mu.data().len()];
    rhs_with_rates(mu, &r, params, &mut out);
    MarginalLattice::from_raw(mu.x_max(), mu.n(), out)
}
