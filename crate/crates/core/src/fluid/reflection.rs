//! Skorokhod reflection for a single constant-capacity server and the
//! two-class preemptive priority node built from it.

use crate::error::{Error, Result};

/// Relative slack below zero that is attributed to rounding and clamped.
pub const CLAMP_TOL: f64 = 1e-12;

/// Cumulative flows on a uniform time grid, one column per flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    h: f64,
    columns: Vec<Vec<f64>>,
}

impl FlowPath {
    /// Checks that every column starts at 0, is non-decreasing, and that all
    /// columns share one length.
    pub fn new(h: f64, columns: Vec<Vec<f64>>) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid(format!("grid step must be positive, got {h}")));
        }
        let len = columns.first().map_or(0, Vec::len);
        for (c, col) in columns.iter().enumerate() {
            if col.len() != len || len == 0 {
                return Err(Error::invalid("flow columns must be non-empty and of equal length"));
            }
            if col[0] != 0.0 {
                return Err(Error::invalid(format!("flow column {c} must start at 0")));
            }
            check_nondecreasing(col)?;
        }
        Ok(Self { h, columns })
    }

    /// Columns with constant rates over `steps` grid intervals.
    pub fn constant_rates(h: f64, steps: usize, rates: &[f64]) -> Result<Self> {
        let columns = rates
            .iter()
            .map(|r| (0..=steps).map(|k| r * k as f64 * h).collect())
            .collect();
        Self::new(h, columns)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Virtual level `V` and unused capacity `U` of a reflected path.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadDecomposition {
    pub virtual_level: Vec<f64>,
    pub unused: Vec<f64>,
}

fn check_nondecreasing(y: &[f64]) -> Result<()> {
    for (k, w) in y.windows(2).enumerate() {
        if !(w[1] >= w[0]) || !w[1].is_finite() {
            return Err(Error::invalid(format!(
                "cumulative flow decreases at grid index {}",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Reflection of `x0 + y - gamma t` at zero on the grid of step `h`.
///
/// Returns the level path together with `(V, U)`. The net outflow up to grid
/// point `k` is `x0 + y[k] - level[k]`.
pub fn w_map(gamma: f64, x0: f64, h: f64, y: &[f64]) -> Result<(Vec<f64>, WorkloadDecomposition)> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("service rate must be positive, got {gamma}")));
    }
    if !(x0.is_finite() && x0 >= 0.0) {
        return Err(Error::invalid(format!("initial level must be non-negative, got {x0}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid(format!("grid step must be positive, got {h}")));
    }
    check_nondecreasing(y)?;
    let mut v = Vec::with_capacity(y.len());
    let mut u = Vec::with_capacity(y.len());
    let mut level = Vec::with_capacity(y.len());
    let mut running_min = f64::INFINITY;
    for (k, yk) in y.iter().enumerate() {
        let vk = x0 + yk - gamma * k as f64 * h;
        running_min = running_min.min(vk);
        let uk = (-running_min).max(0.0);
        v.push(vk);
        u.push(uk);
        level.push((vk + uk).max(0.0));
    }
    Ok((
        level,
        WorkloadDecomposition {
            virtual_level: v,
            unused: u,
        },
    ))
}

/// Levels of a preemptive priority node: the heavy class is reflected on its
/// own, the light class is read off the combined workload measured in
/// light-service units.
///
/// `x0` is `(heavy, light)`; returns `(heavy levels, light levels)`.
pub fn priority_node(
    gamma_heavy: f64,
    gamma_light: f64,
    x0: (f64, f64),
    h: f64,
    y_heavy: &[f64],
    y_light: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if y_heavy.len() != y_light.len() {
        return Err(Error::invalid("heavy and light flows must share the grid"));
    }
    check_nondecreasing(y_light)?;
    let (heavy, _) = w_map(gamma_heavy, x0.0, h, y_heavy)?;
    let r = gamma_light / gamma_heavy;
    let combined_in: Vec<f64> = y_heavy
        .iter()
        .zip(y_light)
        .map(|(yh, yl)| r * yh + yl)
        .collect();
    let (combined, _) = w_map(gamma_light, r * x0.0 + x0.1, h, &combined_in)?;
    let mut light = Vec::with_capacity(combined.len());
    for (k, (c, hv)) in combined.iter().zip(&heavy).enumerate() {
        let v = c - r * hv;
        light.push(clamp_level(v, c.max(1.0), "light level", k as f64 * h)?);
    }
    Ok((heavy, light))
}

fn clamp_level(v: f64, scale: f64, what: &str, time: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -CLAMP_TOL * scale {
        Ok(0.0)
    } else {
        Err(Error::NumericalFailure {
            what: format!("{what} went negative"),
            time,
            residual: v,
        })
    }
}

/// One step of length `h` of a single server with constant inflow rate `y`.
/// Returns the new level and the average outflow rate over the step.
pub fn reflect_step(gamma: f64, x: f64, y: f64, h: f64) -> (f64, f64) {
    let v = x + (y - gamma) * h;
    if v > 0.0 {
        (v, gamma)
    } else {
        (0.0, x / h + y)
    }
}

/// Result of one step of a priority node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityStep {
    pub heavy: f64,
    pub light: f64,
    pub z_heavy: f64,
    pub z_light: f64,
}

/// One step of a priority node with constant inflow rates.
pub fn priority_step(
    gamma_heavy: f64,
    gamma_light: f64,
    heavy: f64,
    light: f64,
    y_heavy: f64,
    y_light: f64,
    h: f64,
) -> Result<PriorityStep> {
    let (heavy1, z_heavy) = reflect_step(gamma_heavy, heavy, y_heavy, h);
    let r = gamma_light / gamma_heavy;
    let comb = r * heavy + light;
    let (comb1, z_comb) = reflect_step(gamma_light, comb, r * y_heavy + y_light, h);
    let light1 = clamp_level(comb1 - r * heavy1, comb.max(1.0), "light level", 0.0)?;
    let z_light = clamp_level(z_comb - r * z_heavy, gamma_light, "light outflow", 0.0)?;
    Ok(PriorityStep {
        heavy: heavy1,
        light: light1,
        z_heavy,
        z_light,
    })
}
