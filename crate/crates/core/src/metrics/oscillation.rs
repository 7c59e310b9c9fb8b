//! Period, alternation and phase-coherence diagnostics.

use serde::{Deserialize, Serialize};

use crate::model::{CycleTrajectory, NetworkParams, TriangleState};

/// Triangles farther than this from the cycle get no phase.
pub const SYNC_EXCLUSION_RADIUS: f64 = 0.5;

/// Fraction of `max |s|` used as the hysteresis band.
pub const SCHMITT_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    /// Mean spacing of successive up-crossings of `s`.
    pub period: Option<f64>,
    /// Standard deviation of the up-crossing gaps over their mean.
    pub drift: Option<f64>,
    /// Number of confirmed sign changes of `s`.
    pub alternations: usize,
    pub sync_index: Option<f64>,
    pub up_crossings: Vec<f64>,
}

/// Mass imbalance `(x_a + x_ba) - (x_b + x_ab)`.
pub fn imbalance(x: &TriangleState) -> f64 {
    (x.x_a + x.x_ba) - (x.x_b + x.x_ab)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Unknown,
    Low,
    High,
}

/// Sign changes are confirmed only once `s` leaves the band `±θ`; the
/// crossing time is the linearly interpolated last zero before that.
pub fn oscillation_report(signal: &[(f64, TriangleState)]) -> OscillationReport {
    let s: Vec<(f64, f64)> = signal.iter().map(|(t, x)| (*t, imbalance(x))).collect();
    oscillation_report_scalar(&s)
}

pub fn oscillation_report_scalar(s: &[(f64, f64)]) -> OscillationReport {
    let amp = s.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let theta = SCHMITT_FRACTION * amp;
    let mut side = Side::Unknown;
    let mut alternations = 0;
    let mut up = Vec::new();
    if amp > 0.0 {
        for i in 0..s.len() {
            let v = s[i].1;
            if v > theta {
                if side == Side::Low {
                    alternations += 1;
                    let mut j = i - 1;
                    while s[j].1 > 0.0 {
                        j -= 1;
                    }
                    let (t0, v0) = s[j];
                    let (t1, v1) = s[j + 1];
                    up.push(t0 + (0.0 - v0) / (v1 - v0) * (t1 - t0));
                }
                side = Side::High;
            } else if v < -theta {
                if side == Side::High {
                    alternations += 1;
                }
                side = Side::Low;
            }
        }
    }
    let (period, drift) = if up.len() >= 2 {
        let gaps: Vec<f64> = up.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = (up[up.len() - 1] - up[0]) / gaps.len() as f64;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
        (Some(mean), Some(var.sqrt() / mean))
    } else {
        (None, None)
    };
    OscillationReport {
        period,
        drift,
        alternations,
        sync_index: None,
        up_crossings: up,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncIndex {
    /// Mean resultant length of the phases, `1 - circular variance`.
    pub index: Option<f64>,
    pub included: usize,
    pub excluded: usize,
}

/// Phase coherence of a population of triangles relative to the cycle.
pub fn sync_index(states: &[TriangleState], params: &NetworkParams) -> SyncIndex {
    let Ok(cycle) = CycleTrajectory::new(params) else {
        return SyncIndex { index: None, included: 0, excluded: states.len() };
    };
    sync_index_on(&cycle, states)
}

pub fn sync_index_on(cycle: &CycleTrajectory, states: &[TriangleState]) -> SyncIndex {
    let omega = std::f64::consts::TAU / cycle.period();
    let (mut c, mut s) = (0.0, 0.0);
    let mut included = 0;
    for x in states {
        let (d, phase) = cycle.distance(x);
        if d <= SYNC_EXCLUSION_RADIUS {
            c += (omega * phase).cos();
            s += (omega * phase).sin();
            included += 1;
        }
    }
    let index = (included > 0).then(|| {
        let n = included as f64;
        (c.hypot(s) / n).clamp(0.0, 1.0)
    });
    SyncIndex { index, included, excluded: states.len() - included }
}
