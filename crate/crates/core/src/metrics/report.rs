//! JSON summary of the oscillation and moment diagnostics.

use serde::{Deserialize, Serialize};

use super::oscillation::OscillationReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub period: Option<f64>,
    pub drift: Option<f64>,
    pub alternations: usize,
    pub sync_index: Option<f64>,
    /// `[t, distance]` pairs.
    pub krov_series: Vec<(f64, f64)>,
    /// `[t, moment]` pairs.
    pub exp_moment_series: Vec<(f64, f64)>,
}

impl MetricsReport {
    pub fn new(
        osc: &OscillationReport,
        krov_series: Vec<(f64, f64)>,
        exp_moment_series: Vec<(f64, f64)>,
    ) -> Self {
        Self {
            period: osc.period,
            drift: osc.drift,
            alternations: osc.alternations,
            sync_index: osc.sync_index,
            krov_series,
            exp_moment_series,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_keys() {
        let osc = OscillationReport {
            period: Some(2.0),
            drift: Some(0.0),
            alternations: 4,
            sync_index: None,
            up_crossings: vec![],
        };
        let r = MetricsReport::new(&osc, vec![(0.0, 0.1)], vec![(0.0, 1.0)]);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        for k in ["period", "drift", "alternations", "sync_index", "krov_series", "exp_moment_series"] {
            assert!(keys.contains(&k.to_string()));
        }
        assert_eq!(v["krov_series"][0][1], 0.1);
    }
}
