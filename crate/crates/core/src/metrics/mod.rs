//! Distances, moments and oscillation diagnostics.

pub mod krov;
pub mod moments;
pub mod oscillation;
pub mod report;

pub use krov::{krov_atomic, krov_atomic_with_capacity, krov_lattice_to_delta, krov_to_delta, marginal_w1, KROV_CAPACITY};
pub use moments::{
    exp_moment, exp_moment_ensemble, exp_moment_lattice, moment_bound_check, Measure,
    MomentBoundReport, MomentConfig,
};
pub use oscillation::{
    imbalance, oscillation_report, oscillation_report_scalar, sync_index, sync_index_on,
    OscillationReport, SyncIndex,
};
pub use report::MetricsReport;
