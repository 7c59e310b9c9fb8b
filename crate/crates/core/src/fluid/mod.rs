//! Fluid dynamics of the triangle and of weighted ensembles of triangles.

pub mod closed;
pub mod ensemble;
pub mod experiments;
pub mod export;
pub mod reflection;

pub use closed::{
    nhds_step_ensemble, picard_rates, picard_solve, run_closed, run_closed_with, run_open,
    BranchPolicy, ClosedRecord, ClosedRunConfig, ClosedTrajectory, FlowRates, PicardOutcome,
    PicardSettings, StepDiagnostics, StepResult,
};
pub use ensemble::{Atom, ParticleEnsemble};
pub use reflection::{priority_node, w_map, FlowPath, WorkloadDecomposition};
