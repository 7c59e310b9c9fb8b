//! Simulation and numerical-analysis toolkit for a closed mean-field network
//! of three-node priority queueing triangles.
//!
//! * [`model`]: parameters, state conventions, the periodic orbit and the
//!   workload Lyapunov functional.
//! * [`fluid`]: reflection maps, priority nodes and the closed fluid system
//!   for single states and weighted ensembles.
//! * [`des`]: exact event-driven simulation of `M` coupled triangles.
//! * [`nlmp`]: the self-consistent master equation on truncated marginals.
//! * [`metrics`]: transport distances, exponential moments and oscillation
//!   diagnostics.

pub mod des;
pub mod error;
pub mod fluid;
pub mod format;
pub mod metrics;
pub mod model;
pub mod nlmp;
pub mod studies;

pub use error::{Error, Result};
pub use fluid::ensemble::ParticleEnsemble;
pub use model::{CycleTrajectory, NetworkParams, TriangleState};
