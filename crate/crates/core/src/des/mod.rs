//! Exact event-driven simulation of the coupled triangles.

pub mod export;
pub mod sim;
mod tree;

pub use sim::{
    active_rates, empirical_measure, euler_rescale, run, run_replicas, scale_to_counts,
    triangle_rates, DesTrajectory, EventKind, EventRecord, InitSpec, MfState, SimConfig,
    Simulator,
};
