//! The self-consistent master equation of the infinite network, evolved on
//! truncated product marginals.
//!
//! In the limit of infinitely many triangles each node of a tagged triangle
//! sees independent Poisson arrivals whose rates are the population's
//! service-completion rates, so the law stays a product of the O marginal
//! and the two priority-node marginals.

pub mod export;
pub mod integrate;
pub mod lattice;
pub mod tail;

pub use export::{read_lattice, write_lattice, write_nlmp_csv, NLMP_CSV_HEADER};
pub use integrate::{
    integrate, integrate_with, max_event_rate, step_limit, Method, NlmpConfig, NlmpSample,
    NlmpTrajectory, BOUNDARY_THRESHOLD, RENORM_TOL,
};
pub use lattice::{rates, rhs, rhs_frozen, MarginalLattice, RateVector};
pub use tail::{from_tail, rhs_tail, tail_rates, to_tail, TailCoordinates};
