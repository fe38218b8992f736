//! Design and simulation of probabilistic quantum machines that act on a
//! finite, known set of pure states.
//!
//! The crate covers four layers:
//!
//! * dense complex linear algebra tuned for Gram-matrix work ([`linalg`]),
//! * pure states, state sets and tensor-factor permutations ([`states`]),
//! * design of probabilistic transformation and superposition machines
//!   ([`set_transform`], [`finite_superpose`], [`overlap_superpose`]),
//! * feasibility diagnostics: pairwise efficiency bounds (in
//!   [`set_transform`]), consistency scans and phase-covariance witnesses
//!   ([`nogo`]).
//!
//! Everything is deterministic: random sampling always flows through a caller
//! supplied seed.

pub mod finite_superpose;
pub mod linalg;
pub mod nogo;
pub mod overlap_superpose;
pub mod set_transform;
pub mod states;

pub use linalg::{CMatrix, CVector};
pub use states::{PureState, StateSet};

/// Crate version, echoed into result files by downstream tooling.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
