//! Reachable-set bounds for coherently controlled Lindblad systems in the
//! coherence-vector (generalized Bloch) representation.
//!
//! * [`pauli`]: Pauli basis, coherence vectors and the adjoint action of unitaries.
//! * [`dynamics`]: the affine generator `ṙ = H r − R (r − r_eq)` and its exact propagator.
//! * [`diag`]: projection onto the diagonal subspace and controlled direction fields.
//! * [`over_approx`]: the purity sphere that no controlled trajectory leaves.
//! * [`under_approx`]: STLC inner bound under basis permutations.
//! * [`unitary_bound`]: what unitary control alone can achieve.
//! * [`chloroform`]: the two-spin ¹³C–¹H relaxation model and rate fitting.
//! * [`sequences`]: periodic state-preparation protocols.

pub mod chloroform;
pub mod diag;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod optim;
pub mod oracles;
pub mod over_approx;
pub mod pauli;
pub mod sequences;
pub mod under_approx;
pub mod unitary_bound;

pub use error::{Error, Result};

/// Crate version, recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
