//! Positive ground states of the coupled steady-state Schrödinger system
//!
//! ```text
//! -omega u + sigma1 lap u + (|u|^(p-1) + lambda v^2) u = 0
//! -omega v + sigma2 lap v + (|v|^(p-1) + lambda u^2) v = 0
//! ```
//!
//! computed by minimizing the energy `I` over the Nehari manifold on a
//! truncated Dirichlet box, together with the checks that the variational
//! identities hold on the discrete problem.

pub mod app;
pub mod config;
pub mod energy;
pub mod error;
pub mod evolve;
pub mod exact;
pub mod grid;
pub mod io;
pub mod minimize;
pub mod nehari;
pub mod verify;

pub use energy::{FunctionalBreakdown, PhysParams, StatePair};
pub use error::{NlsError, Result};
pub use grid::{Field, GridSpec};
pub use minimize::{SolveConfig, SolveReport};
