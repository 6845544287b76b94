//! Simulation and analytics for heralded loading of collective excitations
//! into atomic ensembles coupled to a one-dimensional waveguide.
//!
//! The crate is organised bottom-up:
//!
//! * [`statespace`] parameter records, labeled few-state bases and the
//!   dark/superradiant decompositions of each protocol step.
//! * [`dynamics`] exact propagation of non-hermitian effective Hamiltonians,
//!   quantum-jump integrals and a product-space oracle for validation.
//! * [`zeno`] the step Hamiltonians and every closed-form figure of merit.
//! * [`merging`] two-mode Fock-space beamsplitters and the tree-merging planner.
//! * [`metrology`] NOON, Yurke and Holland-Burnett probes and their phase
//!   sensitivity.
//! * [`orchestrator`] full protocol runs, Monte Carlo campaigns and the
//!   two-mode heralded addition.
//!
//! Rates are expressed in units of the free-space decay rate Γ* unless a
//! record says otherwise.

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod merging;
pub mod metrology;
pub mod optimize;
pub mod orchestrator;
pub mod statespace;
pub mod zeno;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
