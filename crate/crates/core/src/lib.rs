//! Numerical weak-KAM theory for Tonelli Hamiltonians on the torus.
//!
//! The crate computes Mather's α-function, critical subsolutions, Aubry sets,
//! rotation vectors and the β-function on T¹ and T², integrates Hamiltonian
//! flows symplectically, and runs numerical checks tying integrals of motion
//! to Aubry–Mather sets (invariance, involution, Lagrangian graphs). The
//! generalized rigid body on SO(3) is provided as a weakly integrable example.

pub mod catalog;
pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod integrability;
pub mod lie;
pub mod sampling;
pub mod system;
pub mod torus;
pub mod weakkam;

pub use error::{Error, Result};
pub use system::{CohomologyClass, Observable, PhasePoint, TonelliSystem};
