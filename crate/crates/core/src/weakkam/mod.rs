//! Discrete weak-KAM solver on T¹ and T².
//!
//! Time is discretized in steps of length h and positions on the grid of
//! spacing 1/N; the Lax–Oleinik operator becomes a min-plus matrix over grid
//! nodes, whose additive eigenvalue is −h·α(c) and whose eigenvectors are
//! critical subsolutions.

pub mod grid;
pub mod operator;
pub mod oracle;
pub mod solver;
pub mod tables;

pub use grid::{DiscreteActionParams, GridFunction, Quadrature};
pub use operator::{one_step_cost, LaxOleinik};
pub use solver::{
    aubry_estimate, energy_level_check, rotation_vector, solve_weak_kam, solve_weak_kam_from, solve_with_operator,
    subcritical_check, value_iteration, AubryEstimate, RotationEstimate, SolverOptions, ValueIteration,
    WeakKamResult,
};
pub use tables::{alpha_table, beta_from_alpha, parse_range, AlphaRow, AlphaTable, BetaRow, BetaTable};
