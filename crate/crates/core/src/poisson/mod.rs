//! Galerkin solver for the Dirichlet Poisson problem on RM spline spaces,
//! with exact-error estimation and maximum-strategy marking.

mod adaptive;
mod discretization;
mod estimate;
mod problem;
mod solve;

pub use adaptive::{adaptive_solve, adaptive_solve_from, solve, AdaptiveReport, IterationRecord, Solution};
pub use discretization::{cell_rule, gauss_rule, DiscreteSystem, Discretization};
pub use estimate::{global_l2, l2_error_per_cell, linf_estimate, mark, LINF_SAMPLES};
pub use problem::{Field, PoissonProblem};
pub use solve::{dense_cholesky, pcg, solve_system, solve_system_with, CG_TOLERANCE, DIRECT_LIMIT};

/// Stiffness, load and boundary data of `problem` on `space`.
pub fn assemble(space: &crate::rm::RMSpace, problem: &PoissonProblem) -> crate::Result<DiscreteSystem> {
    Discretization::new(space)?.assemble(problem)
}
