use std::fmt::Write;

use crate::error::{Error, Result};
use crate::mesh::{Cell, LRMesh};
use crate::poisson::discretization::Discretization;
use crate::poisson::estimate::{global_l2, l2_error_per_cell, linf_estimate, mark};
use crate::poisson::problem::PoissonProblem;
use crate::poisson::solve::solve_system;
use crate::rm::RMSpace;

/// Discrete solution on a space.
#[derive(Debug, Clone)]
pub struct Solution {
    pub disc: Discretization,
    pub coeffs: Vec<f64>,
}

impl Solution {
    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        self.disc.evaluate(&self.coeffs, x, y)
    }
}

pub fn solve(space: &RMSpace, problem: &PoissonProblem) -> Result<Solution> {
    let disc = Discretization::new(space)?;
    let sys = disc.assemble(problem)?;
    let coeffs = solve_system(&sys)?;
    Ok(Solution { disc, coeffs })
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub dof: usize,
    pub l2_error: f64,
    pub linf_error: f64,
    pub max_cell_error: f64,
    pub n_marked: usize,
    pub n_cells: usize,
    pub marked: Vec<Cell>,
    pub mesh: LRMesh,
}

#[derive(Debug, Clone, Default)]
pub struct AdaptiveReport {
    pub records: Vec<IterationRecord>,
}

impl AdaptiveReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,dof,l2_error,linf_error,max_cell_error,n_marked,n_cells\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.12e},{},{}",
                r.iter, r.dof, r.l2_error, r.linf_error, r.max_cell_error, r.n_marked, r.n_cells
            )
            .expect("writing to a String");
        }
        out
    }
}

/// SOLVE, ESTIMATE, MARK, REFINE from an `m0 x m0` tensor skeleton; the last
/// iteration only solves and estimates.
pub fn adaptive_solve(problem: &PoissonProblem, s: u32, m0: usize, iters: usize, theta: f64) -> Result<AdaptiveReport> {
    let space = RMSpace::tensor(m0, m0, problem.domain, s)?;
    adaptive_solve_from(space, problem, iters, theta)
}

pub fn adaptive_solve_from(mut space: RMSpace, problem: &PoissonProblem, iters: usize, theta: f64) -> Result<AdaptiveReport> {
    let exact = problem.u_exact.clone().ok_or(Error::MissingExactSolution)?;
    let mut report = AdaptiveReport::default();
    for iter in 0..iters {
        let sol = solve(&space, problem)?;
        let errors = l2_error_per_cell(&sol.disc, &sol.coeffs, &exact);
        let marked = if iter + 1 < iters { mark(&errors, theta)? } else { Vec::new() };
        report.records.push(IterationRecord {
            iter,
            dof: sol.disc.n_dofs(),
            l2_error: global_l2(&errors),
            linf_error: linf_estimate(&sol.disc, &sol.coeffs, &exact),
            max_cell_error: errors.iter().map(|(_, e)| *e).fold(0.0, f64::max),
            n_marked: marked.len(),
            n_cells: errors.len(),
            marked: marked.clone(),
            mesh: space.mesh().clone(),
        });
        if !marked.is_empty() {
            space = space.rm_refine_marked(&marked)?;
        }
    }
    Ok(report)
}
