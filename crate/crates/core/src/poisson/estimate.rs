use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::Cell;
use crate::poisson::discretization::{cell_rule, gauss_rule, Discretization};
use crate::poisson::problem::Field;

/// Samples per direction for the discrete maximum-norm estimate.
pub const LINF_SAMPLES: usize = 4;

/// `‖u_h - u‖` on every cell, Gauss rule with `p + 3` points per direction.
pub fn l2_error_per_cell(disc: &Discretization, coeffs: &[f64], exact: &Field) -> Vec<(Cell, f64)> {
    let rule = gauss_rule(disc.degree() + 3);
    (0..disc.cells().len())
        .into_par_iter()
        .map(|c| {
            let mut vals = Vec::new();
            let mut grads = Vec::new();
            let dofs = disc.local_dofs(c);
            let mut sum = 0.0;
            for (x, y, w) in cell_rule(&rule, disc.cell_bounds(c)) {
                disc.local_basis(c, x, y, &mut vals, &mut grads);
                let uh: f64 = dofs.iter().zip(&vals).map(|(&i, v)| coeffs[i] * v).sum();
                sum += w * (uh - exact(x, y)).powi(2);
            }
            (disc.cells()[c], sum.sqrt())
        })
        .collect()
}

pub fn global_l2(errors: &[(Cell, f64)]) -> f64 {
    errors.iter().map(|(_, e)| e * e).sum::<f64>().sqrt()
}

/// Maximum of `|u_h - u|` over a uniform grid of cell-interior samples.
pub fn linf_estimate(disc: &Discretization, coeffs: &[f64], exact: &Field) -> f64 {
    let offsets: Vec<f64> = (0..LINF_SAMPLES).map(|i| (i as f64 + 0.5) / LINF_SAMPLES as f64).collect();
    (0..disc.cells().len())
        .into_par_iter()
        .map(|c| {
            let [x0, y0, x1, y1] = disc.cell_bounds(c);
            let mut worst = 0.0f64;
            for &u in &offsets {
                for &v in &offsets {
                    let (x, y) = (x0 + u * (x1 - x0), y0 + v * (y1 - y0));
                    worst = worst.max((disc.evaluate_in(coeffs, c, x, y) - exact(x, y)).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Cells whose error is at least `theta` times the largest one.
pub fn mark(errors: &[(Cell, f64)], theta: f64) -> Result<Vec<Cell>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidTheta(theta));
    }
    if errors.is_empty() {
        return Err(Error::EmptyErrorMap);
    }
    let max = errors.iter().map(|(_, e)| *e).fold(f64::NEG_INFINITY, f64::max);
    let threshold = theta * max;
    Ok(errors.iter().filter(|(_, e)| *e >= threshold).map(|(c, _)| *c).collect())
}
