use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poisson::discretization::DiscreteSystem;

/// Largest free system solved by dense Cholesky; larger ones go to PCG.
pub const DIRECT_LIMIT: usize = 3000;
pub const CG_TOLERANCE: f64 = 1e-10;

pub fn solve_system(sys: &DiscreteSystem) -> Result<Vec<f64>> {
    solve_system_with(sys, DIRECT_LIMIT)
}

/// Eliminates the Dirichlet dofs, solves for the rest and returns the full
/// coefficient vector.
pub fn solve_system_with(sys: &DiscreteSystem, direct_limit: usize) -> Result<Vec<f64>> {
    let n = sys.load.len();
    let mut full = vec![0.0; n];
    let mut free_index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        match sys.dirichlet.get(&i) {
            Some(&v) => full[i] = v,
            None => {
                free_index[i] = free.len();
                free.push(i);
            }
        }
    }
    if free.is_empty() {
        return Ok(full);
    }

    let k = &sys.stiffness;
    let mut offsets = Vec::with_capacity(free.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = Vec::with_capacity(free.len());
    offsets.push(0);
    for &i in &free {
        let row = k.row(i);
        let mut r = sys.load[i];
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            if free_index[j] == usize::MAX {
                r -= v * full[j];
            } else {
                cols.push(free_index[j]);
                vals.push(v);
            }
        }
        rhs.push(r);
        offsets.push(cols.len());
    }
    let reduced = CsrMatrix::try_from_csr_data(free.len(), free.len(), offsets, cols, vals)
        .expect("reduced pattern is valid CSR");

    let x = if free.len() <= direct_limit { dense_cholesky(&reduced, &rhs)? } else { pcg(&reduced, &rhs, CG_TOLERANCE)? };
    for (&i, v) in free.iter().zip(x) {
        full[i] = v;
    }
    Ok(full)
}

/// Dense Cholesky solve of an SPD matrix; fails on a non-positive or
/// numerically vanishing pivot.
pub fn dense_cholesky(a: &CsrMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for (i, j, &v) in a.triplet_iter() {
        dense[(i, j)] = v;
    }
    let scale = dense.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chol = dense.cholesky().ok_or(Error::SingularSystem)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if !(min_pivot > 1e-13 * scale) {
        return Err(Error::SingularSystem);
    }
    Ok(chol.solve(&DVector::from_column_slice(rhs)).iter().copied().collect())
}

fn matvec(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    y.par_iter_mut().enumerate().for_each(|(i, yi)| {
        let range = offsets[i]..offsets[i + 1];
        *yi = cols[range.clone()].iter().zip(&vals[range]).map(|(&j, v)| v * x[j]).sum();
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients to relative residual `tol`,
/// at most `10 n` iterations.
pub fn pcg(a: &CsrMatrix<f64>, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let mut diag = vec![0.0; n];
    for (i, j, &v) in a.triplet_iter() {
        if i == j {
            diag[i] = v;
        }
    }
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::SingularSystem);
    }
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 10 * n;
    for _ in 0..max_iter {
        matvec(a, &p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::SingularSystem);
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: dot(&r, &r).sqrt() / bnorm })
}
