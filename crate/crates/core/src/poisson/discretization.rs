use std::collections::BTreeMap;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Cell, Direction};
use crate::param::to_f64;
use crate::poisson::problem::{Field, PoissonProblem};
use crate::rm::{lifted_knots, RMSpace};
use crate::spline::bspline_eval;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_rule(points: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(points).expect("at least one quadrature point");
    GaussLegendre::new(n).as_node_weight_pairs().to_vec()
}

/// Tensor rule mapped onto `[x0, x1] x [y0, y1]`.
pub fn cell_rule(rule: &[(f64, f64)], b: [f64; 4]) -> Vec<(f64, f64, f64)> {
    let (hx, hy) = (0.5 * (b[2] - b[0]), 0.5 * (b[3] - b[1]));
    let (cx, cy) = (0.5 * (b[2] + b[0]), 0.5 * (b[3] + b[1]));
    let mut out = Vec::with_capacity(rule.len() * rule.len());
    for &(u, wu) in rule {
        for &(v, wv) in rule {
            out.push((cx + hx * u, cy + hy * v, wu * wv * hx * hy));
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Window {
    knots: Vec<f64>,
    closed_right: bool,
}

impl Window {
    fn new(knots: Vec<f64>) -> Window {
        let p = knots.len() - 2;
        let last = knots[p + 1];
        let closed_right = knots.iter().filter(|&&k| k == last).count() == p + 1;
        Window { knots, closed_right }
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        bspline_eval(&self.knots, x, self.closed_right)
    }

    fn starts_full(&self, at: f64) -> bool {
        self.knots[..self.knots.len() - 1].iter().all(|&k| k == at)
    }

    fn ends_full(&self, at: f64) -> bool {
        self.knots[1..].iter().all(|&k| k == at)
    }
}

/// Stiffness, load and fixed boundary coefficients.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub stiffness: CsrMatrix<f64>,
    pub load: Vec<f64>,
    pub dirichlet: BTreeMap<usize, f64>,
}

/// Index bookkeeping for the RM basis of a space: dof `k (s+1)^2 + a (s+1) + b`
/// is member `(a, b)` of the system of skeleton function `k`.
#[derive(Debug, Clone)]
pub struct Discretization {
    s: usize,
    degree: usize,
    domain: [f64; 4],
    cells: Vec<Cell>,
    bounds: Vec<[f64; 4]>,
    covering: Vec<Vec<usize>>,
    windows: Vec<[Vec<Window>; 2]>,
    neighbors: Vec<Vec<usize>>,
}

impl Discretization {
    pub fn new(space: &RMSpace) -> Result<Discretization> {
        let s = space.s() as usize;
        let d = space.domain();
        let domain = [to_f64(d.x0), to_f64(d.y0), to_f64(d.x1), to_f64(d.y1)];
        let mut cells = space.mesh().cells();
        cells.sort_by(|a, b| (a.x0, a.y0).cmp(&(b.x0, b.y0)));
        let skeleton = space.skeleton().to_vec();

        let mut covering = vec![Vec::new(); cells.len()];
        for (k, b) in skeleton.iter().enumerate() {
            let supp = b.support();
            let start = cells.partition_point(|c| c.x0 < supp.x0);
            let end = cells.partition_point(|c| c.x0 < supp.x1);
            for (c, cell) in cells.iter().enumerate().take(end).skip(start) {
                if supp.contains_rect(cell) {
                    covering[c].push(k);
                }
            }
        }
        let bad = covering.iter().filter(|c| c.len() != 4).count();
        if bad > 0 {
            return Err(Error::Overloaded(bad));
        }

        let width = 2 * s + 3;
        let windows = skeleton
            .iter()
            .map(|b| {
                [Direction::Vertical, Direction::Horizontal].map(|dir| {
                    let lifted: Vec<f64> = lifted_knots(b.knots_for(dir), s as u32).into_iter().map(to_f64).collect();
                    lifted.windows(width).map(|w| Window::new(w.to_vec())).collect()
                })
            })
            .collect();

        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); skeleton.len()];
        for cov in &covering {
            for &k in cov {
                neighbors[k].extend_from_slice(cov);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }

        let bounds = cells.iter().map(|c| [to_f64(c.x0), to_f64(c.y0), to_f64(c.x1), to_f64(c.y1)]).collect();
        Ok(Discretization { s, degree: 2 * s + 1, domain, cells, bounds, covering, windows, neighbors })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.windows.len() * self.block()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell_bounds(&self, c: usize) -> [f64; 4] {
        self.bounds[c]
    }

    fn block(&self) -> usize {
        (self.s + 1) * (self.s + 1)
    }

    /// Dofs active on cell `c`, in the order used by [`Self::local_basis`].
    pub fn local_dofs(&self, c: usize) -> Vec<usize> {
        let n = self.block();
        self.covering[c].iter().flat_map(|&k| (0..n).map(move |i| k * n + i)).collect()
    }

    /// Values and gradients of the local basis of cell `c` at `(x, y)`.
    pub fn local_basis(&self, c: usize, x: f64, y: f64, vals: &mut Vec<f64>, grads: &mut Vec<[f64; 2]>) {
        vals.clear();
        grads.clear();
        for &k in &self.covering[c] {
            let [wx, wy] = &self.windows[k];
            let fy: Vec<(f64, f64)> = wy.iter().map(|w| w.eval(y)).collect();
            for w in wx {
                let (vx, dx) = w.eval(x);
                for &(vy, dy) in &fy {
                    vals.push(vx * vy);
                    grads.push([dx * vy, vx * dy]);
                }
            }
        }
    }

    /// Cell holding `(x, y)` under the half-open convention.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let [dx0, dy0, dx1, dy1] = self.domain;
        if !(dx0..=dx1).contains(&x) || !(dy0..=dy1).contains(&y) {
            return None;
        }
        self.bounds.iter().position(|b| {
            let in_x = b[0] <= x && (x < b[2] || (x == b[2] && b[2] == dx1));
            let in_y = b[1] <= y && (y < b[3] || (y == b[3] && b[3] == dy1));
            in_x && in_y
        })
    }

    pub fn evaluate_in(&self, coeffs: &[f64], c: usize, x: f64, y: f64) -> f64 {
        let mut vals = Vec::new();
        let mut grads = Vec::new();
        self.local_basis(c, x, y, &mut vals, &mut grads);
        self.local_dofs(c).iter().zip(&vals).map(|(&i, v)| coeffs[i] * v).sum()
    }

    pub fn evaluate(&self, coeffs: &[f64], x: f64, y: f64) -> Result<f64> {
        let c = self.locate(x, y).ok_or(Error::PointOutsideDomain(x, y))?;
        Ok(self.evaluate_in(coeffs, c, x, y))
    }

    /// Stiffness and load by per-cell Gauss quadrature with `p + 1` points
    /// per direction, plus the boundary coefficients.
    pub fn assemble(&self, problem: &PoissonProblem) -> Result<DiscreteSystem> {
        let rule = gauss_rule(self.degree + 1);
        let (offsets, cols) = self.pattern();
        let mut values = vec![0.0; cols.len()];
        let mut load = vec![0.0; self.n_dofs()];
        let n = self.block();

        const CHUNK: usize = 512;
        for start in (0..self.cells.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(self.cells.len());
            let locals: Vec<(Vec<f64>, Vec<f64>)> =
                (start..end).into_par_iter().map(|c| self.local_system(c, &rule, &problem.f)).collect();
            for (c, (kl, fl)) in (start..end).zip(locals) {
                let cov = &self.covering[c];
                let nl = cov.len() * n;
                for (bi, &k) in cov.iter().enumerate() {
                    for (bj, &l) in cov.iter().enumerate() {
                        let slot = self.neighbors[k].binary_search(&l).expect("neighbors share a cell");
                        for a in 0..n {
                            let row = k * n + a;
                            let base = offsets[row] + slot * n;
                            for b in 0..n {
                                values[base + b] += kl[(bi * n + a) * nl + bj * n + b];
                            }
                        }
                    }
                    for a in 0..n {
                        load[k * n + a] += fl[bi * n + a];
                    }
                }
            }
        }
        let stiffness = CsrMatrix::try_from_csr_data(self.n_dofs(), self.n_dofs(), offsets, cols, values)
            .expect("assembled pattern is valid CSR");
        let dirichlet = self.dirichlet(&problem.u_d)?;
        Ok(DiscreteSystem { stiffness, load, dirichlet })
    }

    fn pattern(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.block();
        let mut offsets = Vec::with_capacity(self.n_dofs() + 1);
        let mut cols = Vec::new();
        offsets.push(0);
        for nb in &self.neighbors {
            for _ in 0..n {
                cols.extend(nb.iter().flat_map(|&l| (0..n).map(move |b| l * n + b)));
                offsets.push(cols.len());
            }
        }
        (offsets, cols)
    }

    fn local_system(&self, c: usize, rule: &[(f64, f64)], f: &Field) -> (Vec<f64>, Vec<f64>) {
        let nl = self.covering[c].len() * self.block();
        let mut kl = vec![0.0; nl * nl];
        let mut fl = vec![0.0; nl];
        let mut vals = Vec::with_capacity(nl);
        let mut grads = Vec::with_capacity(nl);
        for (x, y, w) in cell_rule(rule, self.bounds[c]) {
            self.local_basis(c, x, y, &mut vals, &mut grads);
            let fw = f(x, y) * w;
            for i in 0..nl {
                fl[i] += fw * vals[i];
                let gi = grads[i];
                for j in i..nl {
                    kl[i * nl + j] += w * (gi[0] * grads[j][0] + gi[1] * grads[j][1]);
                }
            }
        }
        for i in 0..nl {
            for j in 0..i {
                kl[i * nl + j] = kl[j * nl + i];
            }
        }
        (kl, fl)
    }

    /// Boundary coefficients: corner functions interpolate `u_d` at their
    /// corner, the remaining trace functions of each edge are fixed by an L2
    /// projection of what the corners leave over.
    pub fn dirichlet(&self, u_d: &Field) -> Result<BTreeMap<usize, f64>> {
        let [x0, y0, x1, y1] = self.domain;
        let n = self.block();
        // (normal direction, coordinate, at start of window?)
        let edges = [(0usize, x0, true), (0, x1, false), (1, y0, true), (1, y1, false)];
        let mut on_edge: Vec<Vec<(usize, &Window)>> = vec![Vec::new(); 4];
        for (k, [wx, wy]) in self.windows.iter().enumerate() {
            for (a, vx) in wx.iter().enumerate() {
                for (b, vy) in wy.iter().enumerate() {
                    let dof = k * n + a * (self.s + 1) + b;
                    for (e, &(dir, at, start)) in edges.iter().enumerate() {
                        let (normal, tangent) = if dir == 0 { (vx, vy) } else { (vy, vx) };
                        let hit = if start { normal.starts_full(at) } else { normal.ends_full(at) };
                        if hit {
                            on_edge[e].push((dof, tangent));
                        }
                    }
                }
            }
        }

        let mut fixed = BTreeMap::new();
        let mut corner_windows: Vec<Vec<(f64, &Window)>> = vec![Vec::new(); 4];
        for (e, &(dir, at, _)) in edges.iter().enumerate() {
            for &(dof, tangent) in &on_edge[e] {
                let (lo, hi) = if dir == 0 { (y0, y1) } else { (x0, x1) };
                for end in [lo, hi] {
                    let touches = if end == lo { tangent.starts_full(end) } else { tangent.ends_full(end) };
                    if touches {
                        let value = if dir == 0 { u_d(at, end) } else { u_d(end, at) };
                        fixed.insert(dof, value);
                        corner_windows[e].push((value, tangent));
                    }
                }
            }
        }

        let rule = gauss_rule(self.degree + 3);
        for (e, &(dir, at, _)) in edges.iter().enumerate() {
            let free: Vec<&(usize, &Window)> = on_edge[e].iter().filter(|(d, _)| !fixed.contains_key(d)).collect();
            if free.is_empty() {
                continue;
            }
            let mut breaks: Vec<f64> = on_edge[e].iter().flat_map(|(_, w)| w.knots.iter().copied()).collect();
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let m = free.len();
            let mut mass = DMatrix::<f64>::zeros(m, m);
            let mut rhs = DVector::<f64>::zeros(m);
            let mut phi = vec![0.0; m];
            for piece in breaks.windows(2) {
                let (a, b) = (piece[0], piece[1]);
                let (h, c) = (0.5 * (b - a), 0.5 * (b + a));
                for &(u, w) in &rule {
                    let t = c + h * u;
                    let w = w * h;
                    let g = if dir == 0 { u_d(at, t) } else { u_d(t, at) };
                    let corner: f64 = corner_windows[e].iter().map(|(v, win)| v * win.eval(t).0).sum();
                    for (i, (_, win)) in free.iter().enumerate() {
                        phi[i] = win.eval(t).0;
                    }
                    for i in 0..m {
                        rhs[i] += w * (g - corner) * phi[i];
                        for j in 0..m {
                            mass[(i, j)] += w * phi[i] * phi[j];
                        }
                    }
                }
            }
            let coeffs = mass.cholesky().ok_or(Error::SingularSystem)?.solve(&rhs);
            for (i, (dof, _)) in free.iter().enumerate() {
                fixed.insert(*dof, coeffs[i]);
            }
        }
        Ok(fixed)
    }
}
