//! Tensor-product B-splines on local knot vectors and LR B-spline sets.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::mesh::{Cell, Direction, LRMesh, MeshSegment, Rect};
use crate::param::{to_f64, Param};

/// Longest local knot vector the evaluator handles (degree 30).
const MAX_KNOTS: usize = 32;

/// The `p + 2` knots of one univariate B-spline factor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalKnotVector {
    knots: Vec<Param>,
}

impl LocalKnotVector {
    pub fn new(knots: Vec<Param>) -> Result<Self> {
        if knots.len() < 2 || knots.len() > MAX_KNOTS {
            return Err(Error::InvalidKnotVector(format!("length {} outside [2, {MAX_KNOTS}]", knots.len())));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidKnotVector("knots must be nondecreasing".into()));
        }
        if knots[0] == knots[knots.len() - 1] {
            return Err(Error::InvalidKnotVector("first and last knot coincide".into()));
        }
        Ok(LocalKnotVector { knots })
    }

    pub fn degree(&self) -> usize {
        self.knots.len() - 2
    }

    pub fn knots(&self) -> &[Param] {
        &self.knots
    }

    pub fn first(&self) -> Param {
        self.knots[0]
    }

    pub fn last(&self) -> Param {
        self.knots[self.knots.len() - 1]
    }

    /// Local multiplicity of `t`.
    pub fn count(&self, t: Param) -> usize {
        self.knots.iter().filter(|&&k| k == t).count()
    }

    /// On a mesh an end knot repeated `p + 1` times can only sit on an open
    /// boundary, where evaluation closes the support. Vectors outside a mesh
    /// should use [`Self::eval_within`].
    pub fn closed_right(&self) -> bool {
        self.count(self.last()) == self.degree() + 1
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.knots.iter().map(|&k| to_f64(k)).collect()
    }

    /// Knot insertion: returns `(first, alpha1, last, alpha2)` where the two
    /// children are the first and last `p + 2` knots of the extended vector
    /// and `B = alpha1 * first + alpha2 * last`.
    pub fn insert(&self, t: Param) -> Result<(LocalKnotVector, Param, LocalKnotVector, Param)> {
        let p = self.degree();
        let k = &self.knots;
        if t <= self.first() || t >= self.last() {
            return Err(Error::KnotOutOfRange { t });
        }
        if self.count(t) + 1 > p + 1 {
            return Err(Error::KnotMultiplicity { cap: p + 1 });
        }
        let pos = k.partition_point(|&v| v <= t);
        let mut ext = k.clone();
        ext.insert(pos, t);
        let one = Param::from_integer(1);
        let alpha1 = if k[p] == k[0] { one } else { ((t - k[0]) / (k[p] - k[0])).min(one) };
        let alpha2 = if k[p + 1] == k[1] { one } else { ((k[p + 1] - t) / (k[p + 1] - k[1])).min(one) };
        Ok((
            LocalKnotVector { knots: ext[..p + 2].to_vec() },
            alpha1,
            LocalKnotVector { knots: ext[1..].to_vec() },
            alpha2,
        ))
    }

    pub fn eval(&self, x: f64) -> f64 {
        bspline_eval(&self.to_f64(), x, self.closed_right()).0
    }

    /// Value at `x` with the support closed on the right only when the last
    /// knot is `end` at full multiplicity.
    pub fn eval_within(&self, x: f64, end: Param) -> f64 {
        bspline_eval(&self.to_f64(), x, self.closed_right() && self.last() == end).0
    }
}

/// Cox-de Boor evaluation of the single B-spline on `knots` (length `p + 2`),
/// returning value and first derivative. Half-open support `[t0, t_{p+1})`,
/// closed on the right when `closed_right` is set.
pub(crate) fn bspline_eval(knots: &[f64], x: f64, closed_right: bool) -> (f64, f64) {
    let p = knots.len() - 2;
    let last = knots[p + 1];
    if x < knots[0] || x > last || (x == last && !closed_right) {
        return (0.0, 0.0);
    }
    let mut n = [0.0f64; MAX_KNOTS];
    if x == last {
        let i = (0..=p).rev().find(|&i| knots[i] < knots[i + 1]).unwrap_or(p);
        n[i] = 1.0;
    } else {
        for i in 0..=p {
            if knots[i] <= x && x < knots[i + 1] {
                n[i] = 1.0;
            }
        }
    }
    let mut lower = (0.0, 0.0);
    for k in 1..=p {
        if k == p {
            lower = (n[0], n[1]);
        }
        for i in 0..=(p - k) {
            let d1 = knots[i + k] - knots[i];
            let d2 = knots[i + k + 1] - knots[i + 1];
            let a = if d1 > 0.0 { (x - knots[i]) / d1 * n[i] } else { 0.0 };
            let b = if d2 > 0.0 { (knots[i + k + 1] - x) / d2 * n[i + 1] } else { 0.0 };
            n[i] = a + b;
        }
    }
    let deriv = if p == 0 {
        0.0
    } else {
        let d1 = knots[p] - knots[0];
        let d2 = knots[p + 1] - knots[1];
        let a = if d1 > 0.0 { lower.0 / d1 } else { 0.0 };
        let b = if d2 > 0.0 { lower.1 / d2 } else { 0.0 };
        p as f64 * (a - b)
    };
    (n[0], deriv)
}

/// Bivariate tensor-product B-spline `N[kx](x) N[ky](y)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TensorBSpline {
    pub kx: LocalKnotVector,
    pub ky: LocalKnotVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// A meshline crosses the support without (enough) matching knots.
    Missing,
    /// A knot is repeated more often than the meshline beneath it allows.
    Excess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub direction: Direction,
    pub value: Param,
    pub kind: ViolationKind,
}

impl TensorBSpline {
    pub fn new(kx: LocalKnotVector, ky: LocalKnotVector) -> Result<Self> {
        if kx.degree() != ky.degree() {
            return Err(Error::InvalidKnotVector("bidegree must be (p, p)".into()));
        }
        Ok(TensorBSpline { kx, ky })
    }

    pub fn from_knots(kx: Vec<Param>, ky: Vec<Param>) -> Result<Self> {
        Self::new(LocalKnotVector::new(kx)?, LocalKnotVector::new(ky)?)
    }

    pub fn degree(&self) -> usize {
        self.kx.degree()
    }

    pub fn support(&self) -> Rect {
        Rect { x0: self.kx.first(), y0: self.ky.first(), x1: self.kx.last(), y1: self.ky.last() }
    }

    /// Knots matched against meshlines of `direction` (x-knots for vertical lines).
    pub fn knots_for(&self, direction: Direction) -> &LocalKnotVector {
        match direction {
            Direction::Vertical => &self.kx,
            Direction::Horizontal => &self.ky,
        }
    }

    fn with_knots(&self, direction: Direction, kv: LocalKnotVector) -> TensorBSpline {
        match direction {
            Direction::Vertical => TensorBSpline { kx: kv, ky: self.ky.clone() },
            Direction::Horizontal => TensorBSpline { kx: self.kx.clone(), ky: kv },
        }
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        self.kx.eval(x) * self.ky.eval(y)
    }

    /// Value with right-closure only on the top and right sides of `domain`.
    pub fn evaluate_within(&self, x: f64, y: f64, domain: &Rect) -> f64 {
        self.kx.eval_within(x, domain.x1) * self.ky.eval_within(y, domain.y1)
    }

    /// Value and gradient at `(x, y)`.
    pub fn evaluate_with_gradient(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let (vx, dx) = bspline_eval(&self.kx.to_f64(), x, self.kx.closed_right());
        let (vy, dy) = bspline_eval(&self.ky.to_f64(), y, self.ky.closed_right());
        (vx * vy, [dx * vy, vx * dy])
    }

    /// Splits along `direction` (knot `t` enters the knots matched against
    /// `direction` lines). Returns `(B1, alpha1, B2, alpha2)`.
    pub fn split(&self, direction: Direction, t: Param) -> Result<(TensorBSpline, f64, TensorBSpline, f64)> {
        let (a, alpha1, b, alpha2) = self.knots_for(direction).insert(t)?;
        Ok((self.with_knots(direction, a), to_f64(alpha1), self.with_knots(direction, b), to_f64(alpha2)))
    }

    /// First violation of the minimal-support property, vertical lines before
    /// horizontal ones, ascending coordinate.
    pub fn minimal_support_violation(&self, mesh: &LRMesh) -> Option<Violation> {
        for direction in Direction::BOTH {
            let kv = self.knots_for(direction);
            let (span_lo, span_hi) = self.support().span_range(direction);
            let mut coords: Vec<Param> = kv.knots().to_vec();
            coords.extend(mesh.lines_between(direction, kv.first(), kv.last()).map(|(f, _)| f));
            coords.sort();
            coords.dedup();
            for c in coords {
                let global = mesh.multiplicity_along(direction, c, span_lo, span_hi) as usize;
                let local = kv.count(c);
                let interior = kv.first() < c && c < kv.last();
                let kind = if interior && local < global {
                    ViolationKind::Missing
                } else if local > global {
                    ViolationKind::Excess
                } else {
                    continue;
                };
                return Some(Violation { direction, value: c, kind });
            }
        }
        None
    }

    pub fn has_minimal_support(&self, mesh: &LRMesh) -> bool {
        self.minimal_support_violation(mesh).is_none()
    }

    /// True when `seg` lies on a line through the open support and overlaps it.
    pub(crate) fn touched_by(&self, seg: &MeshSegment) -> bool {
        let supp = self.support();
        let (f0, f1) = supp.fixed_range(seg.direction);
        let (s0, s1) = supp.span_range(seg.direction);
        f0 < seg.fixed && seg.fixed < f1 && seg.lo < s1 && s0 < seg.hi
    }
}

/// Per-cell support counts measured against `(p + 1)^2`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageReport {
    pub overloaded: Vec<(Cell, usize)>,
    /// Cells covered by fewer than `(p + 1)^2` supports. On meshes grown from
    /// an open tensor mesh this signals an internal error.
    pub underloaded: Vec<(Cell, usize)>,
}

/// A set of tensor B-splines, deduplicated by their knot vectors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplineSet {
    functions: BTreeSet<TensorBSpline>,
}

impl FromIterator<TensorBSpline> for SplineSet {
    fn from_iter<I: IntoIterator<Item = TensorBSpline>>(iter: I) -> Self {
        SplineSet { functions: iter.into_iter().collect() }
    }
}

impl SplineSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TensorBSpline> {
        self.functions.iter()
    }

    pub fn contains(&self, b: &TensorBSpline) -> bool {
        self.functions.contains(b)
    }

    /// Returns false when an identical function was already present.
    pub fn insert(&mut self, b: TensorBSpline) -> bool {
        self.functions.insert(b)
    }

    pub fn remove(&mut self, b: &TensorBSpline) -> bool {
        self.functions.remove(b)
    }

    pub fn to_vec(&self) -> Vec<TensorBSpline> {
        self.functions.iter().cloned().collect()
    }

    /// Tensor-product B-splines of an LR mesh that has only full-span lines.
    pub fn from_tensor_mesh(mesh: &LRMesh) -> Result<SplineSet> {
        let mut global: Vec<Vec<Param>> = Vec::with_capacity(2);
        for direction in Direction::BOTH {
            let (lo, hi) = mesh.domain().span_range(direction);
            let mut knots = Vec::new();
            for f in mesh.coordinates(direction) {
                let pieces = mesh.pieces(direction, f);
                if pieces.len() != 1 || pieces[0].lo != lo || pieces[0].hi != hi {
                    return Err(Error::InvalidMesh("not a tensor mesh".into()));
                }
                knots.extend(std::iter::repeat_n(f, pieces[0].mult as usize));
            }
            global.push(knots);
        }
        let width = mesh.degree() + 2;
        let mut set = SplineSet::new();
        for wx in global[0].windows(width) {
            for wy in global[1].windows(width) {
                set.insert(TensorBSpline::from_knots(wx.to_vec(), wy.to_vec())?);
            }
        }
        Ok(set)
    }

    /// Reconstructs the LR B-splines of `mesh` by replaying its internal
    /// segments, one multiplicity level at a time, onto the boundary-only
    /// mesh. Each replayed step must split at least one function.
    pub fn from_lr_mesh(mesh: &LRMesh) -> Result<SplineSet> {
        let mut current = LRMesh::boundary_only(mesh.domain(), mesh.degree())?;
        let mut set = SplineSet::from_tensor_mesh(&current)?;
        let mut pending: Vec<(MeshSegment, u32)> = mesh.internal_segments().into_iter().map(|s| (s, 0)).collect();
        loop {
            let mut progress = false;
            for (seg, done) in pending.iter_mut() {
                while *done < seg.multiplicity {
                    let step = MeshSegment { multiplicity: *done + 1, ..*seg };
                    let Ok(next) = current.insert_segment(&step) else { break };
                    if next != current {
                        let mut trial = set.clone();
                        let touched: Vec<_> = trial.iter().filter(|b| b.touched_by(&step)).cloned().collect();
                        if trial.restore_from(&next, touched, |w| w.len() - 1).is_empty() {
                            break;
                        }
                        current = next;
                        set = trial;
                    }
                    *done += 1;
                    progress = true;
                }
            }
            pending.retain(|(s, done)| *done < s.multiplicity);
            if pending.is_empty() {
                return Ok(set);
            }
            if !progress {
                return Err(Error::NotLrMesh);
            }
        }
    }

    /// Replaces every member lacking minimal support by its knot-insertion
    /// children until all members have minimal support.
    pub fn restore_minimal_support(&self, mesh: &LRMesh) -> SplineSet {
        self.restore_minimal_support_by(mesh, |w| w.len() - 1)
    }

    /// As [`restore_minimal_support`](Self::restore_minimal_support), with
    /// `choose` picking which worklist entry to process next.
    pub fn restore_minimal_support_by(&self, mesh: &LRMesh, choose: impl FnMut(&[TensorBSpline]) -> usize) -> SplineSet {
        let mut out = self.clone();
        out.restore_from(mesh, self.to_vec(), choose);
        out
    }

    /// Worklist restoration seeded with `work`; returns the removed members.
    pub(crate) fn restore_from(
        &mut self,
        mesh: &LRMesh,
        mut work: Vec<TensorBSpline>,
        mut choose: impl FnMut(&[TensorBSpline]) -> usize,
    ) -> Vec<TensorBSpline> {
        let mut removed = Vec::new();
        while !work.is_empty() {
            let b = work.swap_remove(choose(&work));
            if !self.functions.contains(&b) {
                continue;
            }
            let Some(v) = b.minimal_support_violation(mesh) else { continue };
            if v.kind == ViolationKind::Excess {
                debug_assert!(false, "function {b:?} repeats a knot beyond its meshline");
                continue;
            }
            let (b1, _, b2, _) = b.split(v.direction, v.value).expect("missing knot lies strictly inside the support");
            self.functions.remove(&b);
            removed.push(b);
            for child in [b1, b2] {
                if self.functions.insert(child.clone()) {
                    work.push(child);
                }
            }
        }
        removed
    }

    /// Number of members whose support contains `cell`.
    pub fn supports_over_cell(&self, cell: &Cell) -> usize {
        self.functions.iter().filter(|b| b.support().contains_rect(cell)).count()
    }

    pub fn coverage_report(&self, mesh: &LRMesh) -> CoverageReport {
        let expected = (mesh.degree() + 1).pow(2);
        let mut cells = mesh.cells();
        cells.sort_by(|a, b| (a.x0, a.y0).cmp(&(b.x0, b.y0)));
        let mut counts = vec![0usize; cells.len()];
        for b in &self.functions {
            let supp = b.support();
            let start = cells.partition_point(|c| c.x0 < supp.x0);
            let end = cells.partition_point(|c| c.x0 < supp.x1);
            for (n, cell) in counts[start..end].iter_mut().zip(&cells[start..end]) {
                if supp.contains_rect(cell) {
                    *n += 1;
                }
            }
        }
        let mut report = CoverageReport::default();
        for (cell, n) in cells.into_iter().zip(counts) {
            if n > expected {
                report.overloaded.push((cell, n));
            } else if n < expected {
                report.underloaded.push((cell, n));
            }
        }
        report
    }

    /// Cells covered by more than `(p + 1)^2` supports.
    pub fn overloaded_cells(&self, mesh: &LRMesh) -> Vec<Cell> {
        self.coverage_report(mesh).overloaded.into_iter().map(|(c, _)| c).collect()
    }
}
