//! Open bivariate LR meshes.
//!
//! A mesh is the domain rectangle plus a set of axis-aligned segments, each
//! carrying a multiplicity. Collinear segments are kept normalized: every
//! meshline (direction + fixed coordinate) stores sorted, non-overlapping,
//! maximal pieces, and adjacent pieces always differ in multiplicity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::{int, to_f64, Param};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Constant x.
    Vertical,
    /// Constant y.
    Horizontal,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Vertical, Direction::Horizontal];

    pub(crate) fn index(self) -> usize {
        match self {
            Direction::Vertical => 0,
            Direction::Horizontal => 1,
        }
    }

    pub fn other(self) -> Direction {
        match self {
            Direction::Vertical => Direction::Horizontal,
            Direction::Horizontal => Direction::Vertical,
        }
    }
}

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]` with positive area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rect {
    pub x0: Param,
    pub y0: Param,
    pub x1: Param,
    pub y1: Param,
}

/// A mesh cell: a rectangle whose interior meets no mesh segment.
pub type Cell = Rect;

impl Rect {
    pub fn new(x0: Param, y0: Param, x1: Param, y1: Param) -> Result<Rect> {
        if x0 < x1 && y0 < y1 {
            Ok(Rect { x0, y0, x1, y1 })
        } else {
            Err(Error::DegenerateDomain)
        }
    }

    /// Interval covered in the coordinate that a `direction` line keeps fixed.
    pub fn fixed_range(&self, direction: Direction) -> (Param, Param) {
        match direction {
            Direction::Vertical => (self.x0, self.x1),
            Direction::Horizontal => (self.y0, self.y1),
        }
    }

    /// Interval covered along a `direction` line.
    pub fn span_range(&self, direction: Direction) -> (Param, Param) {
        self.fixed_range(direction.other())
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.x0 <= other.x0 && other.x1 <= self.x1 && self.y0 <= other.y0 && other.y1 <= self.y1
    }

    /// True when the open interiors intersect.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn area(&self) -> Param {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn hull(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn center_f64(&self) -> (f64, f64) {
        (0.5 * (to_f64(self.x0) + to_f64(self.x1)), 0.5 * (to_f64(self.y0) + to_f64(self.y1)))
    }

    /// Half-open membership `[x0, x1) x [y0, y1)`, closed on the sides that
    /// coincide with the right/top edge of `domain`.
    pub fn contains_point(&self, x: f64, y: f64, domain: &Rect) -> bool {
        let inside = |v: f64, lo: Param, hi: Param, end: Param| {
            let (lo, hi) = (to_f64(lo), to_f64(hi));
            lo <= v && (v < hi || (hi == to_f64(end) && v == hi))
        };
        inside(x, self.x0, self.x1, domain.x1) && inside(y, self.y0, self.y1, domain.y1)
    }
}

/// An axis-aligned segment with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeshSegment {
    pub direction: Direction,
    /// The constant coordinate.
    pub fixed: Param,
    pub lo: Param,
    pub hi: Param,
    pub multiplicity: u32,
}

impl MeshSegment {
    pub fn new(direction: Direction, fixed: Param, lo: Param, hi: Param, multiplicity: u32) -> Self {
        MeshSegment { direction, fixed, lo, hi, multiplicity }
    }

    pub fn vertical(x: Param, y0: Param, y1: Param, multiplicity: u32) -> Self {
        Self::new(Direction::Vertical, x, y0, y1, multiplicity)
    }

    pub fn horizontal(y: Param, x0: Param, x1: Param, multiplicity: u32) -> Self {
        Self::new(Direction::Horizontal, y, x0, x1, multiplicity)
    }

    pub fn length(&self) -> Param {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Piece {
    pub lo: Param,
    pub hi: Param,
    pub mult: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LRMesh {
    domain: Rect,
    degree: usize,
    lines: [BTreeMap<Param, Vec<Piece>>; 2],
}

impl LRMesh {
    /// Mesh holding only the four boundary lines at multiplicity `degree + 1`.
    pub fn boundary_only(domain: Rect, degree: usize) -> Result<LRMesh> {
        Rect::new(domain.x0, domain.y0, domain.x1, domain.y1)?;
        let mut mesh = LRMesh { domain, degree, lines: [BTreeMap::new(), BTreeMap::new()] };
        let cap = mesh.cap();
        for dir in Direction::BOTH {
            let (f0, f1) = domain.fixed_range(dir);
            let (lo, hi) = domain.span_range(dir);
            for f in [f0, f1] {
                mesh.lines[dir.index()].insert(f, vec![Piece { lo, hi, mult: cap }]);
            }
        }
        Ok(mesh)
    }

    /// Uniform open tensor mesh with `m x n` cells.
    pub fn tensor(m: usize, n: usize, domain: Rect, degree: usize, internal_mult: u32) -> Result<LRMesh> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidMesh("cell counts must be positive".into()));
        }
        let mut mesh = Self::boundary_only(domain, degree)?;
        let cap = mesh.cap();
        if internal_mult == 0 || internal_mult > cap {
            return Err(Error::MultiplicityCap { mult: internal_mult, cap });
        }
        for (dir, count) in [(Direction::Vertical, m), (Direction::Horizontal, n)] {
            let (f0, f1) = domain.fixed_range(dir);
            let (lo, hi) = domain.span_range(dir);
            for k in 1..count {
                let f = f0 + (f1 - f0) * int(k as i64) / int(count as i64);
                mesh.lines[dir.index()].insert(f, vec![Piece { lo, hi, mult: internal_mult }]);
            }
        }
        Ok(mesh)
    }

    /// Builds a mesh from a raw segment list (e.g. a parsed file). Overlaps
    /// are max-merged; the result must be open with no dangling endpoints.
    pub fn from_segments(domain: Rect, degree: usize, segments: &[MeshSegment]) -> Result<LRMesh> {
        Rect::new(domain.x0, domain.y0, domain.x1, domain.y1)?;
        let mut mesh = LRMesh { domain, degree, lines: [BTreeMap::new(), BTreeMap::new()] };
        for seg in segments {
            mesh.check_geometry(seg)?;
            let line = mesh.lines[seg.direction.index()].entry(seg.fixed).or_default();
            let merged = merge_line(line, seg.lo, seg.hi, |old| old.max(seg.multiplicity));
            *line = merged;
        }
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Largest multiplicity allowed on any line, `degree + 1`.
    pub fn cap(&self) -> u32 {
        self.degree as u32 + 1
    }

    pub fn is_boundary(&self, direction: Direction, fixed: Param) -> bool {
        let (f0, f1) = self.domain.fixed_range(direction);
        fixed == f0 || fixed == f1
    }

    /// Normalized segment list, vertical first, then by coordinate.
    pub fn segments(&self) -> Vec<MeshSegment> {
        let mut out = Vec::new();
        for dir in Direction::BOTH {
            for (&fixed, pieces) in &self.lines[dir.index()] {
                out.extend(pieces.iter().map(|p| MeshSegment::new(dir, fixed, p.lo, p.hi, p.mult)));
            }
        }
        out
    }

    pub fn internal_segments(&self) -> Vec<MeshSegment> {
        self.segments().into_iter().filter(|s| !self.is_boundary(s.direction, s.fixed)).collect()
    }

    /// Distinct fixed coordinates of all `direction` lines, ascending.
    pub fn coordinates(&self, direction: Direction) -> Vec<Param> {
        self.lines[direction.index()].keys().copied().collect()
    }

    pub(crate) fn pieces(&self, direction: Direction, fixed: Param) -> &[Piece] {
        self.lines[direction.index()].get(&fixed).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Lines of `direction` whose fixed coordinate lies strictly in `(lo, hi)`.
    pub(crate) fn lines_between(
        &self,
        direction: Direction,
        lo: Param,
        hi: Param,
    ) -> impl Iterator<Item = (Param, &[Piece])> + '_ {
        use std::ops::Bound::Excluded;
        self.lines[direction.index()]
            .range((Excluded(lo), Excluded(hi)))
            .map(|(f, p)| (*f, p.as_slice()))
    }

    /// Minimum multiplicity over `[lo, hi]` along the given line; 0 when any
    /// part of the interval is uncovered.
    pub fn multiplicity_along(&self, direction: Direction, fixed: Param, lo: Param, hi: Param) -> u32 {
        multiplicity_over(self.pieces(direction, fixed), lo, hi)
    }

    /// Inserts `seg` with absolute target multiplicity: where it overlaps
    /// existing pieces the larger multiplicity wins. Re-inserting an existing
    /// segment at or below its multiplicity is a no-op.
    pub fn insert_segment(&self, seg: &MeshSegment) -> Result<LRMesh> {
        self.check_geometry(seg)?;
        self.modify_line(seg, |old| old.max(seg.multiplicity))
    }

    /// Raises the multiplicity of every point of the segment by `delta`
    /// (uncovered parts go from 0 to `delta`).
    pub fn raise_segment(&self, direction: Direction, fixed: Param, lo: Param, hi: Param, delta: u32) -> Result<LRMesh> {
        let seg = MeshSegment::new(direction, fixed, lo, hi, delta);
        self.check_geometry(&seg)?;
        self.modify_line(&seg, |old| old + delta)
    }

    fn modify_line(&self, seg: &MeshSegment, f: impl Fn(u32) -> u32) -> Result<LRMesh> {
        let pieces = self.pieces(seg.direction, seg.fixed);
        let merged = merge_line(pieces, seg.lo, seg.hi, f);
        let cap = self.cap();
        if let Some(p) = merged.iter().find(|p| p.mult > cap) {
            return Err(Error::MultiplicityCap { mult: p.mult, cap });
        }
        if merged.as_slice() != pieces {
            for at in [seg.lo, seg.hi] {
                if !self.endpoint_anchored(seg, at) {
                    return Err(Error::DanglingEndpoint { direction: seg.direction, fixed: seg.fixed, at });
                }
            }
        }
        let mut out = self.clone();
        out.lines[seg.direction.index()].insert(seg.fixed, merged);
        Ok(out)
    }

    fn check_geometry(&self, seg: &MeshSegment) -> Result<()> {
        if seg.multiplicity == 0 || seg.multiplicity > self.cap() {
            return Err(Error::MultiplicityCap { mult: seg.multiplicity, cap: self.cap() });
        }
        if seg.lo >= seg.hi {
            return Err(Error::ZeroLength);
        }
        let (f0, f1) = self.domain.fixed_range(seg.direction);
        let (s0, s1) = self.domain.span_range(seg.direction);
        if seg.fixed < f0 || seg.fixed > f1 || seg.lo < s0 || seg.hi > s1 {
            return Err(Error::OutsideDomain);
        }
        Ok(())
    }

    /// An endpoint is anchored when it lies on the domain edge, when the
    /// collinear line already continues past it, or when it sits strictly
    /// inside a perpendicular line (a T-junction).
    fn endpoint_anchored(&self, seg: &MeshSegment, at: Param) -> bool {
        let (s0, s1) = self.domain.span_range(seg.direction);
        if at == s0 || at == s1 {
            return true;
        }
        let collinear = self.pieces(seg.direction, seg.fixed);
        let continues = if at == seg.lo {
            collinear.iter().any(|p| p.lo < at && at <= p.hi)
        } else {
            collinear.iter().any(|p| p.lo <= at && at < p.hi)
        };
        continues || covers_neighborhood(self.pieces(seg.direction.other(), at), seg.fixed)
    }

    /// Checks openness and the absence of dangling endpoints.
    pub fn validate(&self) -> Result<()> {
        let cap = self.cap();
        for dir in Direction::BOTH {
            let (f0, f1) = self.domain.fixed_range(dir);
            let (s0, s1) = self.domain.span_range(dir);
            for f in [f0, f1] {
                if self.multiplicity_along(dir, f, s0, s1) != cap {
                    return Err(Error::InvalidMesh(format!("boundary line {dir:?} at {f} is not at multiplicity {cap}")));
                }
            }
            for (&fixed, pieces) in &self.lines[dir.index()] {
                for (i, p) in pieces.iter().enumerate() {
                    if p.mult == 0 || p.mult > cap {
                        return Err(Error::MultiplicityCap { mult: p.mult, cap });
                    }
                    let seg = MeshSegment::new(dir, fixed, p.lo, p.hi, p.mult);
                    let lo_ok = (i > 0 && pieces[i - 1].hi == p.lo) || self.endpoint_anchored(&seg, p.lo);
                    let hi_ok = (i + 1 < pieces.len() && pieces[i + 1].lo == p.hi) || self.endpoint_anchored(&seg, p.hi);
                    if !lo_ok {
                        return Err(Error::DanglingEndpoint { direction: dir, fixed, at: p.lo });
                    }
                    if !hi_ok {
                        return Err(Error::DanglingEndpoint { direction: dir, fixed, at: p.hi });
                    }
                }
            }
        }
        Ok(())
    }

    /// Partition of the domain into cells, ordered by (y0, x0).
    pub fn cells(&self) -> Vec<Cell> {
        let xs = self.coordinates(Direction::Vertical);
        let ys = self.coordinates(Direction::Horizontal);
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        // vwall[i][j]: vertical line xs[i] covers [ys[j], ys[j+1]].
        let vwall = wall_table(&xs, &ys, |x| self.pieces(Direction::Vertical, x));
        let hwall = wall_table(&ys, &xs, |y| self.pieces(Direction::Horizontal, y));
        let mut taken = vec![false; nx * ny];
        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if taken[j * nx + i] {
                    continue;
                }
                let mut i1 = i + 1;
                while i1 < nx && !vwall[i1][j] {
                    i1 += 1;
                }
                let mut j1 = j + 1;
                while j1 < ny && !hwall[j1][i] {
                    j1 += 1;
                }
                for jj in j..j1 {
                    for ii in i..i1 {
                        taken[jj * nx + ii] = true;
                    }
                }
                cells.push(Rect { x0: xs[i], y0: ys[j], x1: xs[i1], y1: ys[j1] });
            }
        }
        cells
    }

    pub fn is_bilinear_shape(&self) -> bool {
        self.is_rm_shape(0)
    }

    /// Degree `2s+1`, internal multiplicity `s+1` everywhere, open boundary.
    pub fn is_rm_shape(&self, s: u32) -> bool {
        self.degree == 2 * s as usize + 1 && self.has_pattern(s + 1, 2 * s + 2)
    }

    fn has_pattern(&self, internal: u32, boundary: u32) -> bool {
        Direction::BOTH.iter().all(|&dir| {
            let (s0, s1) = self.domain.span_range(dir);
            self.lines[dir.index()].iter().all(|(&f, pieces)| {
                if self.is_boundary(dir, f) {
                    pieces.len() == 1 && pieces[0] == Piece { lo: s0, hi: s1, mult: boundary }
                } else {
                    pieces.iter().all(|p| p.mult == internal)
                }
            })
        })
    }

    fn remap(&self, degree: usize, internal: u32, boundary: u32) -> LRMesh {
        let mut out = self.clone();
        out.degree = degree;
        for dir in Direction::BOTH {
            let bounds = self.domain.fixed_range(dir);
            for (f, pieces) in out.lines[dir.index()].iter_mut() {
                let m = if *f == bounds.0 || *f == bounds.1 { boundary } else { internal };
                for p in pieces.iter_mut() {
                    p.mult = m;
                }
            }
        }
        out
    }

    /// Raises internal multiplicities by `s` and boundary ones by `2s`,
    /// turning a bilinear mesh into one of degree `2s+1`.
    pub fn lift_multiplicities(&self, s: u32) -> Result<LRMesh> {
        if !self.is_bilinear_shape() {
            return Err(Error::NotBilinearShape);
        }
        Ok(self.remap(2 * s as usize + 1, s + 1, 2 * s + 2))
    }

    pub fn adjust_multiplicities(&self, s: u32, s_new: u32) -> Result<LRMesh> {
        if !self.is_rm_shape(s) {
            return Err(Error::NotRmShape { s });
        }
        Ok(self.remap(2 * s_new as usize + 1, s_new + 1, 2 * s_new + 2))
    }
}

fn multiplicity_over(pieces: &[Piece], lo: Param, hi: Param) -> u32 {
    let mut cursor = lo;
    let mut min = u32::MAX;
    for p in pieces {
        if p.hi <= cursor {
            continue;
        }
        if p.lo > cursor {
            return 0;
        }
        min = min.min(p.mult);
        cursor = p.hi;
        if cursor >= hi {
            return min;
        }
    }
    0
}

fn covers_neighborhood(pieces: &[Piece], t: Param) -> bool {
    let below = pieces.iter().any(|p| p.lo < t && t <= p.hi);
    let above = pieces.iter().any(|p| p.lo <= t && t < p.hi);
    below && above
}

/// Rebuilds a line after applying `f` to the multiplicity of every point in
/// `[lo, hi]` (0 stands for "uncovered").
fn merge_line(pieces: &[Piece], lo: Param, hi: Param, f: impl Fn(u32) -> u32) -> Vec<Piece> {
    let mut breaks: Vec<Param> = pieces.iter().flat_map(|p| [p.lo, p.hi]).chain([lo, hi]).collect();
    breaks.sort();
    breaks.dedup();
    let mut out: Vec<Piece> = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let old = pieces.iter().find(|p| p.lo <= a && b <= p.hi).map_or(0, |p| p.mult);
        let m = if lo <= a && b <= hi { f(old) } else { old };
        if m == 0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.hi == a && last.mult == m => last.hi = b,
            _ => out.push(Piece { lo: a, hi: b, mult: m }),
        }
    }
    out
}

/// `table[i][j]` is true when the line at `fixed[i]` covers `[span[j], span[j+1]]`.
fn wall_table<'a>(fixed: &[Param], span: &[Param], pieces_of: impl Fn(Param) -> &'a [Piece]) -> Vec<Vec<bool>> {
    fixed
        .iter()
        .map(|&f| {
            let mut row = vec![false; span.len().saturating_sub(1)];
            for p in pieces_of(f) {
                let start = span.partition_point(|&v| v < p.lo);
                let end = span.partition_point(|&v| v < p.hi);
                for cell in row.iter_mut().take(end).skip(start) {
                    *cell = true;
                }
            }
            row
        })
        .collect()
}
