//! RM B-splines on top of a bilinear LR skeleton.
//!
//! An [`RMSpace`] stores only the bilinear LR B-splines and the smoothness
//! parameter `s`. Refinement acts on the skeleton; the degree `2s+1`
//! functions are rebuilt on demand, one B-spline system per skeleton
//! function.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::{Cell, Direction, LRMesh, MeshSegment, Rect};
use crate::param::{midpoint, Param};
use crate::spline::{LocalKnotVector, SplineSet, TensorBSpline};

/// The B-splines sharing one support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BSplineSystem {
    pub support: Rect,
    pub members: Vec<TensorBSpline>,
}

/// Partition of `set` by support rectangle.
pub fn group_systems(set: &SplineSet) -> Vec<BSplineSystem> {
    let mut groups: BTreeMap<Rect, Vec<TensorBSpline>> = BTreeMap::new();
    for b in set.iter() {
        groups.entry(b.support()).or_default().push(b.clone());
    }
    groups.into_iter().map(|(support, members)| BSplineSystem { support, members }).collect()
}

/// Every knot of a bilinear local vector repeated `s + 1` times: the global
/// knot vector of the system's univariate family.
pub fn lifted_knots(kv: &LocalKnotVector, s: u32) -> Vec<Param> {
    kv.knots().iter().flat_map(|&k| std::iter::repeat_n(k, s as usize + 1)).collect()
}

/// Rebuilds the degree `2s+1` system of a bilinear function in isolation:
/// the `(s+1)^2` tensor B-splines on the lifted local knot vectors.
pub fn lift_function(b: &TensorBSpline, s: u32) -> BSplineSystem {
    let width = 2 * s as usize + 3;
    let gx = lifted_knots(&b.kx, s);
    let gy = lifted_knots(&b.ky, s);
    let mut members = Vec::with_capacity((s as usize + 1).pow(2));
    for wx in gx.windows(width) {
        for wy in gy.windows(width) {
            members.push(TensorBSpline::from_knots(wx.to_vec(), wy.to_vec()).expect("lifted windows are valid"));
        }
    }
    BSplineSystem { support: b.support(), members }
}

/// All degree `2s+1` RM B-splines of an admissible bilinear skeleton,
/// grouped by system.
pub fn lift_space(skeleton: &SplineSet, mesh: &LRMesh, s: u32) -> Result<Vec<BSplineSystem>> {
    let overloaded = skeleton.overloaded_cells(mesh);
    if !overloaded.is_empty() {
        return Err(Error::Overloaded(overloaded.len()));
    }
    Ok(skeleton.iter().map(|b| lift_function(b, s)).collect())
}

/// Conditions 1 and 2 of admissibility: the RM multiplicity pattern for `s`,
/// and a non-overloaded bilinear reduction.
pub fn admissible_check(mesh: &LRMesh, s: u32) -> bool {
    mesh.is_rm_shape(s) && RMSpace::from_mesh(mesh).is_ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RMSpace {
    s: u32,
    mesh: LRMesh,
    skeleton: SplineSet,
}

impl RMSpace {
    /// Open `m x n` tensor skeleton.
    pub fn tensor(m: usize, n: usize, domain: Rect, s: u32) -> Result<RMSpace> {
        let mesh = LRMesh::tensor(m, n, domain, 1, 1)?;
        let skeleton = SplineSet::from_tensor_mesh(&mesh)?;
        Ok(RMSpace { s, mesh, skeleton })
    }

    /// Validating constructor from a stored skeleton.
    pub fn new(s: u32, mesh: LRMesh, skeleton: SplineSet) -> Result<RMSpace> {
        if !mesh.is_bilinear_shape() {
            return Err(Error::NotBilinearShape);
        }
        if skeleton.iter().any(|b| b.degree() != 1 || !b.has_minimal_support(&mesh)) {
            return Err(Error::InvalidKnotVector("skeleton functions must be bilinear with minimal support".into()));
        }
        let report = skeleton.coverage_report(&mesh);
        if !report.overloaded.is_empty() || !report.underloaded.is_empty() {
            return Err(Error::Overloaded(report.overloaded.len() + report.underloaded.len()));
        }
        Ok(RMSpace { s, mesh, skeleton })
    }

    /// Space for a mesh in RM shape for some `s` (read off its degree).
    pub fn from_mesh(mesh: &LRMesh) -> Result<RMSpace> {
        let p = mesh.degree();
        if p % 2 == 0 {
            return Err(Error::NotRmShape { s: (p as u32).saturating_sub(1) / 2 });
        }
        let s = (p as u32 - 1) / 2;
        let bilinear = mesh.adjust_multiplicities(s, 0)?;
        let skeleton = SplineSet::from_lr_mesh(&bilinear)?;
        let overloaded = skeleton.overloaded_cells(&bilinear);
        if !overloaded.is_empty() {
            return Err(Error::Overloaded(overloaded.len()));
        }
        Ok(RMSpace { s, mesh: bilinear, skeleton })
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn degree(&self) -> usize {
        2 * self.s as usize + 1
    }

    /// The bilinear skeleton mesh.
    pub fn mesh(&self) -> &LRMesh {
        &self.mesh
    }

    pub fn skeleton(&self) -> &SplineSet {
        &self.skeleton
    }

    pub fn domain(&self) -> Rect {
        self.mesh.domain()
    }

    /// Same skeleton, different smoothness.
    pub fn with_s(&self, s: u32) -> RMSpace {
        RMSpace { s, ..self.clone() }
    }

    /// The skeleton mesh with multiplicities raised to degree `2s+1`.
    pub fn lifted_mesh(&self) -> LRMesh {
        self.mesh.lift_multiplicities(self.s).expect("skeleton mesh is bilinear")
    }

    pub fn systems(&self) -> Vec<BSplineSystem> {
        self.skeleton.iter().map(|b| lift_function(b, self.s)).collect()
    }

    pub fn cardinality(&self) -> usize {
        (self.s as usize + 1).pow(2) * self.skeleton.len()
    }

    /// Inserts `seg` (multiplicity 1) into the skeleton and extends it until
    /// no cell is overloaded. Returns the new space and the segment as
    /// finally inserted.
    pub fn rm_insert(&self, seg: &MeshSegment) -> Result<(RMSpace, MeshSegment)> {
        if seg.multiplicity != 1 {
            return Err(Error::MultiplicityCap { mult: seg.multiplicity, cap: 1 });
        }
        let mut ws = Workspace { mesh: self.mesh.clone(), set: self.skeleton.clone() };
        match ws.insert_with_extension(seg)? {
            Some(done) => Ok((RMSpace { s: self.s, mesh: ws.mesh, skeleton: ws.set }, done)),
            None => Err(Error::NoSupportTraversed),
        }
    }

    /// One vertical and one horizontal bisecting segment per marked cell,
    /// each spanning the union of the supports covering that cell.
    /// Collinear overlapping segments are merged.
    pub fn refinement_segments(&self, marked: &[Cell]) -> Vec<MeshSegment> {
        let mut lines: BTreeMap<(Direction, Param), Vec<(Param, Param)>> = BTreeMap::new();
        for cell in marked {
            let covering: Vec<Rect> =
                self.skeleton.iter().map(|b| b.support()).filter(|r| r.contains_rect(cell)).collect();
            if covering.is_empty() {
                continue;
            }
            let hull = covering.iter().skip(1).fold(covering[0], |acc, r| acc.hull(r));
            for direction in Direction::BOTH {
                let (f0, f1) = cell.fixed_range(direction);
                lines.entry((direction, midpoint(f0, f1))).or_default().push(hull.span_range(direction));
            }
        }
        let mut out = Vec::new();
        for ((direction, fixed), mut spans) in lines {
            spans.sort();
            let mut merged: Vec<(Param, Param)> = Vec::new();
            for (lo, hi) in spans {
                match merged.last_mut() {
                    Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                    _ => merged.push((lo, hi)),
                }
            }
            out.extend(merged.into_iter().map(|(lo, hi)| MeshSegment::new(direction, fixed, lo, hi, 1)));
        }
        out
    }

    /// Refines every skeleton function whose support contains a marked cell.
    pub fn rm_refine_marked(&self, marked: &[Cell]) -> Result<RMSpace> {
        let mut ws = Workspace { mesh: self.mesh.clone(), set: self.skeleton.clone() };
        for seg in self.refinement_segments(marked) {
            if ws.mesh.multiplicity_along(seg.direction, seg.fixed, seg.lo, seg.hi) >= 1 {
                continue;
            }
            ws.insert_with_extension(&seg)?;
        }
        Ok(RMSpace { s: self.s, mesh: ws.mesh, skeleton: ws.set })
    }

    /// Skeleton functions whose half-open support holds `(x, y)`.
    pub fn covering_skeleton(&self, x: f64, y: f64) -> Vec<&TensorBSpline> {
        let domain = self.domain();
        self.skeleton.iter().filter(|b| b.support().contains_point(x, y, &domain)).collect()
    }

    /// The `(2s+2)^2` RM B-splines of the four systems active at `(x, y)`,
    /// with their values (zeros included).
    pub fn basis_at(&self, x: f64, y: f64) -> Result<Vec<(TensorBSpline, f64)>> {
        let d = self.domain();
        let inside = |v: f64, lo: Param, hi: Param| crate::param::to_f64(lo) <= v && v <= crate::param::to_f64(hi);
        if !(inside(x, d.x0, d.x1) && inside(y, d.y0, d.y1)) {
            return Err(Error::PointOutsideDomain(x, y));
        }
        Ok(self
            .covering_skeleton(x, y)
            .into_iter()
            .flat_map(|b| lift_function(b, self.s).members)
            .map(|m| {
                let v = m.evaluate_within(x, y, &d);
                (m, v)
            })
            .collect())
    }
}

/// Mutable skeleton state used while refining.
struct Workspace {
    mesh: LRMesh,
    set: SplineSet,
}

impl Workspace {
    /// Inserts `seg` and extends it through every support holding an
    /// overloaded cell until none is left. `Ok(None)` means the segment split
    /// nothing (it traverses no support) and the state is unchanged.
    fn insert_with_extension(&mut self, seg: &MeshSegment) -> Result<Option<MeshSegment>> {
        let (s0, s1) = self.mesh.domain().span_range(seg.direction);
        let max_steps =
            self.mesh.coordinates(Direction::Vertical).len() + self.mesh.coordinates(Direction::Horizontal).len();
        let mut current = MeshSegment { multiplicity: 1, ..*seg };
        let mut region: Option<Rect> = None;
        for step in 0..=max_steps {
            let next = self.mesh.insert_segment(&current)?;
            let touched: Vec<_> = self.set.iter().filter(|b| b.touched_by(&current)).cloned().collect();
            let removed = self.set.restore_from(&next, touched, |w| w.len() - 1);
            if step == 0 && removed.is_empty() {
                return Ok(None);
            }
            self.mesh = next;
            for r in &removed {
                region = Some(region.map_or(r.support(), |acc| acc.hull(&r.support())));
            }
            let Some(area) = region else { return Ok(Some(current)) };
            let overloaded = overloaded_within(&self.mesh, &self.set, &area);
            if overloaded.is_empty() {
                return Ok(Some(current));
            }
            let (mut lo, mut hi) = (current.lo, current.hi);
            for cell in &overloaded {
                for b in self.set.iter() {
                    let supp = b.support();
                    let (f0, f1) = supp.fixed_range(seg.direction);
                    if supp.contains_rect(cell) && f0 < seg.fixed && seg.fixed < f1 {
                        let (a, z) = supp.span_range(seg.direction);
                        lo = lo.min(a);
                        hi = hi.max(z);
                    }
                }
            }
            if (lo, hi) == (current.lo, current.hi) {
                // no support through the line holds the overloaded cells
                (lo, hi) = (s0, s1);
            }
            if (lo, hi) == (current.lo, current.hi) {
                return Err(Error::Overloaded(overloaded.len()));
            }
            current.lo = lo;
            current.hi = hi;
        }
        Err(Error::ExtensionDidNotTerminate(max_steps))
    }
}

/// Overloaded pieces of `area`, measured on the grid of all meshline
/// coordinates inside it. Each grid rectangle lies in exactly one cell and
/// shares that cell's support count.
pub(crate) fn overloaded_within(mesh: &LRMesh, set: &SplineSet, area: &Rect) -> Vec<Rect> {
    let expected = (mesh.degree() + 1).pow(2) as i32;
    let xs: Vec<Param> =
        mesh.coordinates(Direction::Vertical).into_iter().filter(|&x| area.x0 <= x && x <= area.x1).collect();
    let ys: Vec<Param> =
        mesh.coordinates(Direction::Horizontal).into_iter().filter(|&y| area.y0 <= y && y <= area.y1).collect();
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let mut diff = vec![0i32; (nx + 1) * (ny + 1)];
    for b in set.iter() {
        let supp = b.support();
        if !supp.overlaps(area) {
            continue;
        }
        let i0 = xs.partition_point(|&v| v < supp.x0.max(area.x0));
        let i1 = xs.partition_point(|&v| v < supp.x1.min(area.x1));
        let j0 = ys.partition_point(|&v| v < supp.y0.max(area.y0));
        let j1 = ys.partition_point(|&v| v < supp.y1.min(area.y1));
        diff[j0 * (nx + 1) + i0] += 1;
        diff[j0 * (nx + 1) + i1] -= 1;
        diff[j1 * (nx + 1) + i0] -= 1;
        diff[j1 * (nx + 1) + i1] += 1;
    }
    for j in 0..=ny {
        for i in 1..=nx {
            diff[j * (nx + 1) + i] += diff[j * (nx + 1) + i - 1];
        }
    }
    for j in 1..=ny {
        for i in 0..=nx {
            diff[j * (nx + 1) + i] += diff[(j - 1) * (nx + 1) + i];
        }
    }
    let mut out = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if diff[j * (nx + 1) + i] > expected {
                out.push(Rect { x0: xs[i], y0: ys[j], x1: xs[i + 1], y1: ys[j + 1] });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::{int, param};

    fn rect(x0: i64, y0: i64, x1: i64, y1: i64) -> Rect {
        Rect::new(int(x0), int(y0), int(x1), int(y1)).unwrap()
    }

    fn kv(v: &[Param]) -> Vec<Param> {
        v.to_vec()
    }

    #[test]
    fn lifted_windows_for_s1() {
        let b = TensorBSpline::from_knots(vec![int(0), int(1), int(2)], vec![int(0), int(1), int(2)]).unwrap();
        let sys = lift_function(&b, 1);
        assert_eq!(sys.members.len(), 4);
        assert_eq!(sys.support, rect(0, 0, 2, 2));
        let xs: Vec<_> = sys.members.iter().map(|m| m.kx.knots().to_vec()).collect();
        assert_eq!(xs[0], kv(&[int(0), int(0), int(1), int(1), int(2)]));
        assert_eq!(xs[3], kv(&[int(0), int(1), int(1), int(2), int(2)]));
        assert!(sys.members.iter().all(|m| m.degree() == 3 && m.support() == sys.support));
    }

    #[test]
    fn tensor_cardinality() {
        for s in 0..4 {
            let space = RMSpace::tensor(3, 2, rect(0, 0, 3, 2), s).unwrap();
            assert_eq!(space.skeleton().len(), 4 * 3);
            assert_eq!(space.cardinality(), (s as usize + 1).pow(2) * 12);
            let lifted = SplineSet::from_tensor_mesh(&space.lifted_mesh()).unwrap();
            assert_eq!(lifted.len(), space.cardinality());
        }
    }

    #[test]
    fn segment_without_full_crossing_is_rejected() {
        let space = RMSpace::tensor(4, 4, rect(0, 0, 4, 4), 1).unwrap();
        let seg = MeshSegment::vertical(param(5, 2), int(1), int(2), 1);
        assert_eq!(space.rm_insert(&seg), Err(Error::NoSupportTraversed));
    }

    #[test]
    fn rm_insert_leaves_no_overload() {
        let space = RMSpace::tensor(3, 2, rect(0, 0, 3, 2), 1).unwrap();
        let g1 = MeshSegment::vertical(param(3, 2), int(0), int(2), 1);
        let (space, done) = space.rm_insert(&g1).unwrap();
        assert_eq!(done, g1);
        let g2 = MeshSegment::horizontal(param(3, 2), int(0), int(2), 1);
        let (space, done) = space.rm_insert(&g2).unwrap();
        assert!(done.lo <= g2.lo && done.hi >= g2.hi);
        assert!(space.skeleton().overloaded_cells(space.mesh()).is_empty());
        assert!(space.skeleton().iter().all(|b| b.has_minimal_support(space.mesh())));
    }

    #[test]
    fn refinement_segments_merge_collinear() {
        let space = RMSpace::tensor(4, 4, rect(0, 0, 4, 4), 1).unwrap();
        let marked = [rect(1, 1, 2, 2), rect(1, 2, 2, 3)];
        let segs = space.refinement_segments(&marked);
        let vertical: Vec<_> = segs.iter().filter(|s| s.direction == Direction::Vertical).collect();
        assert_eq!(vertical.len(), 1);
        assert_eq!(vertical[0].fixed, param(3, 2));
        assert_eq!((vertical[0].lo, vertical[0].hi), (int(0), int(4)));
        let horizontal: Vec<_> = segs.iter().filter(|s| s.direction == Direction::Horizontal).collect();
        assert_eq!(horizontal.len(), 2);
    }

    #[test]
    fn basis_is_partition_of_unity() {
        let space = RMSpace::tensor(3, 3, rect(0, 0, 3, 3), 1).unwrap();
        let space = space.rm_refine_marked(&[rect(1, 1, 2, 2)]).unwrap();
        for &(x, y) in &[(0.3, 0.7), (1.5, 1.5), (1.25, 1.9), (3.0, 3.0), (0.0, 2.2)] {
            let basis = space.basis_at(x, y).unwrap();
            assert_eq!(basis.len(), 16);
            let sum: f64 = basis.iter().map(|(_, v)| v).sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum {sum} at ({x}, {y})");
            assert!(basis.iter().all(|(_, v)| *v >= 0.0));
        }
        assert!(space.basis_at(3.5, 1.0).is_err());
    }

    #[test]
    fn from_mesh_round_trip() {
        let space = RMSpace::tensor(3, 3, rect(0, 0, 3, 3), 2).unwrap();
        let space = space.rm_refine_marked(&[rect(0, 0, 1, 1)]).unwrap();
        let lifted = space.lifted_mesh();
        assert!(admissible_check(&lifted, 2));
        assert!(!admissible_check(&lifted, 1));
        let back = RMSpace::from_mesh(&lifted).unwrap();
        assert_eq!(back.skeleton(), space.skeleton());
        assert_eq!(back.s(), 2);
    }

    #[test]
    fn staggered_inserts_force_extension() {
        let space = RMSpace::tensor(4, 4, rect(0, 0, 4, 4), 0).unwrap();
        let (space, _) = space.rm_insert(&MeshSegment::vertical(param(3, 2), int(2), int(4), 1)).unwrap();
        let short = MeshSegment::horizontal(param(5, 2), int(1), int(3), 1);

        let naive_mesh = space.mesh().insert_segment(&short).unwrap();
        let naive = space.skeleton().restore_minimal_support(&naive_mesh);
        assert!(!naive.overloaded_cells(&naive_mesh).is_empty());

        let (space, done) = space.rm_insert(&short).unwrap();
        assert_eq!((done.lo, done.hi), (int(0), int(3)));
        assert!(space.skeleton().overloaded_cells(space.mesh()).is_empty());
    }
}
