//! JSON forms of meshes, spline sets and RM spaces, and the marks file format.
//!
//! Rationals are written as `[numerator, denominator]`; plain integers are
//! accepted on input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Cell, Direction, LRMesh, MeshSegment, Rect};
use crate::param::{parse_param, Param};
use crate::rm::RMSpace;
use crate::spline::{SplineSet, TensorBSpline};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum Rational {
    Int(i64),
    Pair([i64; 2]),
}

impl From<Param> for Rational {
    fn from(p: Param) -> Self {
        Rational::Pair([*p.numer(), *p.denom()])
    }
}

impl TryFrom<Rational> for Param {
    type Error = Error;

    fn try_from(r: Rational) -> Result<Param> {
        match r {
            Rational::Int(v) => Ok(Param::from_integer(v)),
            Rational::Pair([_, 0]) => Err(Error::Parse("zero denominator".into())),
            Rational::Pair([n, d]) => Ok(Param::new(n, d)),
        }
    }
}

fn params(values: &[Rational]) -> Result<Vec<Param>> {
    values.iter().map(|&r| Param::try_from(r)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentJson {
    dir: String,
    fixed: Rational,
    span: [Rational; 2],
    mult: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeshJson {
    domain: [Rational; 4],
    degree: usize,
    segments: Vec<SegmentJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplineJson {
    kvx: Vec<Rational>,
    kvy: Vec<Rational>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpaceJson {
    s: u32,
    mesh: MeshJson,
    skeleton: Vec<SplineJson>,
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn mesh_json(mesh: &LRMesh) -> MeshJson {
    let d = mesh.domain();
    MeshJson {
        domain: [d.x0.into(), d.y0.into(), d.x1.into(), d.y1.into()],
        degree: mesh.degree(),
        segments: mesh
            .segments()
            .into_iter()
            .map(|s| SegmentJson {
                dir: match s.direction {
                    Direction::Vertical => "v".into(),
                    Direction::Horizontal => "h".into(),
                },
                fixed: s.fixed.into(),
                span: [s.lo.into(), s.hi.into()],
                mult: s.multiplicity,
            })
            .collect(),
    }
}

fn mesh_from_json(json: &MeshJson) -> Result<LRMesh> {
    let d = params(&json.domain)?;
    let domain = Rect::new(d[0], d[1], d[2], d[3])?;
    let segments = json
        .segments
        .iter()
        .map(|s| {
            let direction = match s.dir.as_str() {
                "v" => Direction::Vertical,
                "h" => Direction::Horizontal,
                other => return Err(Error::Parse(format!("unknown segment direction {other:?}"))),
            };
            let span = params(&s.span)?;
            Ok(MeshSegment::new(direction, Param::try_from(s.fixed)?, span[0], span[1], s.mult))
        })
        .collect::<Result<Vec<_>>>()?;
    LRMesh::from_segments(domain, json.degree, &segments)
}

fn spline_json(b: &TensorBSpline) -> SplineJson {
    SplineJson {
        kvx: b.kx.knots().iter().map(|&k| k.into()).collect(),
        kvy: b.ky.knots().iter().map(|&k| k.into()).collect(),
    }
}

fn splines_from_json(list: &[SplineJson]) -> Result<SplineSet> {
    list.iter().map(|s| TensorBSpline::from_knots(params(&s.kvx)?, params(&s.kvy)?)).collect()
}

pub fn mesh_to_string(mesh: &LRMesh) -> String {
    serde_json::to_string_pretty(&mesh_json(mesh)).expect("mesh JSON serializes")
}

pub fn mesh_from_str(text: &str) -> Result<LRMesh> {
    mesh_from_json(&serde_json::from_str(text).map_err(parse_err)?)
}

pub fn splines_to_string(set: &SplineSet) -> String {
    let list: Vec<SplineJson> = set.iter().map(spline_json).collect();
    serde_json::to_string_pretty(&list).expect("spline JSON serializes")
}

pub fn splines_from_str(text: &str) -> Result<SplineSet> {
    let list: Vec<SplineJson> = serde_json::from_str(text).map_err(parse_err)?;
    splines_from_json(&list)
}

pub fn space_to_string(space: &RMSpace) -> String {
    let json = SpaceJson {
        s: space.s(),
        mesh: mesh_json(space.mesh()),
        skeleton: space.skeleton().iter().map(spline_json).collect(),
    };
    serde_json::to_string_pretty(&json).expect("space JSON serializes")
}

pub fn space_from_str(text: &str) -> Result<RMSpace> {
    let json: SpaceJson = serde_json::from_str(text).map_err(parse_err)?;
    RMSpace::new(json.s, mesh_from_json(&json.mesh)?, splines_from_json(&json.skeleton)?)
}

/// One line of a marks file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Rect(Rect),
    Point(Param, Param),
}

/// Marks file: one `x0 y0 x1 y1` rectangle or `@point x y` per line; blank
/// lines and `#` comments are skipped. Errors name the 1-based line.
pub fn parse_marks(text: &str) -> Result<Vec<(usize, Mark)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Parse(format!("marks line {}: {msg}", i + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        let mark = if fields[0] == "@point" {
            if fields.len() != 3 {
                return Err(err("expected `@point x y`"));
            }
            let x = parse_param(fields[1]).map_err(|_| err("bad coordinate"))?;
            let y = parse_param(fields[2]).map_err(|_| err("bad coordinate"))?;
            Mark::Point(x, y)
        } else {
            if fields.len() != 4 {
                return Err(err("expected `x0 y0 x1 y1`"));
            }
            let v = fields.iter().map(|f| parse_param(f)).collect::<Result<Vec<_>>>().map_err(|_| err("bad coordinate"))?;
            Mark::Rect(Rect::new(v[0], v[1], v[2], v[3]).map_err(|_| err("degenerate rectangle"))?)
        };
        out.push((i + 1, mark));
    }
    Ok(out)
}

/// Cells of `mesh` selected by `marks`. A rectangle selects the cells it
/// contains and must contain at least one; with `exact` it must be a cell.
/// A point selects the cell holding it (half-open, closed at the top and
/// right of the domain).
pub fn resolve_marks(marks: &[(usize, Mark)], mesh: &LRMesh, exact: bool) -> Result<Vec<Cell>> {
    let cells = mesh.cells();
    let domain = mesh.domain();
    let mut out = Vec::new();
    for &(line, mark) in marks {
        let err = |msg: &str| Error::Parse(format!("marks line {line}: {msg}"));
        let found: Vec<Cell> = match mark {
            Mark::Rect(r) if exact => cells.iter().filter(|c| **c == r).copied().collect(),
            Mark::Rect(r) => cells.iter().filter(|c| r.contains_rect(c)).copied().collect(),
            Mark::Point(x, y) => cells
                .iter()
                .filter(|c| {
                    let in_x = c.x0 <= x && (x < c.x1 || (x == c.x1 && c.x1 == domain.x1));
                    let in_y = c.y0 <= y && (y < c.y1 || (y == c.y1 && c.y1 == domain.y1));
                    in_x && in_y
                })
                .copied()
                .collect(),
        };
        if found.is_empty() {
            return Err(err("no such cell"));
        }
        out.extend(found);
    }
    out.sort();
    out.dedup();
    Ok(out)
}
