use thiserror::Error;

use crate::mesh::Direction;
use crate::param::Param;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate domain or rectangle")]
    DegenerateDomain,
    #[error("invalid mesh construction: {0}")]
    InvalidMesh(String),
    #[error("multiplicity {mult} outside [1, {cap}]")]
    MultiplicityCap { mult: u32, cap: u32 },
    #[error("segment lies outside the domain")]
    OutsideDomain,
    #[error("segment has zero length")]
    ZeroLength,
    #[error("{direction:?} segment at {fixed} has a dangling endpoint at {at}")]
    DanglingEndpoint { direction: Direction, fixed: Param, at: Param },
    #[error("mesh is not in bilinear shape (internal 1, boundary 2)")]
    NotBilinearShape,
    #[error("mesh is not in RM shape for s = {s}")]
    NotRmShape { s: u32 },
    #[error("invalid local knot vector: {0}")]
    InvalidKnotVector(String),
    #[error("knot {t} outside the open knot range")]
    KnotOutOfRange { t: Param },
    #[error("knot insertion would exceed multiplicity {cap}")]
    KnotMultiplicity { cap: usize },
    #[error("segment crosses no B-spline support")]
    NoSupportTraversed,
    #[error("meshline extension did not terminate within {0} steps")]
    ExtensionDidNotTerminate(usize),
    #[error("spline set is overloaded on {0} cell(s)")]
    Overloaded(usize),
    #[error("mesh is not reachable as an LR mesh")]
    NotLrMesh,
    #[error("point ({0}, {1}) outside the domain")]
    PointOutsideDomain(f64, f64),
    #[error("linear system is singular or not positive definite")]
    SingularSystem,
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("marking requires a non-empty error map")]
    EmptyErrorMap,
    #[error("theta must lie in (0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("the problem has no exact solution to estimate against")]
    MissingExactSolution,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
