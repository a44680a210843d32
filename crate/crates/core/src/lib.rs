//! LR B-spline refinement engine with RM B-spline construction.

pub mod error;
pub mod io;
pub mod mesh;
pub mod param;
pub mod poisson;
pub mod rm;
pub mod spline;
pub mod svg;

pub use error::{Error, Result};
pub use mesh::{Cell, Direction, LRMesh, MeshSegment, Rect};
pub use param::{param, parse_param, Param};
pub use rm::{admissible_check, lift_function, lift_space, BSplineSystem, RMSpace};
pub use spline::{LocalKnotVector, SplineSet, TensorBSpline};
