use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::mesh::Rect;
use crate::param::int;

/// Scalar field on the plane.
pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `-Δu = f` in the domain, `u = u_D` on its boundary.
#[derive(Clone)]
pub struct PoissonProblem {
    pub name: String,
    pub domain: Rect,
    pub f: Field,
    pub u_d: Field,
    pub u_exact: Option<Field>,
}

impl fmt::Debug for PoissonProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("has_exact", &self.u_exact.is_some())
            .finish()
    }
}

fn unit_square() -> Rect {
    Rect::new(int(0), int(0), int(1), int(1)).expect("unit square")
}

impl PoissonProblem {
    /// Problem with a known solution: `f = -Δu`, `u_D = u`.
    pub fn manufactured(name: &str, domain: Rect, u: Field, f: Field) -> PoissonProblem {
        PoissonProblem { name: name.to_string(), domain, f, u_d: u.clone(), u_exact: Some(u) }
    }

    /// Steep circular layer `u = atan(100 (|x - c| - π/3))`, `c = (1.25, -0.25)`,
    /// on the unit square.
    pub fn arctan() -> PoissonProblem {
        const CX: f64 = 1.25;
        const CY: f64 = -0.25;
        const K: f64 = 100.0;
        let u: Field = Arc::new(|x, y| (K * ((x - CX).hypot(y - CY) - PI / 3.0)).atan());
        let f: Field = Arc::new(|x, y| {
            let r = (x - CX).hypot(y - CY);
            let g = K * (r - PI / 3.0);
            let q = 1.0 + g * g;
            let du = K / q;
            let d2u = -2.0 * K * K * g / (q * q);
            -(d2u + du / r)
        });
        PoissonProblem::manufactured("arctan", unit_square(), u, f)
    }

    /// `u = sin(πx) sin(πy)` on the unit square.
    pub fn smooth() -> PoissonProblem {
        let u: Field = Arc::new(|x, y| (PI * x).sin() * (PI * y).sin());
        let f: Field = Arc::new(|x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        PoissonProblem::manufactured("smooth", unit_square(), u, f)
    }

    /// Harmonic `u = x` on the unit square.
    pub fn linear() -> PoissonProblem {
        PoissonProblem::manufactured("linear", unit_square(), Arc::new(|x, _| x), Arc::new(|_, _| 0.0))
    }

    /// `u ≡ c` on the unit square.
    pub fn constant(c: f64) -> PoissonProblem {
        PoissonProblem::manufactured("constant", unit_square(), Arc::new(move |_, _| c), Arc::new(|_, _| 0.0))
    }

    pub fn preset(name: &str) -> Option<PoissonProblem> {
        match name {
            "arctan" => Some(PoissonProblem::arctan()),
            "smooth" => Some(PoissonProblem::smooth()),
            "linear" => Some(PoissonProblem::linear()),
            _ => None,
        }
    }
}
