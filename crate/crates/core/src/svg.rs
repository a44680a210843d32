//! SVG drawing of a mesh. A segment of multiplicity `k` is drawn as `k`
//! parallel hairlines.

use std::fmt::Write;

use crate::mesh::{Direction, LRMesh};
use crate::param::to_f64;

pub const VIEWPORT: f64 = 1000.0;
/// Spacing of parallel strokes as a fraction of the domain width.
pub const STROKE_OFFSET: f64 = 0.005;

pub fn render(mesh: &LRMesh) -> String {
    let d = mesh.domain();
    let (x0, y0, x1, y1) = (to_f64(d.x0), to_f64(d.y0), to_f64(d.x1), to_f64(d.y1));
    let scale = VIEWPORT / (x1 - x0).max(y1 - y0);
    let px = |x: f64| (x - x0) * scale;
    let py = |y: f64| VIEWPORT - (y - y0) * scale;
    let gap = STROKE_OFFSET * (x1 - x0) * scale;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{v}" height="{v}" viewBox="0 0 {v} {v}">"#,
        v = VIEWPORT
    )
    .unwrap();
    writeln!(
        out,
        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black" stroke-width="2"/>"#,
        px(x0),
        py(y1),
        px(x1) - px(x0),
        py(y0) - py(y1)
    )
    .unwrap();
    for seg in mesh.internal_segments() {
        let k = seg.multiplicity as usize;
        let (fixed, lo, hi) = (to_f64(seg.fixed), to_f64(seg.lo), to_f64(seg.hi));
        for i in 0..k {
            let shift = (i as f64 - (k as f64 - 1.0) / 2.0) * gap;
            let (ax, ay, bx, by) = match seg.direction {
                Direction::Vertical => (px(fixed) + shift, py(lo), px(fixed) + shift, py(hi)),
                Direction::Horizontal => (px(lo), py(fixed) + shift, px(hi), py(fixed) + shift),
            };
            writeln!(
                out,
                r#"<line x1="{ax:.3}" y1="{ay:.3}" x2="{bx:.3}" y2="{by:.3}" stroke="black" stroke-width="0.75"/>"#
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{MeshSegment, Rect};
    use crate::param::int;

    #[test]
    fn boundary_only() {
        let mesh = LRMesh::boundary_only(Rect::new(int(0), int(0), int(1), int(1)).unwrap(), 1).unwrap();
        let svg = render(&mesh);
        assert_eq!(svg.matches("<rect").count(), 1);
        assert_eq!(svg.matches("<line").count(), 0);
    }

    #[test]
    fn strokes_follow_multiplicity() {
        let domain = Rect::new(int(0), int(0), int(4), int(4)).unwrap();
        let mesh = LRMesh::boundary_only(domain, 2).unwrap();
        let mesh = mesh.insert_segment(&MeshSegment::vertical(int(2), int(0), int(4), 3)).unwrap();
        let svg = render(&mesh);
        assert_eq!(svg.matches("<line").count(), 3);
        assert_eq!(svg, render(&mesh));
    }
}
