//! Air-gap check between connector bars and the tiles they run through.

use nalgebra::{Point3, Vector3};

use super::FlatPlate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearanceViolation {
    pub connector: usize,
    pub tile: usize,
    pub face: usize,
}

/// Separating-axis test between a triangle and the open box `|x_i| < h_i`
/// centred at the origin. Touching does not count as overlap.
fn tri_box_overlap(tri: [Vector3<f64>; 3], h: Vector3<f64>) -> bool {
    let separated = |axis: Vector3<f64>| -> bool {
        let n2 = axis.norm_squared();
        if n2 < 1e-24 {
            return false;
        }
        let p = tri.map(|v| v.dot(&axis));
        let r = h.x * axis.x.abs() + h.y * axis.y.abs() + h.z * axis.z.abs();
        let (lo, hi) = (p[0].min(p[1]).min(p[2]), p[0].max(p[1]).max(p[2]));
        let tol = 1e-9 * n2.sqrt() * (1.0 + h.norm());
        lo >= r - tol || hi <= -r + tol
    };
    let edges = [tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]];
    let boxes = [Vector3::x(), Vector3::y(), Vector3::z()];
    if boxes.iter().any(|&a| separated(a)) || separated(edges[0].cross(&edges[1])) {
        return false;
    }
    !boxes
        .iter()
        .any(|a| edges.iter().any(|e| separated(a.cross(e))))
}

/// Tile faces that reach into the envelope `clearance` around a connector,
/// outside the attachment zones at either end.
pub fn clearance_violations(plate: &FlatPlate) -> Vec<ClearanceViolation> {
    let pp = &plate.params;
    let mut out = Vec::new();
    for (ci, c) in plate.connectors.iter().enumerate() {
        let drift = |t: usize| plate.tiles.get(t).map_or(0.0, |t| t.tilt);
        let (u0, u1) = (drift(c.tiles[0]), c.length - drift(c.tiles[1]));
        if u1 <= u0 {
            continue;
        }
        let axis = c.axis();
        let side = Vector3::new(-axis.y, axis.x, 0.0);
        let along = Vector3::new(axis.x, axis.y, 0.0);
        let centre = Point3::new(c.start.x, c.start.y, 0.0) + along * (0.5 * (u0 + u1));
        let h = Vector3::new(
            0.5 * (u1 - u0),
            c.width / 2.0 + pp.clearance,
            c.thickness / 2.0 + pp.clearance,
        );
        let reach = h.norm();
        for (ti, tile) in plate.tiles.iter().enumerate() {
            let s = &tile.solid;
            let near = s
                .vertices
                .iter()
                .any(|v| (v - centre).xy().norm() < reach + 4.0 * plate_scale(tile));
            if !near {
                continue;
            }
            for (fi, f) in s.faces.iter().enumerate() {
                let tri = f.map(|i| {
                    let d = s.vertices[i] - centre;
                    Vector3::new(d.dot(&along), d.dot(&side), d.z)
                });
                if tri_box_overlap(tri, h) {
                    out.push(ClearanceViolation {
                        connector: ci,
                        tile: ti,
                        face: fi,
                    });
                }
            }
        }
    }
    out
}

fn plate_scale(tile: &super::Tile) -> f64 {
    (0..3)
        .map(|c| (tile.corners[(c + 1) % 3] - tile.corners[c]).norm())
        .fold(0.0, f64::max)
}
