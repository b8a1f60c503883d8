//! Convex polygon clipping in the plane.

use nalgebra::{Point2, Vector2};

pub(crate) type Poly = Vec<Point2<f64>>;

/// `n·p ≤ c`.
#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    n: Vector2<f64>,
    c: f64,
}

impl HalfPlane {
    fn eval(&self, p: &Point2<f64>) -> f64 {
        self.n.dot(&p.coords) - self.c
    }

    fn complement(self) -> Self {
        HalfPlane {
            n: -self.n,
            c: -self.c,
        }
    }
}

pub(crate) fn signed_area(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - a.y * b.x
        })
        .sum::<f64>()
        * 0.5
}

/// Sutherland-Hodgman against one half-plane.
fn clip(poly: &[Point2<f64>], h: HalfPlane) -> Poly {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (da, db) = (h.eval(&a), h.eval(&b));
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Outward edge half-planes of a counter-clockwise convex polygon.
fn half_planes(poly: &[Point2<f64>]) -> Vec<HalfPlane> {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let e = b - a;
            let nrm = Vector2::new(e.y, -e.x).normalize();
            HalfPlane {
                n: nrm,
                c: nrm.dot(&a.coords),
            }
        })
        .collect()
}

fn keep(p: Poly, min_area: f64) -> Option<Poly> {
    (p.len() >= 3 && signed_area(&p) > min_area).then_some(p)
}

pub(crate) fn intersection(p: &[Point2<f64>], c: &[Point2<f64>], min_area: f64) -> Option<Poly> {
    let mut out = p.to_vec();
    for h in half_planes(c) {
        out = clip(&out, h);
    }
    keep(out, min_area)
}

/// `p \ c` as convex pieces, both inputs convex and counter-clockwise.
pub(crate) fn difference(p: &[Point2<f64>], c: &[Point2<f64>], min_area: f64) -> Vec<Poly> {
    let hs = half_planes(c);
    let mut pieces = Vec::new();
    for i in 0..hs.len() {
        let mut piece = clip(p, hs[i].complement());
        for h in &hs[..i] {
            piece = clip(&piece, *h);
        }
        if let Some(piece) = keep(piece, min_area) {
            pieces.push(piece);
        }
    }
    pieces
}
