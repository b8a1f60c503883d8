use std::cmp::Ordering;

use nalgebra::Point2;

use super::exact::orient2d;

/// Counter-clockwise copy of a triangle, `None` when it has no area.
fn ccw(t: [Point2<f64>; 3]) -> Option<[Point2<f64>; 3]> {
    match orient2d(&t[0], &t[1], &t[2]) {
        Ordering::Greater => Some(t),
        Ordering::Less => Some([t[0], t[2], t[1]]),
        Ordering::Equal => None,
    }
}

/// Some edge of `a` has all of `b` on its closed outer side.
fn separates(a: &[Point2<f64>; 3], b: &[Point2<f64>; 3]) -> bool {
    (0..3).any(|e| {
        let (p, q) = (a[e], a[(e + 1) % 3]);
        b.iter().all(|r| orient2d(&p, &q, r) != Ordering::Greater)
    })
}

/// Whether the interiors of two triangles intersect. Triangles that only
/// touch along an edge or at a point do not overlap.
pub fn triangles_overlap(a: [Point2<f64>; 3], b: [Point2<f64>; 3]) -> bool {
    match (ccw(a), ccw(b)) {
        (Some(a), Some(b)) => !separates(&a, &b) && !separates(&b, &a),
        _ => false,
    }
}

/// Pairs `(s, t)`, `s < t`, of overlapping triangles, found by a sweep over
/// the x extents.
pub fn overlapping_pairs(tris: &[[Point2<f64>; 3]]) -> Vec<(usize, usize)> {
    let span = |t: &[Point2<f64>; 3], f: fn(&Point2<f64>) -> f64| {
        let v = t.map(|p| f(&p));
        (v[0].min(v[1]).min(v[2]), v[0].max(v[1]).max(v[2]))
    };
    let xs: Vec<(f64, f64)> = tris.iter().map(|t| span(t, |p| p.x)).collect();
    let ys: Vec<(f64, f64)> = tris.iter().map(|t| span(t, |p| p.y)).collect();
    let mut order: Vec<usize> = (0..tris.len()).collect();
    order.sort_by(|&a, &b| xs[a].0.total_cmp(&xs[b].0).then(a.cmp(&b)));
    let mut out = Vec::new();
    for (n, &s) in order.iter().enumerate() {
        for &t in &order[n + 1..] {
            if xs[t].0 > xs[s].1 {
                break;
            }
            if ys[t].0 > ys[s].1 || ys[s].0 > ys[t].1 {
                continue;
            }
            if triangles_overlap(tris[s], tris[t]) {
                out.push((s.min(t), s.max(t)));
            }
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    #[test]
    fn cases() {
        let a = [p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)];
        assert!(triangles_overlap(
            a,
            [p(0.2, 0.2), p(1.2, 0.2), p(0.2, 1.2)]
        ));
        // shared edge
        assert!(!triangles_overlap(
            a,
            [p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]
        ));
        // shared vertex
        assert!(!triangles_overlap(
            a,
            [p(1.0, 0.0), p(2.0, 0.0), p(1.0, 1.0)]
        ));
        // contained
        assert!(triangles_overlap(
            a,
            [p(0.1, 0.1), p(0.2, 0.1), p(0.1, 0.2)]
        ));
        // identical, clockwise copy
        assert!(triangles_overlap(a, [a[0], a[2], a[1]]));
        // degenerate
        assert!(!triangles_overlap(
            a,
            [p(0.1, 0.1), p(0.2, 0.2), p(0.3, 0.3)]
        ));
        // star of david
        let up = [p(0.0, 0.0), p(2.0, 0.0), p(1.0, 1.8)];
        let down = [p(0.0, 1.2), p(1.0, -0.6), p(2.0, 1.2)];
        assert!(triangles_overlap(up, down));
    }

    fn brute(tris: &[[Point2<f64>; 3]]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 0..tris.len() {
            for t in s + 1..tris.len() {
                if triangles_overlap(tris[s], tris[t]) {
                    out.push((s, t));
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn sweep_matches_all_pairs(raw in prop::collection::vec(prop::array::uniform6(0i32..8), 1..25)) {
            let tris: Vec<[Point2<f64>; 3]> = raw
                .iter()
                .map(|v| [p(v[0] as f64, v[1] as f64), p(v[2] as f64, v[3] as f64), p(v[4] as f64, v[5] as f64)])
                .collect();
            prop_assert_eq!(overlapping_pairs(&tris), brute(&tris));
        }

        #[test]
        fn overlap_is_symmetric(v in prop::array::uniform12(-3.0..3.0f64)) {
            let a = [p(v[0], v[1]), p(v[2], v[3]), p(v[4], v[5])];
            let b = [p(v[6], v[7]), p(v[8], v[9]), p(v[10], v[11])];
            prop_assert_eq!(triangles_overlap(a, b), triangles_overlap(b, a));
        }
    }
}
