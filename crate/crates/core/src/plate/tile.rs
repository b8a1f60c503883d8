//! Frustum tiles with connector channels.
//!
//! A tile is the image of `triangle × [−1, 1]` under
//! `Φ(p, s) = p + s·Σ bᵢ(p)·liftᵢ`, where `bᵢ` are barycentric coordinates in
//! the mid-plane triangle and `liftᵢ` the half-thickness offsets along the
//! vertex normals. The solid is stacked from three layers in `s`; channels
//! are removed from the middle layer only.

use std::collections::HashMap;

use nalgebra::{Point2, Point3, Vector2, Vector3};

use super::clip::{difference, intersection, signed_area, Poly};
use super::solid::{Solid, SolidBuilder};
use crate::error::{Error, Result};

/// A channel running from `start` along `dir` out through the tile wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Channel {
    pub start: Point2<f64>,
    pub dir: Vector2<f64>,
    pub half_width: f64,
}

impl Channel {
    /// Counter-clockwise rectangle covering the channel up to `reach`.
    pub fn strip(&self, reach: f64) -> Poly {
        let perp = Vector2::new(-self.dir.y, self.dir.x) * self.half_width;
        let far = self.dir * reach;
        vec![
            self.start - perp,
            self.start - perp + far,
            self.start + perp + far,
            self.start + perp,
        ]
    }
}

/// A vertex on a lateral wall: edge parameter `t` from corner `c` toward
/// corner `c + 1`, and thickness parameter `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallPoint {
    pub t: f64,
    pub s: f64,
    pub vertex: usize,
}

pub(crate) struct TileShape {
    pub solid: Solid,
    pub walls: [Vec<WallPoint>; 3],
    #[cfg_attr(not(test), allow(dead_code))]
    pub channel_area: f64,
}

/// Vertex key: (point id, level index).
type Key = (usize, usize);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Solid,
    Channel,
}

struct Frustum {
    corners: [Point2<f64>; 3],
    lifts: [Vector3<f64>; 3],
    inv_area2: f64,
}

impl Frustum {
    fn bary(&self, p: &Point2<f64>) -> [f64; 3] {
        let [a, b, c] = self.corners;
        let cross = |u: Vector2<f64>, v: Vector2<f64>| u.x * v.y - u.y * v.x;
        let b0 = cross(b - *p, c - *p) * self.inv_area2;
        let b1 = cross(c - *p, a - *p) * self.inv_area2;
        [b0, b1, 1.0 - b0 - b1]
    }

    fn map(&self, p: &Point2<f64>, s: f64) -> Point3<f64> {
        let b = self.bary(p);
        let lift = self.lifts[0] * b[0] + self.lifts[1] * b[1] + self.lifts[2] * b[2];
        Point3::new(p.x, p.y, 0.0) + lift * s
    }
}

/// Builds one tile. `corners` is the mid-plane triangle in plate
/// coordinates, `lifts` the offsets reached at `s = ±1`, `sigma` the channel
/// half-height in `s`.
pub(crate) fn build_tile(
    name: String,
    corners: [Point2<f64>; 3],
    lifts: [Vector3<f64>; 3],
    channels: &[Channel],
    sigma: f64,
) -> Result<TileShape> {
    let area = signed_area(&corners);
    if area.abs() < 1e-14 {
        return Err(Error::Geometry(format!(
            "{name}: degenerate mid-plane triangle"
        )));
    }
    let frustum = Frustum {
        corners,
        lifts,
        inv_area2: 1.0 / (2.0 * area),
    };
    let scale = (0..3)
        .map(|c| (corners[(c + 1) % 3] - corners[c]).norm())
        .fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    let min_area = 1e-12 * scale * scale;

    let tri: Poly = if area > 0.0 {
        corners.to_vec()
    } else {
        vec![corners[0], corners[2], corners[1]]
    };
    let reach = 4.0 * scale;
    let strips: Vec<Poly> = channels.iter().map(|ch| ch.strip(reach)).collect();

    let mut cells: Vec<(Kind, Poly)> = Vec::new();
    let mut solid_cells = vec![tri.clone()];
    for s in &strips {
        solid_cells = solid_cells
            .iter()
            .flat_map(|c| difference(c, s, min_area))
            .collect();
    }
    cells.extend(solid_cells.into_iter().map(|c| (Kind::Solid, c)));
    let mut channel_area = 0.0;
    for (k, s) in strips.iter().enumerate() {
        let mut pieces: Vec<Poly> = intersection(&tri, s, min_area).into_iter().collect();
        for prev in &strips[..k] {
            pieces = pieces
                .iter()
                .flat_map(|c| difference(c, prev, min_area))
                .collect();
        }
        channel_area += pieces.iter().map(|p| signed_area(p)).sum::<f64>();
        cells.extend(pieces.into_iter().map(|c| (Kind::Channel, c)));
    }

    // Shared vertex table with snapping, then T-junction removal.
    let mut points: Vec<Point2<f64>> = Vec::new();
    let mut snap = |p: Point2<f64>| -> usize {
        if let Some(i) = points.iter().position(|q| (q - p).norm() <= tol) {
            i
        } else {
            points.push(p);
            points.len() - 1
        }
    };
    let mut rings: Vec<(Kind, Vec<usize>)> = Vec::new();
    for (kind, poly) in &cells {
        let mut ids: Vec<usize> = poly.iter().map(|&p| snap(p)).collect();
        ids.dedup();
        while ids.len() > 1 && ids.first() == ids.last() {
            ids.pop();
        }
        if ids.len() >= 3 {
            rings.push((*kind, ids));
        }
    }
    let rings: Vec<(Kind, Vec<usize>)> = rings
        .into_iter()
        .filter(|(_, r)| signed_area(&r.iter().map(|&i| points[i]).collect::<Vec<_>>()) > min_area)
        .collect();
    let mut used: Vec<usize> = rings.iter().flat_map(|(_, r)| r.iter().copied()).collect();
    used.sort_unstable();
    used.dedup();
    let rings: Vec<(Kind, Vec<usize>)> = rings
        .into_iter()
        .map(|(kind, ring)| {
            let n = ring.len();
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (ring[i], ring[(i + 1) % n]);
                out.push(a);
                let (pa, pb) = (points[a], points[b]);
                let e = pb - pa;
                let len2 = e.norm_squared();
                let mut between: Vec<(f64, usize)> = used
                    .iter()
                    .filter(|&&v| v != a && v != b)
                    .filter_map(|&v| {
                        let t = (points[v] - pa).dot(&e) / len2;
                        let off = (pa + e * t - points[v]).norm();
                        (t > 0.0 && t < 1.0 && off <= tol).then_some((t, v))
                    })
                    .collect();
                between.sort_by(|x, y| x.0.total_cmp(&y.0));
                out.extend(between.into_iter().map(|(_, v)| v));
            }
            (kind, out)
        })
        .collect();

    let mut owner: HashMap<(usize, usize), Kind> = HashMap::new();
    for (kind, ring) in &rings {
        for i in 0..ring.len() {
            owner.insert((ring[i], ring[(i + 1) % ring.len()]), *kind);
        }
    }

    let levels = [-1.0, -sigma, sigma, 1.0];
    let mut b: SolidBuilder<Key> = SolidBuilder::new();
    let mut grid = |b: &mut SolidBuilder<Key>, v: usize, l: usize| {
        b.vertex((v, l), || frustum.map(&points[v], levels[l]))
    };
    let mut walls: [Vec<WallPoint>; 3] = Default::default();

    for (kind, ring) in &rings {
        let n = ring.len();
        let centre =
            Point2::from(ring.iter().map(|&i| points[i].coords).sum::<Vector2<f64>>() / n as f64);
        // caps: (level, faces up)
        let mut caps = vec![(0, false), (3, true)];
        if *kind == Kind::Channel {
            caps.extend([(1, true), (2, false)]);
        }
        for (l, up) in caps {
            let c = b.unkeyed(frustum.map(&centre, levels[l]));
            for i in 0..n {
                let (p, q) = (grid(&mut b, ring[i], l), grid(&mut b, ring[(i + 1) % n], l));
                if up {
                    b.tri(c, p, q);
                } else {
                    b.tri(c, q, p);
                }
            }
        }
        for i in 0..n {
            let (p, q) = (ring[i], ring[(i + 1) % n]);
            let spans: &[(usize, usize)] = match (owner.get(&(q, p)), kind) {
                (Some(Kind::Channel), Kind::Solid) => &[(1, 2)],
                (Some(_), _) => &[],
                (None, Kind::Solid) => &[(0, 1), (1, 2), (2, 3)],
                (None, Kind::Channel) => &[(0, 1), (2, 3)],
            };
            for &(lo, hi) in spans {
                let (p0, q0, q1, p1) = (
                    grid(&mut b, p, lo),
                    grid(&mut b, q, lo),
                    grid(&mut b, q, hi),
                    grid(&mut b, p, hi),
                );
                b.quad(p0, q0, q1, p1);
            }
            if !owner.contains_key(&(q, p)) {
                record_wall(
                    &frustum, &points, &levels, p, q, spans, &mut b, &mut grid, &mut walls,
                );
            }
        }
    }
    let solid = b.finish(name);
    for w in &mut walls {
        w.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.s.total_cmp(&y.s)));
        w.dedup_by_key(|x| x.vertex);
    }
    Ok(TileShape {
        solid,
        walls,
        channel_area,
    })
}

/// Notes the wall vertices of a boundary segment under its triangle edge.
#[allow(clippy::too_many_arguments)]
fn record_wall(
    frustum: &Frustum,
    points: &[Point2<f64>],
    levels: &[f64; 4],
    p: usize,
    q: usize,
    spans: &[(usize, usize)],
    b: &mut SolidBuilder<Key>,
    grid: &mut impl FnMut(&mut SolidBuilder<Key>, usize, usize) -> usize,
    walls: &mut [Vec<WallPoint>; 3],
) {
    let (bp, bq) = (frustum.bary(&points[p]), frustum.bary(&points[q]));
    // the edge opposite the corner whose coordinate vanishes at both ends
    let Some(opp) =
        (0..3).min_by(|&x, &y| (bp[x].abs() + bq[x].abs()).total_cmp(&(bp[y].abs() + bq[y].abs())))
    else {
        return;
    };
    let edge = (opp + 1) % 3;
    let next = (edge + 1) % 3;
    for (v, bc) in [(p, bp), (q, bq)] {
        for &(lo, hi) in spans {
            for l in [lo, hi] {
                walls[edge].push(WallPoint {
                    t: bc[next],
                    s: levels[l],
                    vertex: grid(b, v, l),
                });
            }
        }
    }
}
