//! Initial planar parameterization: Tutte embedding onto a circle followed by
//! as-rigid-as-possible local/global iterations with a free boundary.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Point2, Vector2};

use crate::error::{Error, Result};
use crate::linalg::{SparseCholesky, SymmetricBuilder};
use crate::mesh::{find, union, TargetMesh};

pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-7;
const MIN_COT_WEIGHT: f64 = 1e-6;

/// A planar map of a mesh together with each triangle's rest shape laid flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Param2D {
    /// One point per mesh vertex.
    pub uv: Vec<Point2<f64>>,
    /// Per triangle, the edge vectors `x[c+1] - x[c]` of the 3D triangle
    /// placed isometrically in the plane.
    pub frames: Vec<[Vector2<f64>; 3]>,
}

impl Param2D {
    pub fn signed_area(&self, mesh: &TargetMesh, t: usize) -> f64 {
        let [a, b, c] = mesh.triangles()[t].map(|v| self.uv[v]);
        0.5 * (b - a).perp(&(c - a))
    }

    pub fn flipped_count(&self, mesh: &TargetMesh) -> usize {
        (0..mesh.triangle_count())
            .filter(|&t| self.signed_area(mesh, t) <= 0.0)
            .count()
    }
}

/// Isometric planar rest shapes: corner 0 at the origin, corner 1 on +x.
pub fn rest_frames(mesh: &TargetMesh) -> Vec<[Vector2<f64>; 3]> {
    (0..mesh.triangle_count())
        .map(|t| {
            let [p0, p1, p2] = mesh.corners(t);
            let (e0, e2) = (p1 - p0, p2 - p0);
            let l0 = e0.norm();
            let x2 = e2.dot(&e0) / l0;
            let y2 = e0.cross(&e2).norm() / l0;
            let q1 = Vector2::new(l0, 0.0);
            let q2 = Vector2::new(x2, y2);
            [q1, q2 - q1, -q2]
        })
        .collect()
}

/// Half-cotangent weight per triangle edge `c -> c+1`, from the angle at the
/// opposite corner, clamped from below.
fn cot_weights(frames: &[[Vector2<f64>; 3]]) -> Vec<[f64; 3]> {
    frames
        .iter()
        .map(|f| {
            std::array::from_fn(|c| {
                let u = -f[(c + 1) % 3];
                let v = f[(c + 2) % 3];
                let cot = u.dot(&v) / u.perp(&v).abs();
                (0.5 * cot).max(MIN_COT_WEIGHT)
            })
        })
        .collect()
}

fn components(mesh: &TargetMesh) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..mesh.vertex_count()).collect();
    for tri in mesh.triangles() {
        union(&mut parent, tri[0], tri[1]);
        union(&mut parent, tri[1], tri[2]);
    }
    (0..mesh.vertex_count())
        .map(|v| find(&mut parent, v))
        .collect()
}

/// Maps the longest boundary loop to a circle of equal perimeter by arc length
/// and places every other vertex at the uniform average of its neighbours.
pub fn tutte_embed(mesh: &TargetMesh) -> Result<Param2D> {
    let comp = components(mesh);
    if comp.iter().any(|&c| c != comp[0]) {
        return Err(Error::Topology(
            "parameterization needs a connected mesh".into(),
        ));
    }
    let pts = mesh.vertices();
    let loop_len = |l: &Vec<usize>| -> f64 {
        (0..l.len())
            .map(|i| (pts[l[(i + 1) % l.len()]] - pts[l[i]]).norm())
            .sum()
    };
    let loops = mesh.boundary_loops();
    let outer = loops
        .iter()
        .max_by(|a, b| loop_len(a).total_cmp(&loop_len(b)))
        .ok_or_else(|| Error::Topology("mesh has no boundary loop".into()))?;
    let perimeter = loop_len(outer);
    let radius = perimeter / (2.0 * PI);

    let n = mesh.vertex_count();
    let mut uv = vec![Point2::origin(); n];
    let mut fixed = vec![false; n];
    let mut s = 0.0;
    for (i, &v) in outer.iter().enumerate() {
        let phi = 2.0 * PI * s / perimeter;
        uv[v] = Point2::new(radius * phi.cos(), radius * phi.sin());
        fixed[v] = true;
        s += (pts[outer[(i + 1) % outer.len()]] - pts[v]).norm();
    }

    let adj = mesh.adjacency();
    let free: Vec<usize> = (0..n).filter(|&v| !fixed[v]).collect();
    if !free.is_empty() {
        let mut index = vec![usize::MAX; n];
        for (k, &v) in free.iter().enumerate() {
            index[v] = k;
        }
        let mut a = SymmetricBuilder::new(free.len());
        let mut rhs = vec![Vector2::zeros(); free.len()];
        for e in &adj.edges {
            let [p, q] = e.vertices;
            for (x, y) in [(p, q), (q, p)] {
                if !fixed[x] {
                    a.add(index[x], index[x], 1.0);
                    if fixed[y] {
                        rhs[index[x]] += uv[y].coords;
                    }
                }
            }
            if !fixed[p] && !fixed[q] {
                a.add(index[p], index[q], -1.0);
            }
        }
        let chol = a.factor()?;
        let xs = chol.solve(&rhs.iter().map(|r| r.x).collect::<Vec<_>>());
        let ys = chol.solve(&rhs.iter().map(|r| r.y).collect::<Vec<_>>());
        for (k, &v) in free.iter().enumerate() {
            uv[v] = Point2::new(xs[k], ys[k]);
        }
    }
    Ok(Param2D {
        uv,
        frames: rest_frames(mesh),
    })
}

/// Closed-form best rotation taking the rest edges onto the current edges.
pub fn fit_rotation(
    weights: &[f64; 3],
    rest: &[Vector2<f64>; 3],
    current: &[Vector2<f64>; 3],
) -> Matrix2<f64> {
    let mut s = Matrix2::zeros();
    for c in 0..3 {
        s += weights[c] * current[c] * rest[c].transpose();
    }
    let theta = (s[(1, 0)] - s[(0, 1)]).atan2(s[(0, 0)] + s[(1, 1)]);
    let (sin, cos) = theta.sin_cos();
    Matrix2::new(cos, -sin, sin, cos)
}

struct Arap<'a> {
    mesh: &'a TargetMesh,
    frames: Vec<[Vector2<f64>; 3]>,
    weights: Vec<[f64; 3]>,
    pinned: Vec<bool>,
    index: Vec<usize>,
    chol: SparseCholesky,
}

impl<'a> Arap<'a> {
    fn new(mesh: &'a TargetMesh) -> Result<Self> {
        let frames = rest_frames(mesh);
        let weights = cot_weights(&frames);
        let n = mesh.vertex_count();
        let comp = components(mesh);
        let mut pinned = vec![false; n];
        let mut seen = std::collections::BTreeSet::new();
        for v in 0..n {
            if seen.insert(comp[v]) {
                pinned[v] = true;
            }
        }
        let mut index = vec![usize::MAX; n];
        let mut k = 0;
        for v in 0..n {
            if !pinned[v] {
                index[v] = k;
                k += 1;
            }
        }
        let mut a = SymmetricBuilder::new(k);
        for (tri, w) in mesh.triangles().iter().zip(&weights) {
            for c in 0..3 {
                let (p, q) = (tri[c], tri[(c + 1) % 3]);
                if !pinned[p] {
                    a.add(index[p], index[p], w[c]);
                }
                if !pinned[q] {
                    a.add(index[q], index[q], w[c]);
                }
                if !pinned[p] && !pinned[q] {
                    a.add(index[p], index[q], -w[c]);
                }
            }
        }
        let chol = a.factor()?;
        Ok(Self {
            mesh,
            frames,
            weights,
            pinned,
            index,
            chol,
        })
    }

    fn edges(&self, uv: &[Point2<f64>], t: usize) -> [Vector2<f64>; 3] {
        let tri = self.mesh.triangles()[t];
        std::array::from_fn(|c| uv[tri[(c + 1) % 3]] - uv[tri[c]])
    }

    fn rotations(&self, uv: &[Point2<f64>]) -> Vec<Matrix2<f64>> {
        (0..self.frames.len())
            .map(|t| fit_rotation(&self.weights[t], &self.frames[t], &self.edges(uv, t)))
            .collect()
    }

    fn energy_with(&self, uv: &[Point2<f64>], rot: &[Matrix2<f64>]) -> f64 {
        let mut e = 0.0;
        for t in 0..self.frames.len() {
            let cur = self.edges(uv, t);
            for c in 0..3 {
                e += self.weights[t][c] * (cur[c] - rot[t] * self.frames[t][c]).norm_squared();
            }
        }
        e
    }

    fn global_step(&self, uv: &[Point2<f64>], rot: &[Matrix2<f64>]) -> Vec<Point2<f64>> {
        let k = self.chol.dim();
        let mut bx = vec![0.0; k];
        let mut by = vec![0.0; k];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            for c in 0..3 {
                let (p, q) = (tri[c], tri[(c + 1) % 3]);
                let w = self.weights[t][c];
                let r = w * (rot[t] * self.frames[t][c]);
                // d/du_q of w‖u_q − u_p − r‖²  ⇒  rows p and q
                if !self.pinned[q] {
                    bx[self.index[q]] += r.x;
                    by[self.index[q]] += r.y;
                    if self.pinned[p] {
                        bx[self.index[q]] += w * uv[p].x;
                        by[self.index[q]] += w * uv[p].y;
                    }
                }
                if !self.pinned[p] {
                    bx[self.index[p]] -= r.x;
                    by[self.index[p]] -= r.y;
                    if self.pinned[q] {
                        bx[self.index[p]] += w * uv[q].x;
                        by[self.index[p]] += w * uv[q].y;
                    }
                }
            }
        }
        let xs = self.chol.solve(&bx);
        let ys = self.chol.solve(&by);
        let mut out = uv.to_vec();
        for v in 0..out.len() {
            if !self.pinned[v] {
                out[v] = Point2::new(xs[self.index[v]], ys[self.index[v]]);
            }
        }
        out
    }
}

/// ARAP energy of `uv`, each triangle measured against its best-fit rotation.
pub fn arap_energy(mesh: &TargetMesh, uv: &[Point2<f64>]) -> Result<f64> {
    let arap = Arap::new(mesh)?;
    Ok(arap.energy_with(uv, &arap.rotations(uv)))
}

/// Runs ARAP from `init`; see [`arap_parameterize_traced`].
pub fn arap_parameterize(
    mesh: &TargetMesh,
    init: &Param2D,
    max_iters: usize,
    tol: f64,
) -> Result<Param2D> {
    arap_parameterize_traced(mesh, init, max_iters, tol).map(|(p, _)| p)
}

/// Runs ARAP from `init` and returns the energy before the first iteration
/// followed by the energy after each iteration.
pub fn arap_parameterize_traced(
    mesh: &TargetMesh,
    init: &Param2D,
    max_iters: usize,
    tol: f64,
) -> Result<(Param2D, Vec<f64>)> {
    if init.uv.len() != mesh.vertex_count() {
        return Err(Error::Topology(format!(
            "parameterization has {} points for {} vertices",
            init.uv.len(),
            mesh.vertex_count()
        )));
    }
    let arap = Arap::new(mesh)?;
    let mut uv = init.uv.clone();
    let mut rot = arap.rotations(&uv);
    let mut energy = arap.energy_with(&uv, &rot);
    let mut trace = vec![energy];
    for _ in 0..max_iters.max(1) {
        let next = arap.global_step(&uv, &rot);
        let next_rot = arap.rotations(&next);
        let next_energy = arap.energy_with(&next, &next_rot);
        if !next_energy.is_finite() {
            return Err(Error::NonFinite("ARAP energy is not finite".into()));
        }
        trace.push(next_energy);
        let decrease = energy - next_energy;
        uv = next;
        rot = next_rot;
        let prev = energy;
        energy = next_energy;
        if energy == 0.0 || decrease <= tol * prev {
            break;
        }
    }
    Ok((
        Param2D {
            uv,
            frames: arap.frames,
        },
        trace,
    ))
}
