//! Isotropic remeshing: split, collapse, flip, tangential relaxation.
//!
//! Boundary vertices never move. Boundary edges are only ever split at their
//! midpoints, so the boundary polyline is reproduced exactly. Interior
//! vertices are projected back onto the input surface after every move.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Point3, Vector3};

use super::TargetMesh;
use crate::error::{Error, Result};
use crate::spatial::TriangleBvh;

const SPLIT_RATIO: f64 = 4.0 / 3.0;
const COLLAPSE_RATIO: f64 = 4.0 / 5.0;
const MAX_SPLIT_PASSES: usize = 32;

/// Remeshes `mesh` toward uniform edge length `target_len` with `iters`
/// rounds of split, collapse, flip and smoothing.
pub fn isotropic_remesh(mesh: &TargetMesh, target_len: f64, iters: usize) -> Result<TargetMesh> {
    if !(target_len > 0.0 && target_len.is_finite()) {
        return Err(Error::Remesh(format!(
            "target length must be positive, got {target_len}"
        )));
    }
    let mut w = Work {
        bvh: TriangleBvh::new(mesh.vertices(), mesh.triangles()),
        verts: mesh.vertices().to_vec(),
        fixed: mesh.boundary_flags().to_vec(),
        tris: mesh.triangles().to_vec(),
        hi: SPLIT_RATIO * target_len,
        lo: COLLAPSE_RATIO * target_len,
        area_floor: 1e-10 * target_len * target_len,
    };
    for round in 0..iters {
        w.split_long_edges();
        w.collapse_short_edges();
        w.flip_for_valence();
        w.smooth();
        w.check(round)?;
    }
    let (verts, tris) = w.compact();
    TargetMesh::new(verts, tris)
        .map_err(|e| Error::Remesh(format!("remeshed surface is invalid: {e}")))
}

struct Work {
    bvh: TriangleBvh,
    verts: Vec<Point3<f64>>,
    fixed: Vec<bool>,
    tris: Vec<[usize; 3]>,
    hi: f64,
    lo: f64,
    area_floor: f64,
}

type EdgeMap = BTreeMap<[usize; 2], Vec<usize>>;

fn key(a: usize, b: usize) -> [usize; 2] {
    [a.min(b), a.max(b)]
}

fn normal(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Vector3<f64> {
    (b - a).cross(&(c - a))
}

fn angle_at(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let (u, v) = (a - p, b - p);
    u.cross(&v).norm().atan2(u.dot(&v))
}

impl Work {
    fn project(&self, p: &Point3<f64>) -> Point3<f64> {
        self.bvh.nearest(p).map_or(*p, |n| n.point)
    }

    fn len(&self, e: [usize; 2]) -> f64 {
        (self.verts[e[1]] - self.verts[e[0]]).norm()
    }

    fn edges(&self) -> EdgeMap {
        let mut map = EdgeMap::new();
        for (t, tri) in self.tris.iter().enumerate() {
            for c in 0..3 {
                map.entry(key(tri[c], tri[(c + 1) % 3]))
                    .or_default()
                    .push(t);
            }
        }
        map
    }

    fn neighbours(&self) -> Vec<BTreeSet<usize>> {
        let mut nb = vec![BTreeSet::new(); self.verts.len()];
        for tri in &self.tris {
            for c in 0..3 {
                let (a, b) = (tri[c], tri[(c + 1) % 3]);
                nb[a].insert(b);
                nb[b].insert(a);
            }
        }
        nb
    }

    fn incident(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.verts.len()];
        for (t, tri) in self.tris.iter().enumerate() {
            for &v in tri {
                inc[v].push(t);
            }
        }
        inc
    }

    fn split_long_edges(&mut self) {
        for _ in 0..MAX_SPLIT_PASSES {
            let edges = self.edges();
            let mut touched = vec![false; self.tris.len()];
            let mut changed = false;
            for (e, tris) in &edges {
                if self.len(*e) <= self.hi || tris.iter().any(|&t| touched[t]) {
                    continue;
                }
                let mid = nalgebra::center(&self.verts[e[0]], &self.verts[e[1]]);
                let boundary = tris.len() == 1;
                let m = self.verts.len();
                self.verts
                    .push(if boundary { mid } else { self.project(&mid) });
                self.fixed.push(boundary);
                for &t in tris {
                    let tri = self.tris[t];
                    let c = (0..3)
                        .find(|&c| key(tri[c], tri[(c + 1) % 3]) == *e)
                        .expect("edge belongs to its triangle");
                    let (a, b, o) = (tri[c], tri[(c + 1) % 3], tri[(c + 2) % 3]);
                    self.tris[t] = [a, m, o];
                    self.tris.push([m, b, o]);
                    touched[t] = true;
                    touched.push(true);
                }
                changed = true;
            }
            if !changed {
                break;
            }
        }
    }

    fn collapse_short_edges(&mut self) {
        for _ in 0..MAX_SPLIT_PASSES {
            if !self.collapse_pass() {
                break;
            }
        }
    }

    fn collapse_pass(&mut self) -> bool {
        let edges = self.edges();
        let nb = self.neighbours();
        let inc = self.incident();
        let mut touched = vec![false; self.verts.len()];
        let mut dead = vec![false; self.tris.len()];
        for (e, etris) in &edges {
            let [a, b] = *e;
            if touched[a] || touched[b] || self.len(*e) >= self.lo {
                continue;
            }
            // `u` is removed and merged into `v`.
            let (u, v, target) = match (self.fixed[a], self.fixed[b]) {
                (true, true) => continue,
                (false, true) => (a, b, self.verts[b]),
                (true, false) => (b, a, self.verts[a]),
                (false, false) => {
                    let mid = nalgebra::center(&self.verts[a], &self.verts[b]);
                    (b, a, self.project(&mid))
                }
            };
            if nb[u].intersection(&nb[v]).count() != etris.len() {
                continue;
            }
            if nb[u]
                .iter()
                .chain(&nb[v])
                .filter(|&&w| w != u && w != v)
                .any(|&w| (self.verts[w] - target).norm() > self.hi)
            {
                continue;
            }
            let mut ok = true;
            for &t in inc[u].iter().chain(&inc[v]) {
                let tri = self.tris[t];
                if tri.contains(&u) && tri.contains(&v) {
                    continue;
                }
                let old = normal(
                    &self.verts[tri[0]],
                    &self.verts[tri[1]],
                    &self.verts[tri[2]],
                );
                let p = tri.map(|x| {
                    if x == u || x == v {
                        target
                    } else {
                        self.verts[x]
                    }
                });
                let new = normal(&p[0], &p[1], &p[2]);
                if new.dot(&old) <= 0.0 || new.norm() < self.area_floor {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            self.verts[v] = target;
            for &t in &inc[u] {
                if self.tris[t].contains(&v) {
                    dead[t] = true;
                } else {
                    for x in self.tris[t].iter_mut() {
                        if *x == u {
                            *x = v;
                        }
                    }
                }
            }
            for &w in nb[u].iter().chain(&nb[v]) {
                touched[w] = true;
            }
            touched[u] = true;
            touched[v] = true;
        }
        let mut i = 0;
        self.tris.retain(|_| {
            i += 1;
            !dead[i - 1]
        });
        dead.contains(&true)
    }

    fn flip_for_valence(&mut self) {
        let edges = self.edges();
        let nb = self.neighbours();
        let mut valence: Vec<i64> = nb.iter().map(|s| s.len() as i64).collect();
        let target = |v: usize, fixed: &[bool]| if fixed[v] { 4 } else { 6 };
        let mut touched = vec![false; self.verts.len()];
        let mut created: BTreeSet<[usize; 2]> = BTreeSet::new();
        for (e, etris) in &edges {
            if etris.len() != 2 {
                continue;
            }
            let [t1, t2] = [etris[0], etris[1]];
            let (tri1, tri2) = (self.tris[t1], self.tris[t2]);
            if tri1.iter().chain(&tri2).any(|&x| touched[x]) {
                continue;
            }
            let c1 = (0..3)
                .find(|&c| key(tri1[c], tri1[(c + 1) % 3]) == *e)
                .unwrap();
            let (a, b, c) = (tri1[c1], tri1[(c1 + 1) % 3], tri1[(c1 + 2) % 3]);
            let d = *tri2.iter().find(|&&x| x != a && x != b).unwrap();
            if nb[c].contains(&d) || created.contains(&key(c, d)) {
                continue;
            }
            let dev = |x: usize, val: i64| (val - target(x, &self.fixed)).abs();
            let before =
                dev(a, valence[a]) + dev(b, valence[b]) + dev(c, valence[c]) + dev(d, valence[d]);
            let after = dev(a, valence[a] - 1)
                + dev(b, valence[b] - 1)
                + dev(c, valence[c] + 1)
                + dev(d, valence[d] + 1);
            let p = &self.verts;
            let non_delaunay = angle_at(&p[c], &p[a], &p[b]) + angle_at(&p[d], &p[a], &p[b])
                > std::f64::consts::PI + 1e-9;
            if !(after < before || (after == before && non_delaunay)) {
                continue;
            }
            let min_val = |x: usize| if self.fixed[x] { 2 } else { 3 };
            if valence[a] - 1 < min_val(a) || valence[b] - 1 < min_val(b) {
                continue;
            }
            let reference =
                normal(&p[a], &p[b], &p[c]).normalize() + normal(&p[b], &p[a], &p[d]).normalize();
            let n1 = normal(&p[a], &p[d], &p[c]);
            let n2 = normal(&p[d], &p[b], &p[c]);
            if n1.dot(&reference) <= 0.0
                || n2.dot(&reference) <= 0.0
                || n1.norm() < self.area_floor
                || n2.norm() < self.area_floor
                || n1.normalize().dot(&n2.normalize()) < 0.5
            {
                continue;
            }
            self.tris[t1] = [a, d, c];
            self.tris[t2] = [d, b, c];
            valence[a] -= 1;
            valence[b] -= 1;
            valence[c] += 1;
            valence[d] += 1;
            created.insert(key(c, d));
            for x in [a, b, c, d] {
                touched[x] = true;
            }
        }
    }

    fn smooth(&mut self) {
        let nb = self.neighbours();
        let mut normals = vec![Vector3::zeros(); self.verts.len()];
        for tri in &self.tris {
            let n = normal(
                &self.verts[tri[0]],
                &self.verts[tri[1]],
                &self.verts[tri[2]],
            );
            for &v in tri {
                normals[v] += n;
            }
        }
        let mut next = self.verts.clone();
        for v in 0..self.verts.len() {
            if self.fixed[v] || nb[v].is_empty() {
                continue;
            }
            let centroid = nb[v]
                .iter()
                .fold(Vector3::zeros(), |acc, &w| acc + self.verts[w].coords)
                / nb[v].len() as f64;
            let n = normals[v].try_normalize(0.0).unwrap_or_else(Vector3::z);
            let delta = centroid - self.verts[v].coords;
            let moved = self.verts[v] + (delta - n * n.dot(&delta));
            next[v] = self.project(&moved);
        }
        // Reject moves that would fold a triangle.
        for tri in &self.tris {
            let old = normal(
                &self.verts[tri[0]],
                &self.verts[tri[1]],
                &self.verts[tri[2]],
            );
            let new = normal(&next[tri[0]], &next[tri[1]], &next[tri[2]]);
            if new.dot(&old) <= 0.0 {
                for &v in tri {
                    next[v] = self.verts[v];
                }
            }
        }
        self.verts = next;
    }

    fn check(&self, round: usize) -> Result<()> {
        let edges = self.edges();
        if let Some((e, _)) = edges.iter().find(|(_, t)| t.len() > 2) {
            return Err(Error::Remesh(format!(
                "round {round} produced non-manifold edge ({}, {})",
                e[0], e[1]
            )));
        }
        Ok(())
    }

    fn compact(&self) -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
        let mut map = vec![usize::MAX; self.verts.len()];
        let mut verts = Vec::new();
        let mut tris = Vec::with_capacity(self.tris.len());
        for tri in &self.tris {
            tris.push(tri.map(|v| {
                if map[v] == usize::MAX {
                    map[v] = verts.len();
                    verts.push(self.verts[v]);
                }
                map[v]
            }));
        }
        (verts, tris)
    }
}
