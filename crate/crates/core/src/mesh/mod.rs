//! Indexed triangle meshes of the target shell.
//!
//! A [`TargetMesh`] is validated on construction: triangles are non-degenerate,
//! the surface is an orientable 2-manifold with boundary, and every connected
//! component has at least one boundary loop. Vertex normals are the normalized
//! area-weighted average of incident face normals.

mod io;
mod remesh;

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

pub use io::{load_mesh, save_mesh, MeshFormat};
pub(crate) use io::{obj_string, stl_bytes};
pub use remesh::isotropic_remesh;

/// Read access to an indexed triangle set, implemented by [`TargetMesh`] and
/// [`TriangleSoup`] so either can be written to disk.
pub trait Triangles {
    fn positions(&self) -> &[Point3<f64>];
    fn faces(&self) -> &[[usize; 3]];
}

/// Unvalidated indexed triangles, e.g. a flattened layout lifted to `z = 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleSoup {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl Triangles for TriangleSoup {
    fn positions(&self) -> &[Point3<f64>] {
        &self.vertices
    }
    fn faces(&self) -> &[[usize; 3]] {
        &self.triangles
    }
}

/// The goal shell: a disk-like (possibly holed) triangle mesh in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    vertex_normals: Vec<Vector3<f64>>,
    boundary: Vec<bool>,
}

impl Triangles for TargetMesh {
    fn positions(&self) -> &[Point3<f64>] {
        &self.vertices
    }
    fn faces(&self) -> &[[usize; 3]] {
        &self.triangles
    }
}

/// One undirected mesh edge and the triangles using it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints, smaller index first.
    pub vertices: [usize; 2],
    pub triangles: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeAdjacency {
    /// Unique edges sorted by endpoint pair.
    pub edges: Vec<Edge>,
    /// Indices into `edges` of edges with exactly two incident triangles.
    pub interior_edges: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStats {
    pub avg_edge_len: f64,
    pub min: f64,
    pub max: f64,
}

impl TargetMesh {
    /// Validates the connectivity and computes normals and boundary flags.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        validate(&vertices, &triangles)?;
        let vertex_normals = area_weighted_normals(&vertices, &triangles)?;
        let mut boundary = vec![false; vertices.len()];
        for (a, b) in boundary_half_edges(&triangles) {
            boundary[a] = true;
            boundary[b] = true;
        }
        Ok(Self {
            vertices,
            triangles,
            vertex_normals,
            boundary,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_normals(&self) -> &[Vector3<f64>] {
        &self.vertex_normals
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point3<f64>; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Length of the edge from corner `c` to corner `c + 1` of triangle `t`.
    pub fn corner_edge_length(&self, t: usize, c: usize) -> f64 {
        let tri = self.triangles[t];
        (self.vertices[tri[(c + 1) % 3]] - self.vertices[tri[c]]).norm()
    }

    pub fn adjacency(&self) -> EdgeAdjacency {
        let mut map: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for c in 0..3 {
                let (a, b) = (tri[c], tri[(c + 1) % 3]);
                map.entry([a.min(b), a.max(b)]).or_default().push(t);
            }
        }
        let edges: Vec<Edge> = map
            .into_iter()
            .map(|(vertices, triangles)| Edge {
                vertices,
                triangles,
            })
            .collect();
        let interior_edges = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.triangles.len() == 2)
            .map(|(i, _)| i)
            .collect();
        EdgeAdjacency {
            edges,
            interior_edges,
        }
    }

    /// Boundary loops as vertex cycles following the face orientation, each
    /// starting at its smallest vertex index; loops are sorted by that index.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let next: BTreeMap<usize, usize> =
            boundary_half_edges(&self.triangles).into_iter().collect();
        let mut seen = vec![false; self.vertices.len()];
        let mut loops = Vec::new();
        for &start in next.keys() {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut v = start;
            while !seen[v] {
                seen[v] = true;
                cycle.push(v);
                v = next[&v];
            }
            loops.push(cycle);
        }
        loops
    }

    /// Edge-length statistics over the unique edge set.
    pub fn edge_statistics(&self) -> EdgeStats {
        let adj = self.adjacency();
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        for e in &adj.edges {
            let l = (self.vertices[e.vertices[1]] - self.vertices[e.vertices[0]]).norm();
            sum += l;
            min = min.min(l);
            max = max.max(l);
        }
        EdgeStats {
            avg_edge_len: sum / adj.edges.len() as f64,
            min,
            max,
        }
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(
            self.vertices
                .iter()
                .map(|p| Point3::from(p.coords * k))
                .collect(),
            self.triangles.clone(),
        )
    }
}

/// Directed edges `(a, b)` whose twin `(b, a)` does not exist, in triangle order.
fn boundary_half_edges(triangles: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut directed = HashMap::with_capacity(triangles.len() * 3);
    for tri in triangles {
        for c in 0..3 {
            directed.insert((tri[c], tri[(c + 1) % 3]), ());
        }
    }
    let mut out = Vec::new();
    for tri in triangles {
        for c in 0..3 {
            let (a, b) = (tri[c], tri[(c + 1) % 3]);
            if !directed.contains_key(&(b, a)) {
                out.push((a, b));
            }
        }
    }
    out
}

fn validate(vertices: &[Point3<f64>], triangles: &[[usize; 3]]) -> Result<()> {
    if triangles.is_empty() {
        return Err(Error::Topology("mesh has no triangles".into()));
    }
    let n = vertices.len();
    for (i, p) in vertices.iter().enumerate() {
        if !p.coords.iter().all(|x| x.is_finite()) {
            return Err(Error::Topology(format!(
                "vertex {i} has non-finite coordinates"
            )));
        }
    }
    let mut used = vec![false; n];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            if v >= n {
                return Err(Error::Topology(format!(
                    "triangle {t} references vertex {v} but only {n} vertices exist"
                )));
            }
            used[v] = true;
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(Error::Topology(format!(
                "triangle {t} repeats a vertex: {tri:?}"
            )));
        }
        let [a, b, c] = tri.map(|v| vertices[v]);
        let area2 = (b - a).cross(&(c - a)).norm();
        let scale = (b - a)
            .norm_squared()
            .max((c - a).norm_squared())
            .max((c - b).norm_squared());
        if !(area2 > 1e-14 * scale) {
            return Err(Error::Topology(format!(
                "triangle {t} is degenerate (zero area)"
            )));
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(Error::Topology(format!(
            "vertex {v} is not referenced by any triangle"
        )));
    }

    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3);
    for (t, tri) in triangles.iter().enumerate() {
        for c in 0..3 {
            let (a, b) = (tri[c], tri[(c + 1) % 3]);
            if let Some(other) = directed.insert((a, b), t) {
                return Err(Error::Topology(format!(
                    "non-manifold or inconsistently oriented edge ({a}, {b}) shared by triangles {other} and {t}"
                )));
            }
        }
    }

    // Every vertex's incident triangles must form a single fan.
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            incident[v].push(t);
        }
    }
    for (v, tris) in incident.iter().enumerate() {
        let mut parent: Vec<usize> = (0..tris.len()).collect();
        let local: HashMap<usize, usize> = tris.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        for (i, &t) in tris.iter().enumerate() {
            let tri = triangles[t];
            for c in 0..3 {
                let (a, b) = (tri[c], tri[(c + 1) % 3]);
                if a == v {
                    if let Some(&u) = directed.get(&(b, a)) {
                        union(&mut parent, i, local[&u]);
                    }
                }
            }
        }
        let roots = (0..tris.len())
            .filter(|&i| find(&mut parent, i) == i)
            .count();
        if roots > 1 {
            return Err(Error::Topology(format!(
                "non-manifold vertex {v}: its triangles form {roots} separate fans"
            )));
        }
    }

    // Every connected component needs a boundary.
    let mut parent: Vec<usize> = (0..triangles.len()).collect();
    for (t, tri) in triangles.iter().enumerate() {
        for c in 0..3 {
            let (a, b) = (tri[c], tri[(c + 1) % 3]);
            if let Some(&u) = directed.get(&(b, a)) {
                union(&mut parent, t, u);
            }
        }
    }
    let mut has_boundary: BTreeMap<usize, bool> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        let root = find(&mut parent, t);
        let open = (0..3).any(|c| !directed.contains_key(&(tri[(c + 1) % 3], tri[c])));
        *has_boundary.entry(root).or_insert(false) |= open;
    }
    if let Some((&root, _)) = has_boundary.iter().find(|(_, &open)| !open) {
        return Err(Error::Topology(format!(
            "closed surface: the component containing triangle {root} has no boundary loop"
        )));
    }
    Ok(())
}

fn area_weighted_normals(
    vertices: &[Point3<f64>],
    triangles: &[[usize; 3]],
) -> Result<Vec<Vector3<f64>>> {
    let mut normals = vec![Vector3::zeros(); vertices.len()];
    for tri in triangles {
        let [a, b, c] = tri.map(|v| vertices[v]);
        let n = (b - a).cross(&(c - a));
        for &v in tri {
            normals[v] += n;
        }
    }
    normals
        .into_iter()
        .enumerate()
        .map(|(v, n)| {
            let len = n.norm();
            if len > 0.0 && len.is_finite() {
                Ok(n / len)
            } else {
                Err(Error::Topology(format!(
                    "vertex {v} has a vanishing normal"
                )))
            }
        })
        .collect()
}

pub(crate) fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

pub(crate) fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let m = TargetMesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.triangle_count(), 1);
        assert!(m.boundary_flags().iter().all(|&b| b));
        for n in m.vertex_normals() {
            assert!((n - Vector3::z()).norm() < 1e-15);
        }
    }

    #[test]
    fn closed_tetrahedron_is_rejected() {
        let v = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(0., 0., 1.)];
        let t = vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]];
        let err = TargetMesh::new(v, t).unwrap_err();
        assert!(err.to_string().contains("closed surface"), "{err}");
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let v = vec![
            p(0., 0., 0.),
            p(1., 0., 0.),
            p(0., 1., 0.),
            p(0., -1., 0.),
            p(0., 0., 1.),
        ];
        let t = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        let err = TargetMesh::new(v, t).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
    }

    #[test]
    fn bowtie_vertex_is_rejected() {
        let v = vec![
            p(0., 0., 0.),
            p(1., 0., 0.),
            p(1., 1., 0.),
            p(-1., 0., 0.),
            p(-1., -1., 0.),
        ];
        let t = vec![[0, 1, 2], [0, 3, 4]];
        let err = TargetMesh::new(v, t).unwrap_err();
        assert!(err.to_string().contains("non-manifold vertex 0"), "{err}");
    }

    #[test]
    fn square_adjacency() {
        let m = fixtures::flat_square(1.0);
        let adj = m.adjacency();
        assert_eq!(adj.edges.len(), 5);
        assert_eq!(adj.interior_edges.len(), 1);
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.boundary_loops()[0].len(), 4);
    }

    #[test]
    fn edge_statistics_examples() {
        let s = fixtures::equilateral_triangle(2.0).edge_statistics();
        assert!((s.avg_edge_len - 2.0).abs() < 1e-12);
        let s = fixtures::flat_square(1.0).edge_statistics();
        let expected = (4.0 + 2f64.sqrt()) / 5.0;
        assert!((s.avg_edge_len - expected).abs() < 1e-12);
        assert!((s.min - 1.0).abs() < 1e-12);
        assert!((s.max - 2f64.sqrt()).abs() < 1e-12);
        let k = 3.5;
        let scaled = fixtures::flat_square(1.0)
            .scaled(k)
            .unwrap()
            .edge_statistics();
        assert!((scaled.avg_edge_len - k * expected).abs() < 1e-12);
        assert!((scaled.max - k * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn edge_statistics_ignore_ordering() {
        let m = fixtures::hemisphere();
        let base = m.edge_statistics();
        let n = m.vertex_count();
        // reverse the vertex numbering and the triangle order
        let verts: Vec<_> = (0..n).map(|i| m.vertices()[n - 1 - i]).collect();
        let tris: Vec<_> = m
            .triangles()
            .iter()
            .rev()
            .map(|t| [n - 1 - t[1], n - 1 - t[2], n - 1 - t[0]])
            .collect();
        let permuted = TargetMesh::new(verts, tris).unwrap().edge_statistics();
        assert!((base.avg_edge_len - permuted.avg_edge_len).abs() < 1e-12);
        assert_eq!(base.min, permuted.min);
        assert_eq!(base.max, permuted.max);
    }

    #[test]
    fn holed_mesh_has_two_loops() {
        let m = fixtures::annulus(6, 2, 10.0, 20.0);
        assert_eq!(m.boundary_loops().len(), 2);
    }
}
