use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::TargetMesh;
use crate::param::Param2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkageState {
    Retained,
    Welded,
    Cut,
}

impl LinkageState {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkageState::Retained => "retained",
            LinkageState::Welded => "welded",
            LinkageState::Cut => "cut",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "retained" => Some(LinkageState::Retained),
            "welded" => Some(LinkageState::Welded),
            "cut" => Some(LinkageState::Cut),
            _ => None,
        }
    }
}

/// Pairing of the two copies of one shared mesh edge.
///
/// Corner fields are layout slots (`3·triangle + corner`). Slots `i`, `j`
/// belong to `tri_a` and `k`, `m` to `tri_b`; `i` and `m` are copies of the
/// same mesh vertex, as are `j` and `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linkage {
    pub tri_a: usize,
    pub tri_b: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub m: usize,
    pub rest_len: f64,
    pub state: LinkageState,
}

impl Linkage {
    pub fn short_edges(&self) -> [[usize; 2]; 2] {
        [[self.i, self.m], [self.j, self.k]]
    }

    pub fn long_edges(&self) -> [[usize; 2]; 2] {
        [[self.i, self.j], [self.k, self.m]]
    }

    pub fn diagonals(&self) -> [[usize; 2]; 2] {
        [[self.i, self.k], [self.j, self.m]]
    }

    /// Quad corners in boundary order.
    pub fn quad(&self) -> [usize; 4] {
        [self.i, self.j, self.k, self.m]
    }

    pub fn is_cut(&self) -> bool {
        self.state == LinkageState::Cut
    }
}

/// Exploded planar triangle soup; the optimization variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// Three private corners per triangle, slot `3·t + c`.
    pub positions: Vec<Point2<f64>>,
    /// Rest length of edge `c -> c+1` of each triangle.
    pub rest_edges: Vec<[f64; 3]>,
    pub linkages: Vec<Linkage>,
    pub avg_edge: f64,
    /// Layout triangle to mesh triangle.
    pub source_map: Vec<usize>,
}

impl Layout {
    pub fn triangle_count(&self) -> usize {
        self.rest_edges.len()
    }

    pub fn corners(&self, t: usize) -> [Point2<f64>; 3] {
        [
            self.positions[3 * t],
            self.positions[3 * t + 1],
            self.positions[3 * t + 2],
        ]
    }

    pub fn centroid(&self, t: usize) -> Point2<f64> {
        let [a, b, c] = self.corners(t);
        Point2::from((a.coords + b.coords + c.coords) / 3.0)
    }

    pub fn edge_length(&self, slot_a: usize, slot_b: usize) -> f64 {
        (self.positions[slot_b] - self.positions[slot_a]).norm()
    }

    /// Mean of the two short-edge lengths.
    pub fn gap_value(&self, l: &Linkage) -> f64 {
        0.5 * (self.edge_length(l.i, l.m) + self.edge_length(l.j, l.k))
    }

    /// Largest gap over linkages that are neither cut nor welded.
    pub fn max_retained_gap(&self) -> f64 {
        self.linkages
            .iter()
            .filter(|l| l.state == LinkageState::Retained)
            .map(|l| self.gap_value(l))
            .fold(0.0, f64::max)
    }

    /// Mean gap over retained linkages, `None` when there are none.
    pub fn mean_retained_gap(&self) -> Option<f64> {
        let gaps: Vec<f64> = self
            .linkages
            .iter()
            .filter(|l| l.state == LinkageState::Retained)
            .map(|l| self.gap_value(l))
            .collect();
        (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
    }

    pub fn cut_count(&self) -> usize {
        self.linkages.iter().filter(|l| l.is_cut()).count()
    }

    pub fn states(&self) -> Vec<LinkageState> {
        self.linkages.iter().map(|l| l.state).collect()
    }

    /// Depth-first search over triangles through non-cut linkages.
    pub fn graph_connected(&self) -> bool {
        graph_connected(self.triangle_count(), &self.linkages)
    }

    /// Welded linkages become retained again; their coincident copies stay in place.
    pub fn unweld(&mut self) {
        for l in &mut self.linkages {
            if l.state == LinkageState::Welded {
                l.state = LinkageState::Retained;
            }
        }
    }

    /// Rotates by `angle` about the origin, then translates.
    pub fn rigid_transform(&mut self, angle: f64, shift: Vector2<f64>) {
        let r = nalgebra::Rotation2::new(angle);
        for p in &mut self.positions {
            *p = r * *p + shift;
        }
    }
}

/// True when every triangle is reachable from triangle 0 through non-cut
/// linkages.
pub fn graph_connected(triangle_count: usize, linkages: &[Linkage]) -> bool {
    if triangle_count == 0 {
        return true;
    }
    let mut adj = vec![Vec::new(); triangle_count];
    for l in linkages.iter().filter(|l| !l.is_cut()) {
        adj[l.tri_a].push(l.tri_b);
        adj[l.tri_b].push(l.tri_a);
    }
    let mut seen = vec![false; triangle_count];
    let mut stack = vec![0];
    seen[0] = true;
    let mut visited = 1;
    while let Some(t) = stack.pop() {
        for &u in &adj[t] {
            if !seen[u] {
                seen[u] = true;
                visited += 1;
                stack.push(u);
            }
        }
    }
    visited == triangle_count
}

/// Gives every triangle private copies of its parameterized corners and
/// creates one retained linkage per interior mesh edge.
pub fn explode_mesh(mesh: &TargetMesh, init: &Param2D) -> Result<Layout> {
    if init.uv.len() != mesh.vertex_count() {
        return Err(Error::Topology(format!(
            "parameterization has {} points for {} vertices",
            init.uv.len(),
            mesh.vertex_count()
        )));
    }
    let tris = mesh.triangles();
    let mut positions = Vec::with_capacity(3 * tris.len());
    let mut rest_edges = Vec::with_capacity(tris.len());
    for (t, tri) in tris.iter().enumerate() {
        for &v in tri {
            positions.push(init.uv[v]);
        }
        rest_edges.push(std::array::from_fn(|c| mesh.corner_edge_length(t, c)));
    }
    let slot = |t: usize, v: usize| -> Result<usize> {
        tris[t]
            .iter()
            .position(|&x| x == v)
            .map(|c| 3 * t + c)
            .ok_or_else(|| Error::Topology(format!("vertex {v} is not a corner of triangle {t}")))
    };
    let adj = mesh.adjacency();
    let mut linkages = Vec::with_capacity(adj.interior_edges.len());
    for &e in &adj.interior_edges {
        let edge = &adj.edges[e];
        let (ta, tb) = (
            edge.triangles[0].min(edge.triangles[1]),
            edge.triangles[0].max(edge.triangles[1]),
        );
        let [p, q] = edge.vertices;
        // orient the edge as it runs in tri_a
        let ca = tris[ta].iter().position(|&x| x == p).unwrap();
        let (u, v) = if tris[ta][(ca + 1) % 3] == q {
            (p, q)
        } else {
            (q, p)
        };
        linkages.push(Linkage {
            tri_a: ta,
            tri_b: tb,
            i: slot(ta, u)?,
            j: slot(ta, v)?,
            k: slot(tb, v)?,
            m: slot(tb, u)?,
            rest_len: (mesh.vertices()[q] - mesh.vertices()[p]).norm(),
            state: LinkageState::Retained,
        });
    }
    Ok(Layout {
        positions,
        rest_edges,
        linkages,
        avg_edge: mesh.edge_statistics().avg_edge_len,
        source_map: (0..tris.len()).collect(),
    })
}
