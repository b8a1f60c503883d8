use std::collections::HashMap;

use nalgebra::Point3;

/// A closed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Solid {
    pub name: String,
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl Solid {
    /// Every undirected edge is used by exactly two faces, once in each
    /// direction.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for c in 0..3 {
                let (a, b) = (f[c], f[(c + 1) % 3]);
                if a == b {
                    return false;
                }
                *directed.entry((a, b)).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| (0..3).map(move |c| (f[c].min(f[(c + 1) % 3]), f[c].max(f[(c + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// `V − E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        self.faces.iter().flatten().for_each(|&v| used[v] = true);
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_count() as i64 + self.faces.len() as i64
    }

    /// Signed volume by the divergence theorem; positive for outward faces.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i].coords);
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Watertight with positive volume.
    pub fn is_valid(&self) -> bool {
        self.is_watertight() && self.signed_volume() > 0.0
    }

    pub(crate) fn flip(&mut self) {
        for f in &mut self.faces {
            f.swap(1, 2);
        }
    }
}

/// Incremental builder with vertex keys, so shared corners are emitted once.
#[derive(Debug, Default)]
pub(crate) struct SolidBuilder<K: std::hash::Hash + Eq> {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    keys: HashMap<K, usize>,
}

impl<K: std::hash::Hash + Eq> SolidBuilder<K> {
    pub fn new() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            keys: HashMap::new(),
        }
    }

    pub fn vertex(&mut self, key: K, at: impl FnOnce() -> Point3<f64>) -> usize {
        let n = self.vertices.len();
        let id = *self.keys.entry(key).or_insert(n);
        if id == n {
            self.vertices.push(at());
        }
        id
    }

    pub fn unkeyed(&mut self, p: Point3<f64>) -> usize {
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    pub fn tri(&mut self, a: usize, b: usize, c: usize) {
        self.faces.push([a, b, c]);
    }

    /// Quad `a b c d` in boundary order, split along `a c`.
    pub fn quad(&mut self, a: usize, b: usize, c: usize, d: usize) {
        self.tri(a, b, c);
        self.tri(a, c, d);
    }

    /// Closes the mesh, flipping it if it came out inside-out.
    pub fn finish(self, name: String) -> Solid {
        let mut s = Solid {
            name,
            vertices: self.vertices,
            faces: self.faces,
        };
        if s.signed_volume() < 0.0 {
            s.flip();
        }
        s
    }
}
