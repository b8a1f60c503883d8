//! Closest-point queries against triangle sets, with an AABB tree for
//! acceleration.

use nalgebra::{Point3, Vector3};

/// Closest point on triangle `(a, b, c)` to `p`, by Voronoi-region case
/// analysis over the vertex, edge and face regions.
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point3::from(Vector3::repeat(f64::INFINITY)),
            max: Point3::from(Vector3::repeat(f64::NEG_INFINITY)),
        }
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Point3<f64>) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        bounds: Aabb,
        start: usize,
        end: usize,
    },
    Inner {
        bounds: Aabb,
        left: usize,
        right: usize,
    },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Result of a nearest-triangle query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub distance_squared: f64,
    pub triangle: usize,
    pub point: Point3<f64>,
}

/// Bounding volume hierarchy over a fixed triangle set.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl TriangleBvh {
    pub fn new(vertices: &[Point3<f64>], triangles: &[[usize; 3]]) -> Self {
        let mut bvh = Self {
            vertices: vertices.to_vec(),
            triangles: triangles.to_vec(),
            order: (0..triangles.len()).collect(),
            nodes: Vec::new(),
        };
        if !triangles.is_empty() {
            let centers: Vec<Point3<f64>> = triangles
                .iter()
                .map(|t| {
                    Point3::from(
                        (vertices[t[0]].coords + vertices[t[1]].coords + vertices[t[2]].coords)
                            / 3.0,
                    )
                })
                .collect();
            bvh.build(&centers, 0, triangles.len());
        }
        bvh
    }

    fn tri_bounds(&self, t: usize) -> Aabb {
        let mut b = Aabb::empty();
        for &v in &self.triangles[t] {
            b.grow(&self.vertices[v]);
        }
        b
    }

    fn build(&mut self, centers: &[Point3<f64>], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[start..end] {
            bounds.merge(&self.tri_bounds(t));
            cbounds.grow(&centers[t]);
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let extent = cbounds.max - cbounds.min;
        let axis = extent.imax();
        self.order[start..end].sort_by(|&a, &b| {
            centers[a][axis]
                .total_cmp(&centers[b][axis])
                .then(a.cmp(&b))
        });
        let mid = (start + end) / 2;
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build(centers, start, mid);
        let right = self.build(centers, mid, end);
        self.nodes[id] = Node::Inner {
            bounds,
            left,
            right,
        };
        id
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    fn closest_on(&self, t: usize, p: &Point3<f64>) -> (f64, Point3<f64>) {
        let [a, b, c] = self.triangles[t];
        let q =
            closest_point_on_triangle(p, &self.vertices[a], &self.vertices[b], &self.vertices[c]);
        ((q - p).norm_squared(), q)
    }

    /// Nearest triangle by exhaustive scan. Ties resolve to the lowest index.
    pub fn nearest_brute_force(&self, p: &Point3<f64>) -> Option<Nearest> {
        let mut best: Option<Nearest> = None;
        for t in 0..self.triangles.len() {
            let (d, q) = self.closest_on(t, p);
            if best.is_none_or(|b| d < b.distance_squared) {
                best = Some(Nearest {
                    distance_squared: d,
                    triangle: t,
                    point: q,
                });
            }
        }
        best
    }

    /// Nearest triangle using the hierarchy. Returns the same minimum distance
    /// as [`Self::nearest_brute_force`]; ties resolve to the lowest index.
    pub fn nearest(&self, p: &Point3<f64>) -> Option<Nearest> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<Nearest> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if let Some(b) = best {
                if node.bounds().distance_squared(p) > b.distance_squared {
                    continue;
                }
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        let (d, q) = self.closest_on(t, p);
                        let better = match best {
                            None => true,
                            Some(b) => {
                                d < b.distance_squared
                                    || (d == b.distance_squared && t < b.triangle)
                            }
                        };
                        if better {
                            best = Some(Nearest {
                                distance_squared: d,
                                triangle: t,
                                point: q,
                            });
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_squared(p);
                    let dr = self.nodes[right].bounds().distance_squared(p);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}
