//! OBJ (ASCII) and STL (binary, with ASCII fallback on read) mesh files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::{TargetMesh, Triangles};
use crate::error::{Error, Result};

/// STL vertices closer than this (mm) are merged on load.
pub const STL_MERGE_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Stl,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "stl" => Some(MeshFormat::Stl),
            _ => None,
        }
    }
}

/// Loads and validates an OBJ or STL mesh. Polygonal OBJ faces are fan-split.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TargetMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (vertices, triangles) = match MeshFormat::from_path(path) {
        Some(MeshFormat::Stl) => parse_stl(path, &bytes)?,
        Some(MeshFormat::Obj) => parse_obj(path, &bytes)?,
        None => {
            return Err(Error::Parse {
                path: path.into(),
                line: 0,
                message: "unknown mesh extension (expected .obj or .stl)".into(),
            })
        }
    };
    let (vertices, triangles) = drop_unreferenced(vertices, triangles);
    TargetMesh::new(vertices, triangles)
}

pub fn save_mesh(mesh: &impl Triangles, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MeshFormat::Obj => obj_string(mesh.positions(), mesh.faces()).into_bytes(),
        MeshFormat::Stl => stl_bytes(mesh.positions(), mesh.faces()),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn obj_string(vertices: &[Point3<f64>], triangles: &[[usize; 3]]) -> String {
    let mut s = String::with_capacity(vertices.len() * 40 + triangles.len() * 20);
    s.push_str("# freeshell\n");
    for v in vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub(crate) fn stl_bytes(vertices: &[Point3<f64>], triangles: &[[usize; 3]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * triangles.len());
    let mut header = [0u8; 80];
    let tag = b"freeshell binary STL";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(triangles.len() as u32).to_le_bytes());
    for t in triangles {
        let [a, b, c] = t.map(|i| vertices[i]);
        let n = (b - a).cross(&(c - a));
        let n = if n.norm() > 0.0 {
            n.normalize()
        } else {
            Vector3::zeros()
        };
        for x in n.iter() {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
        for p in [a, b, c] {
            for x in p.iter() {
                out.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        message: message.into(),
    }
}

fn parse_obj(path: &Path, bytes: &[u8]) -> Result<Soup> {
    let text =
        std::str::from_utf8(bytes).map_err(|_| parse_err(path, 0, "file is not valid UTF-8"))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(path, line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(parse_err(path, line_no, "vertex needs three coordinates"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in tokens {
                    let idx = tok.split('/').next().unwrap_or("");
                    let k: i64 = idx
                        .parse()
                        .map_err(|_| parse_err(path, line_no, format!("bad face index `{tok}`")))?;
                    let resolved = if k > 0 {
                        k - 1
                    } else if k < 0 {
                        vertices.len() as i64 + k
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(parse_err(
                            path,
                            line_no,
                            format!("face index {k} out of range"),
                        ));
                    }
                    face.push(resolved as usize);
                }
                if face.len() < 3 {
                    return Err(parse_err(
                        path,
                        line_no,
                        "face needs at least three vertices",
                    ));
                }
                for w in 1..face.len() - 1 {
                    triangles.push([face[0], face[w], face[w + 1]]);
                }
            }
            _ => {}
        }
    }
    if triangles.is_empty() {
        return Err(parse_err(path, 0, "no faces found"));
    }
    Ok((vertices, triangles))
}

/// Indexed vertices and triangles before validation.
type Soup = (Vec<Point3<f64>>, Vec<[usize; 3]>);

fn parse_stl(path: &Path, bytes: &[u8]) -> Result<Soup> {
    let is_binary = bytes.len() >= 84 && {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        84 + 50 * n == bytes.len()
    };
    let facets = if is_binary {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        let read = |off: usize| {
            f32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]) as f64
        };
        (0..n)
            .map(|f| {
                let base = 84 + 50 * f + 12;
                [0, 1, 2].map(|k| {
                    let o = base + 12 * k;
                    Point3::new(read(o), read(o + 4), read(o + 8))
                })
            })
            .collect::<Vec<_>>()
    } else {
        parse_ascii_stl(path, bytes)?
    };
    if facets.is_empty() {
        return Err(parse_err(path, 0, "no facets found"));
    }
    let mut welder = VertexWelder::new(STL_MERGE_TOLERANCE);
    let mut triangles = Vec::with_capacity(facets.len());
    for f in &facets {
        let t = f.map(|p| welder.insert(p));
        if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
            triangles.push(t);
        }
    }
    Ok((welder.vertices, triangles))
}

fn parse_ascii_stl(path: &Path, bytes: &[u8]) -> Result<Vec<[Point3<f64>; 3]>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| parse_err(path, 0, "STL is neither binary nor ASCII"))?;
    if !text.trim_start().starts_with("solid") {
        return Err(parse_err(path, 1, "STL is neither binary nor ASCII"));
    }
    let mut facets = Vec::new();
    let mut current = Vec::with_capacity(3);
    for (i, raw) in text.lines().enumerate() {
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("vertex") => {
                let c: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(path, i + 1, format!("bad vertex: {e}")))?;
                if c.len() != 3 {
                    return Err(parse_err(path, i + 1, "vertex needs three coordinates"));
                }
                current.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("endfacet") => {
                if current.len() != 3 {
                    return Err(parse_err(
                        path,
                        i + 1,
                        "facet must have exactly three vertices",
                    ));
                }
                facets.push([current[0], current[1], current[2]]);
                current.clear();
            }
            _ => {}
        }
    }
    Ok(facets)
}

/// Merges points within a Euclidean tolerance, in insertion order.
struct VertexWelder {
    tol: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    vertices: Vec<Point3<f64>>,
}

impl VertexWelder {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            cells: HashMap::new(),
            vertices: Vec::new(),
        }
    }

    fn cell(&self, p: &Point3<f64>) -> [i64; 3] {
        [0, 1, 2].map(|k| (p[k] / self.tol).floor() as i64)
    }

    fn insert(&mut self, p: Point3<f64>) -> usize {
        let c = self.cell(&p);
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &i in list {
                            let d = (self.vertices[i] - p).norm();
                            if d <= self.tol
                                && best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi))
                            {
                                best = Some((d, i));
                            }
                        }
                    }
                }
            }
        }
        if let Some((_, i)) = best {
            return i;
        }
        let i = self.vertices.len();
        self.vertices.push(p);
        self.cells.entry(c).or_default().push(i);
        i
    }
}

fn drop_unreferenced(
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
) -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::with_capacity(vertices.len());
    for t in &triangles {
        for &v in t {
            if remap[v] == usize::MAX {
                remap[v] = usize::MAX - 1;
            }
        }
    }
    for (i, p) in vertices.into_iter().enumerate() {
        if remap[i] != usize::MAX {
            remap[i] = kept.len();
            kept.push(p);
        }
    }
    let triangles = triangles.into_iter().map(|t| t.map(|v| remap[v])).collect();
    (kept, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn write(dir: &Path, name: &str, content: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn loads_single_triangle_obj() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.obj", b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.triangle_count(), 1);
        assert!(m.boundary_flags().iter().all(|&b| b));
    }

    #[test]
    fn loads_square_with_slash_and_negative_indices() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "sq.obj",
            b"# square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\nf -4 -2 -1\n",
        );
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.triangle_count(), 2);
        assert_eq!(m.adjacency().interior_edges.len(), 1);
    }

    #[test]
    fn quad_face_is_fan_split() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "q.obj",
            b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n",
        );
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn closed_tetrahedron_obj_is_topology_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "tet.obj",
            b"v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\nf 1 4 3\n",
        );
        match load_mesh(&p) {
            Err(Error::Topology(msg)) => assert!(msg.contains("closed surface")),
            other => panic!("expected topology error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_obj_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "bad.obj", b"v 0 0 0\nv 1 x 0\n");
        assert!(matches!(load_mesh(&p), Err(Error::Parse { line: 2, .. })));
        let p = write(
            dir.path(),
            "bad2.obj",
            b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n",
        );
        assert!(matches!(load_mesh(&p), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn single_triangle_obj_output() {
        let m = fixtures::equilateral_triangle(1.0);
        let s = obj_string(m.vertices(), m.triangles());
        assert_eq!(s.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert_eq!(s.lines().filter(|l| l.starts_with("f ")).count(), 1);
    }

    #[test]
    fn stl_facet_normal_is_normalized_cross_product() {
        let m = TargetMesh::new(
            vec![
                Point3::new(0., 0., 0.),
                Point3::new(2., 0., 0.),
                Point3::new(0., 3., 0.),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bytes = stl_bytes(m.vertices(), m.triangles());
        assert_eq!(bytes.len(), 84 + 50);
        assert_eq!(u32::from_le_bytes(bytes[80..84].try_into().unwrap()), 1);
        let n: Vec<f32> = (0..3)
            .map(|k| f32::from_le_bytes(bytes[84 + 4 * k..88 + 4 * k].try_into().unwrap()))
            .collect();
        assert_eq!(n, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn hemisphere_round_trips_through_obj_and_stl() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixtures::hemisphere();
        assert_eq!(m.triangle_count(), 143);

        let obj = dir.path().join("h.obj");
        save_mesh(&m, &obj, MeshFormat::Obj).unwrap();
        let back = load_mesh(&obj).unwrap();
        assert_eq!(back.triangles(), m.triangles());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-6);
        }

        let stl = dir.path().join("h.stl");
        save_mesh(&m, &stl, MeshFormat::Stl).unwrap();
        let back = load_mesh(&stl).unwrap();
        assert_eq!(back.triangle_count(), 143);
        assert_eq!(back.vertex_count(), m.vertex_count());
    }

    #[test]
    fn ascii_stl_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.stl",
            b"solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n",
        );
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.triangle_count(), 1);
    }
}
