use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Point2, Point3};

use super::layout::{Layout, Linkage, LinkageState};
use crate::error::{Error, Result};

const HEADER: &str = "freeshell-layout 1";

/// Line-oriented text form of a layout. Floats are written in shortest
/// round-trip form, so reading back is exact.
pub fn layout_to_string(layout: &Layout) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "avg_edge {}", layout.avg_edge);
    let _ = writeln!(s, "triangles {}", layout.triangle_count());
    for t in 0..layout.triangle_count() {
        let [a, b, c] = layout.corners(t);
        let r = layout.rest_edges[t];
        let _ = writeln!(
            s,
            "t {} {} {} {} {} {} {} {} {} {}",
            layout.source_map[t], a.x, a.y, b.x, b.y, c.x, c.y, r[0], r[1], r[2]
        );
    }
    let _ = writeln!(s, "linkages {}", layout.linkages.len());
    for l in &layout.linkages {
        let _ = writeln!(
            s,
            "l {} {} {} {} {} {} {} {}",
            l.tri_a,
            l.tri_b,
            l.i,
            l.j,
            l.k,
            l.m,
            l.rest_len,
            l.state.as_str()
        );
    }
    s
}

struct Lines<'a> {
    path: PathBuf,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next_fields(&mut self, tag: &str, count: usize) -> Result<Vec<&'a str>> {
        let (n, text) = self
            .iter
            .next()
            .ok_or_else(|| self.err(format!("expected '{tag}' line")))?;
        self.line = n + 1;
        let mut fields = text.split_whitespace();
        if fields.next() != Some(tag) {
            return Err(self.err(format!("expected '{tag}' line")));
        }
        let fields: Vec<&str> = fields.collect();
        if fields.len() != count {
            return Err(self.err(format!(
                "'{tag}' line needs {count} fields, found {}",
                fields.len()
            )));
        }
        Ok(fields)
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.err(format!("invalid number '{s}'")))
    }
}

/// Parses [`layout_to_string`] output. `path` is only used in messages.
pub fn layout_from_str(text: &str, path: impl AsRef<Path>) -> Result<Layout> {
    let mut r = Lines {
        path: path.as_ref().to_path_buf(),
        iter: text.lines().enumerate(),
        line: 0,
    };
    match r.iter.next() {
        Some((_, h)) if h.trim() == HEADER => r.line = 1,
        _ => return Err(r.err("missing layout header")),
    }
    let f = r.next_fields("avg_edge", 1)?;
    let avg_edge: f64 = r.num(f[0])?;
    let f = r.next_fields("triangles", 1)?;
    let nt: usize = r.num(f[0])?;
    let mut positions = Vec::with_capacity(3 * nt);
    let mut rest_edges = Vec::with_capacity(nt);
    let mut source_map = Vec::with_capacity(nt);
    for _ in 0..nt {
        let f = r.next_fields("t", 10)?;
        source_map.push(r.num(f[0])?);
        for c in 0..3 {
            positions.push(Point2::new(r.num(f[1 + 2 * c])?, r.num(f[2 + 2 * c])?));
        }
        let rest = [r.num(f[7])?, r.num(f[8])?, r.num(f[9])?];
        if rest.iter().any(|&x: &f64| !(x > 0.0)) {
            return Err(r.err("rest edge lengths must be positive"));
        }
        rest_edges.push(rest);
    }
    let f = r.next_fields("linkages", 1)?;
    let nl: usize = r.num(f[0])?;
    let mut linkages = Vec::with_capacity(nl);
    for _ in 0..nl {
        let f = r.next_fields("l", 8)?;
        let ids: Vec<usize> = f[..6].iter().map(|s| r.num(s)).collect::<Result<_>>()?;
        let state = LinkageState::parse(f[7])
            .ok_or_else(|| r.err(format!("unknown linkage state '{}'", f[7])))?;
        let l = Linkage {
            tri_a: ids[0],
            tri_b: ids[1],
            i: ids[2],
            j: ids[3],
            k: ids[4],
            m: ids[5],
            rest_len: r.num(f[6])?,
            state,
        };
        let in_tri = |s: usize, t: usize| s / 3 == t;
        if l.tri_a >= nt
            || l.tri_b >= nt
            || !(in_tri(l.i, l.tri_a)
                && in_tri(l.j, l.tri_a)
                && in_tri(l.k, l.tri_b)
                && in_tri(l.m, l.tri_b))
        {
            return Err(r.err("linkage references slots outside its triangles"));
        }
        linkages.push(l);
    }
    Ok(Layout {
        positions,
        rest_edges,
        linkages,
        avg_edge,
        source_map,
    })
}

pub fn write_layout(layout: &Layout, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, layout_to_string(layout)).map_err(|e| Error::io(path, e))
}

pub fn read_layout(path: impl AsRef<Path>) -> Result<Layout> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    layout_from_str(&text, path)
}

/// The exploded layout as an OBJ triangle soup at `z = 0`.
pub fn layout_obj_string(layout: &Layout) -> String {
    let verts: Vec<Point3<f64>> = layout
        .positions
        .iter()
        .map(|p| Point3::new(p.x, p.y, 0.0))
        .collect();
    let tris: Vec<[usize; 3]> = (0..layout.triangle_count())
        .map(|t| [3 * t, 3 * t + 1, 3 * t + 2])
        .collect();
    crate::mesh::obj_string(&verts, &tris)
}
