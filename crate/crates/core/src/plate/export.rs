use std::fmt::Write;
use std::fs;
use std::path::Path;

use nalgebra::{Point2, Point3};

use super::FlatPlate;
use crate::error::{Error, Result};
use crate::flatten::Layout;
use crate::mesh::{stl_bytes, MeshFormat};

const MARGIN: f64 = 5.0;
const SCALE_BAR: f64 = 10.0;

fn f(x: f64) -> String {
    // avoid "-0.0000"
    let s = format!("{x:.4}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        "0.0000".into()
    } else {
        s
    }
}

/// Plate outline drawing in millimetres. The y axis points up in plate
/// coordinates and down in the drawing.
pub fn layout_svg_string(layout: &Layout, plate: &FlatPlate) -> String {
    let mut pts: Vec<Point2<f64>> = plate.tiles.iter().flat_map(|t| t.corners).collect();
    pts.extend(layout.positions.iter().copied());
    for c in &plate.connectors {
        let side = nalgebra::Vector2::new(-c.axis().y, c.axis().x) * (c.width / 2.0);
        pts.extend([c.start + side, c.start - side, c.end + side, c.end - side]);
    }
    let (mut lo, mut hi) = (Point2::new(0.0, 0.0), Point2::new(0.0, 0.0));
    if let Some(first) = pts.first() {
        lo = *first;
        hi = *first;
    }
    for p in &pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let x0 = lo.x - MARGIN;
    let y0 = -hi.y - MARGIN;
    let width = (hi.x - lo.x + 2.0 * MARGIN).max(SCALE_BAR + 2.0 * MARGIN);
    let height = hi.y - lo.y + 3.0 * MARGIN;
    let xy = |p: &Point2<f64>| format!("{} {}", f(p.x), f(-p.y));

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}mm" height="{h}mm" viewBox="{} {} {w} {h}">"#,
        f(x0),
        f(y0),
        w = f(width),
        h = f(height)
    );
    let _ = writeln!(
        s,
        r#"<g id="tiles" fill="none" stroke="black" stroke-width="0.1">"#
    );
    for t in &plate.tiles {
        let [a, b, c] = t.corners;
        let _ = writeln!(
            s,
            r#"<path id="tile_{}" d="M {} L {} L {} Z"/>"#,
            t.triangle,
            xy(&a),
            xy(&b),
            xy(&c)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<g id="connectors" fill="none" stroke="blue" stroke-width="0.1">"#
    );
    for c in &plate.connectors {
        let angle = -c.axis().y.atan2(c.axis().x).to_degrees();
        let _ = writeln!(
            s,
            r#"<rect id="connector_{}" x="{}" y="{}" width="{}" height="{}" transform="rotate({} {})"/>"#,
            c.linkage,
            f(c.start.x),
            f(-c.start.y - c.width / 2.0),
            f(c.length),
            f(c.width),
            f(angle),
            xy(&c.start)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="seams" stroke="red" stroke-width="0.1">"#);
    for il in &plate.interlocks {
        let l = &layout.linkages[il.linkage];
        for [a, b] in l.long_edges() {
            let (p, q) = (layout.positions[a], layout.positions[b]);
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke-dasharray="0.5 0.5"/>"#,
                f(p.x),
                f(-p.y),
                f(q.x),
                f(-q.y)
            );
        }
        let _ = writeln!(
            s,
            r#"<circle id="interlock_{}" cx="{}" cy="{}" r="0.5" fill="red"/>"#,
            il.linkage,
            f(il.midpoint.x),
            f(-il.midpoint.y)
        );
    }
    let _ = writeln!(s, "</g>");
    let bar_y = -lo.y + 1.5 * MARGIN;
    let bar_x = x0 + MARGIN;
    let _ = writeln!(
        s,
        r#"<g id="scale"><line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-width="0.3"/><text x="{}" y="{}" font-size="2">10 mm</text></g>"#,
        f(bar_x),
        f(bar_x + SCALE_BAR),
        f(bar_x),
        f(bar_y - 0.5),
        y = f(bar_y)
    );
    let _ = writeln!(s, "</svg>");
    s
}

pub fn export_layout_svg(layout: &Layout, plate: &FlatPlate, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, layout_svg_string(layout, plate)).map_err(|e| Error::io(path, e))
}

/// All solids as OBJ groups `tile_<t>` and `connector_<l>`.
pub fn plate_obj_string(plate: &FlatPlate) -> String {
    let mut s = String::from("# freeshell plate\n");
    let mut base = 1;
    for solid in plate.solids() {
        let _ = writeln!(s, "g {}", solid.name);
        for v in &solid.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &solid.faces {
            let _ = writeln!(s, "f {} {} {}", t[0] + base, t[1] + base, t[2] + base);
        }
        base += solid.vertices.len();
    }
    s
}

/// Binary STL with the facets of all solids concatenated.
pub fn plate_stl_bytes(plate: &FlatPlate) -> Vec<u8> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces = Vec::new();
    for solid in plate.solids() {
        let base = vertices.len();
        vertices.extend_from_slice(&solid.vertices);
        faces.extend(solid.faces.iter().map(|f| f.map(|i| i + base)));
    }
    stl_bytes(&vertices, &faces)
}

pub fn export_plate_mesh(
    plate: &FlatPlate,
    path: impl AsRef<Path>,
    format: MeshFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MeshFormat::Obj => plate_obj_string(plate).into_bytes(),
        MeshFormat::Stl => plate_stl_bytes(plate),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
