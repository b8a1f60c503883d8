//! Printable flat plate: beveled tiles, connector bars and print settings.

mod clearance;
mod clip;
mod export;
mod fold;
mod recipe;
mod solid;
mod tile;

use nalgebra::{Matrix2, Matrix3, Point2, Point3, Vector2, Vector3};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::flatten::{Layout, LinkageState};
use crate::mesh::TargetMesh;
use tile::{build_tile, Channel};

pub use clearance::{clearance_violations, ClearanceViolation};
pub use export::{
    export_layout_svg, export_plate_mesh, layout_svg_string, plate_obj_string, plate_stl_bytes,
};
pub use fold::{fold_tile, lateral_mismatch};
pub use recipe::{print_recipe, PrintRecipe};
pub use solid::Solid;
pub use tile::WallPoint;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateParams {
    /// Total tile thickness (mm), split evenly about the mid-plane.
    pub tile_thickness: f64,
    pub connector_thickness: f64,
    /// Connector bar width (mm); `None` uses `0.3·Ē`.
    pub connector_width: Option<f64>,
    /// Air gap between connector and tile (mm).
    pub clearance: f64,
    /// Largest acceptable gap rate `gap / connector length`.
    #[serde(skip)]
    pub shrink_rate: f64,
    pub connector_layer_h: f64,
    pub tile_layer_h: f64,
    pub connector_speed: f64,
    pub tile_speed: f64,
    pub activation: String,
}

impl Default for PlateParams {
    fn default() -> Self {
        Self {
            tile_thickness: 2.4,
            connector_thickness: 0.96,
            connector_width: None,
            clearance: 0.36,
            shrink_rate: 0.14,
            connector_layer_h: 0.06,
            tile_layer_h: 0.3,
            connector_speed: 100.0,
            tile_speed: 100.0,
            activation: "water, 75–85 °C, ≥ 1 min".into(),
        }
    }
}

/// Clearance below which printed connectors tend to fuse with the tiles.
pub const MIN_SAFE_CLEARANCE: f64 = 0.36;

impl PlateParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::Config(format!(
                "plate parameter {what} is out of range"
            )))
        };
        if !(self.connector_thickness > 0.0) {
            return bad("connector_thickness");
        }
        if !(self.tile_thickness > self.connector_thickness) {
            return bad("tile_thickness");
        }
        if self.connector_width.is_some_and(|w| !(w > 0.0)) {
            return bad("connector_width");
        }
        if !(self.clearance >= 0.0) {
            return bad("clearance");
        }
        if !(self.shrink_rate > 0.0 && self.shrink_rate < 1.0) {
            return bad("shrink_rate");
        }
        for (name, v) in [
            ("connector_layer_h", self.connector_layer_h),
            ("tile_layer_h", self.tile_layer_h),
            ("connector_speed", self.connector_speed),
            ("tile_speed", self.tile_speed),
        ] {
            if !(v > 0.0) {
                return bad(name);
            }
        }
        Ok(())
    }
}

/// Rigid map from target-mesh coordinates to plate coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileFrame {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl TileFrame {
    pub fn to_plate(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn to_mesh(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (p.coords - self.translation))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    /// Layout triangle.
    pub triangle: usize,
    /// Target-mesh triangle.
    pub source: usize,
    pub frame: TileFrame,
    /// Mid-plane corners in plate coordinates.
    pub corners: [Point2<f64>; 3],
    pub solid: Solid,
    /// Lateral-wall vertices per edge `c -> c+1`.
    pub walls: [Vec<WallPoint>; 3],
    /// Channel half-height in the thickness parameter.
    pub sigma: f64,
    pub channel_half_width: f64,
    /// Largest horizontal drift of a wall between mid-plane and channel roof.
    pub tilt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connector {
    pub linkage: usize,
    /// Layout triangles at the start and end of the bar.
    pub tiles: [usize; 2],
    pub start: Point2<f64>,
    pub end: Point2<f64>,
    /// Bar length `b` (mm).
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub gap: f64,
    /// `gap / length`.
    pub gap_rate: f64,
    pub solid: Solid,
}

impl Connector {
    pub fn axis(&self) -> Vector2<f64> {
        (self.end - self.start) / self.length
    }
}

/// A cut seam to be joined by hand after deployment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interlock {
    pub linkage: usize,
    pub midpoint: Point2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatPlate {
    pub params: PlateParams,
    pub tiles: Vec<Tile>,
    pub connectors: Vec<Connector>,
    pub interlocks: Vec<Interlock>,
    pub recipe: PrintRecipe,
    pub warnings: Vec<String>,
}

impl FlatPlate {
    pub fn solids(&self) -> impl Iterator<Item = &Solid> {
        self.tiles
            .iter()
            .map(|t| &t.solid)
            .chain(self.connectors.iter().map(|c| &c.solid))
    }
}

/// Signed orientation of the layout as a whole; tiles are flipped over when
/// it runs clockwise.
fn layout_is_clockwise(layout: &Layout) -> bool {
    let total: f64 = (0..layout.triangle_count())
        .map(|t| {
            let [a, b, c] = layout.corners(t);
            (b - a).perp(&(c - a))
        })
        .sum();
    total < 0.0
}

fn fit_frame(mesh: &TargetMesh, layout: &Layout, t: usize, flip: bool) -> Result<TileFrame> {
    let v = mesh.corners(layout.source_map[t]);
    let e1 = (v[1] - v[0]).normalize();
    let mut n = (v[1] - v[0]).cross(&(v[2] - v[0])).normalize();
    let mut e2 = n.cross(&e1);
    if flip {
        e2 = -e2;
        n = -n;
    }
    let vbar = (v[0].coords + v[1].coords + v[2].coords) / 3.0;
    let q: [Vector2<f64>; 3] = std::array::from_fn(|i| {
        Vector2::new(e1.dot(&(v[i].coords - vbar)), e2.dot(&(v[i].coords - vbar)))
    });
    let l = layout.corners(t);
    let lbar = (l[0].coords + l[1].coords + l[2].coords) / 3.0;
    let mut s = Matrix2::zeros();
    for i in 0..3 {
        s += (l[i].coords - lbar) * q[i].transpose();
    }
    let [ql, ll] = [q[1] - q[0], l[1] - l[0]];
    let oriented = ql.perp(&(q[2] - q[0])) * ll.perp(&(l[2] - l[0]));
    if !(oriented > 0.0) {
        return Err(Error::Geometry(format!(
            "layout triangle {t} is flipped relative to the plate"
        )));
    }
    let theta = (s[(1, 0)] - s[(0, 1)]).atan2(s[(0, 0)] + s[(1, 1)]);
    let (sn, cs) = theta.sin_cos();
    let local = Matrix3::from_rows(&[e1.transpose(), e2.transpose(), n.transpose()]);
    let rot = Matrix3::new(cs, -sn, 0.0, sn, cs, 0.0, 0.0, 0.0, 1.0);
    let rotation = rot * local;
    let translation = Vector3::new(lbar.x, lbar.y, 0.0) - rotation * vbar;
    Ok(TileFrame {
        rotation,
        translation,
    })
}

fn connector_width(layout: &Layout, pp: &PlateParams) -> f64 {
    pp.connector_width.unwrap_or(0.3 * layout.avg_edge)
}

/// Connector bars over every non-cut linkage, axis from centroid to centroid.
pub fn generate_connectors(layout: &Layout, pp: &PlateParams) -> Result<Vec<Connector>> {
    pp.validate()?;
    let width = connector_width(layout, pp);
    let mut out = Vec::new();
    for (id, l) in layout
        .linkages
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_cut())
    {
        let (start, end) = (layout.centroid(l.tri_a), layout.centroid(l.tri_b));
        let length = (end - start).norm();
        if !(length > 1e-9 * layout.avg_edge) {
            return Err(Error::Geometry(format!(
                "linkage {id}: triangle centroids coincide"
            )));
        }
        let gap = layout.gap_value(l);
        out.push(Connector {
            linkage: id,
            tiles: [l.tri_a, l.tri_b],
            start,
            end,
            length,
            width,
            thickness: pp.connector_thickness,
            gap,
            gap_rate: gap / length,
            solid: bar(
                format!("connector_{id}"),
                start,
                end,
                width,
                pp.connector_thickness,
            ),
        });
    }
    Ok(out)
}

fn bar(name: String, start: Point2<f64>, end: Point2<f64>, width: f64, thickness: f64) -> Solid {
    let dir = (end - start).normalize();
    let side = Vector2::new(-dir.y, dir.x) * (width / 2.0);
    let mut b = solid::SolidBuilder::<usize>::new();
    let mut v = Vec::with_capacity(8);
    for (i, p) in [start - side, end - side, end + side, start + side]
        .iter()
        .enumerate()
    {
        for (j, z) in [-thickness / 2.0, thickness / 2.0].iter().enumerate() {
            v.push(b.vertex(2 * i + j, || Point3::new(p.x, p.y, *z)));
        }
    }
    let (lo, hi) = (|i: usize| v[2 * i], |i: usize| v[2 * i + 1]);
    b.quad(lo(0), lo(3), lo(2), lo(1));
    b.quad(hi(0), hi(1), hi(2), hi(3));
    for i in 0..4 {
        let j = (i + 1) % 4;
        b.quad(lo(i), lo(j), hi(j), hi(i));
    }
    b.finish(name)
}

/// Smallest half-thickness rise over the part of the triangle the channels cover.
fn channel_rise_min(
    corners: &[Point2<f64>; 3],
    lifts: &[Vector3<f64>; 3],
    channels: &[Channel],
) -> f64 {
    let tri: Vec<Point2<f64>> = if (corners[1] - corners[0]).perp(&(corners[2] - corners[0])) > 0.0
    {
        corners.to_vec()
    } else {
        vec![corners[0], corners[2], corners[1]]
    };
    let scale = (0..3)
        .map(|c| (corners[(c + 1) % 3] - corners[c]).norm())
        .fold(0.0, f64::max);
    let area2 = (corners[1] - corners[0]).perp(&(corners[2] - corners[0]));
    let rise = |p: &Point2<f64>| {
        let b0 = (corners[1] - p).perp(&(corners[2] - p)) / area2;
        let b1 = (corners[2] - p).perp(&(corners[0] - p)) / area2;
        b0 * lifts[0].z + b1 * lifts[1].z + (1.0 - b0 - b1) * lifts[2].z
    };
    channels
        .iter()
        .filter_map(|ch| clip::intersection(&tri, &ch.strip(4.0 * scale), 0.0))
        .flatten()
        .map(|p| rise(&p))
        .fold(f64::INFINITY, f64::min)
}

/// Thickened tiles placed on the layout, with channels for the connectors.
pub fn generate_tiles(layout: &Layout, mesh: &TargetMesh, pp: &PlateParams) -> Result<Vec<Tile>> {
    pp.validate()?;
    if layout
        .source_map
        .iter()
        .any(|&s| s >= mesh.triangle_count())
    {
        return Err(Error::Topology(
            "layout refers to triangles outside the mesh".into(),
        ));
    }
    let flip = layout_is_clockwise(layout);
    let half = pp.tile_thickness / 2.0;
    let channel_half_height = pp.connector_thickness / 2.0 + pp.clearance;
    let width = connector_width(layout, pp);
    let normals = mesh.vertex_normals();

    let mut channels_of: Vec<Vec<Point2<f64>>> = vec![Vec::new(); layout.triangle_count()];
    for l in layout
        .linkages
        .iter()
        .filter(|l| l.state != LinkageState::Cut)
    {
        let (ca, cb) = (layout.centroid(l.tri_a), layout.centroid(l.tri_b));
        channels_of[l.tri_a].push(cb);
        channels_of[l.tri_b].push(ca);
    }

    let mut tiles = Vec::with_capacity(layout.triangle_count());
    for t in 0..layout.triangle_count() {
        let src = layout.source_map[t];
        let frame = fit_frame(mesh, layout, t, flip)?;
        let tri = mesh.triangles()[src];
        let corners: [Point2<f64>; 3] = std::array::from_fn(|i| {
            let p = frame.to_plate(&mesh.vertices()[tri[i]]);
            Point2::new(p.x, p.y)
        });
        let lifts: [Vector3<f64>; 3] =
            std::array::from_fn(|i| frame.rotation * normals[tri[i]] * half);
        let min_rise = lifts.iter().map(|l| l.z).fold(f64::INFINITY, f64::min);
        if !(min_rise > 0.0) {
            return Err(Error::Geometry(format!(
                "triangle {t}: vertex normals fold back over the face"
            )));
        }
        let mid_area = (corners[1] - corners[0]).perp(&(corners[2] - corners[0]));
        for s in [-1.0, 1.0] {
            let p: [Point2<f64>; 3] = std::array::from_fn(|i| corners[i] + lifts[i].xy() * s);
            if (p[1] - p[0]).perp(&(p[2] - p[0])) * mid_area <= 0.0 {
                return Err(Error::Geometry(format!(
                    "triangle {t}: tile thickness {} mm exceeds the local feature size",
                    pp.tile_thickness
                )));
            }
        }
        let drift = lifts.iter().map(|l| l.xy().norm()).fold(0.0, f64::max);
        let centre = layout.centroid(t);
        let channels_at = |half_width: f64| -> Vec<Channel> {
            channels_of[t]
                .iter()
                .map(|&other| Channel {
                    start: centre,
                    dir: (other - centre).normalize(),
                    half_width,
                })
                .collect()
        };
        // A roof at level s sits at height s·rise(p), so the channel needs
        // s ≥ h / rise over its footprint. Bound first with the corners, then
        // tighten with the footprint that bound produces.
        let coarse = (channel_half_height / min_rise).min(1.0);
        let footprint_min = channel_rise_min(
            &corners,
            &lifts,
            &channels_at(width / 2.0 + pp.clearance + coarse * drift),
        );
        let sigma = if channels_of[t].is_empty() {
            coarse.min(0.5)
        } else {
            channel_half_height / footprint_min
        };
        if !(sigma < 1.0) {
            return Err(Error::Geometry(format!(
                "triangle {t}: tile too thin to house the connector channel ({:.3} mm available, {:.3} mm needed)",
                2.0 * footprint_min,
                2.0 * channel_half_height
            )));
        }
        let tilt = sigma * drift;
        let half_width = width / 2.0 + pp.clearance + tilt;
        let channels = channels_at(half_width);
        let shape = build_tile(format!("tile_{t}"), corners, lifts, &channels, sigma)?;
        tiles.push(Tile {
            triangle: t,
            source: src,
            frame,
            corners,
            solid: shape.solid,
            walls: shape.walls,
            sigma,
            channel_half_width: half_width,
            tilt,
        });
    }
    Ok(tiles)
}

/// Tiles, connectors, seam annotations, recipe and warnings for a layout.
pub fn generate_plate(layout: &Layout, mesh: &TargetMesh, pp: &PlateParams) -> Result<FlatPlate> {
    let tiles = generate_tiles(layout, mesh, pp)?;
    let connectors = generate_connectors(layout, pp)?;
    let interlocks = layout
        .linkages
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_cut())
        .map(|(id, l)| {
            let q = l.quad().map(|s| layout.positions[s].coords);
            Interlock {
                linkage: id,
                midpoint: Point2::from((q[0] + q[1] + q[2] + q[3]) / 4.0),
            }
        })
        .collect();
    let mut warnings = Vec::new();
    let over: Vec<String> = connectors
        .iter()
        .filter(|c| c.gap_rate > pp.shrink_rate)
        .map(|c| format!("{} (r = {:.4})", c.linkage, c.gap_rate))
        .collect();
    if !over.is_empty() {
        warnings.push(format!(
            "gap rate exceeds {} on linkages: {}",
            pp.shrink_rate,
            over.join(", ")
        ));
    }
    if pp.clearance < MIN_SAFE_CLEARANCE {
        warnings.push(format!(
            "clearance {} mm is below {MIN_SAFE_CLEARANCE} mm; connectors may fuse to tiles",
            pp.clearance
        ));
    }
    let recipe = print_recipe(pp);
    Ok(FlatPlate {
        params: pp.clone(),
        tiles,
        connectors,
        interlocks,
        recipe,
        warnings,
    })
}
