//! Maps printed tiles back onto the target surface.

use nalgebra::Point3;

use super::{FlatPlate, Solid, Tile};
use crate::error::{Error, Result};
use crate::flatten::Layout;

/// The tile solid in target-mesh coordinates.
pub fn fold_tile(tile: &Tile) -> Solid {
    Solid {
        name: tile.solid.name.clone(),
        vertices: tile
            .solid
            .vertices
            .iter()
            .map(|p| tile.frame.to_mesh(p))
            .collect(),
        faces: tile.solid.faces.clone(),
    }
}

/// Bilinear patch through the four extreme corners of one folded wall.
struct Patch {
    bottom: [Point3<f64>; 2],
    top: [Point3<f64>; 2],
}

impl Patch {
    fn of(tile: &Tile, edge: usize) -> Option<Self> {
        let corner = |t: f64, s: f64| {
            tile.walls[edge]
                .iter()
                .find(|w| (w.t - t).abs() < 1e-9 && (w.s - s).abs() < 1e-12)
                .map(|w| tile.frame.to_mesh(&tile.solid.vertices[w.vertex]))
        };
        Some(Self {
            bottom: [corner(0.0, -1.0)?, corner(1.0, -1.0)?],
            top: [corner(0.0, 1.0)?, corner(1.0, 1.0)?],
        })
    }

    fn at(&self, t: f64, s: f64) -> Point3<f64> {
        let lo = self.bottom[0] + (self.bottom[1] - self.bottom[0]) * t;
        let hi = self.top[0] + (self.top[1] - self.top[0]) * t;
        lo + (hi - lo) * ((1.0 + s) / 2.0)
    }
}

/// Largest distance between a folded wall vertex of one tile and the
/// matching point on its neighbour's folded wall, over every linkage.
pub fn lateral_mismatch(plate: &FlatPlate, layout: &Layout) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (id, l) in layout.linkages.iter().enumerate() {
        let (a, b) = (&plate.tiles[l.tri_a], &plate.tiles[l.tri_b]);
        let patch = Patch::of(b, l.k % 3).ok_or_else(|| {
            Error::Geometry(format!(
                "linkage {id}: wall corners missing on tile {}",
                l.tri_b
            ))
        })?;
        for w in &a.walls[l.i % 3] {
            let p = a.frame.to_mesh(&a.solid.vertices[w.vertex]);
            worst = worst.max((p - patch.at(1.0 - w.t, w.s)).norm());
        }
    }
    Ok(worst)
}
