use std::fmt::Write;

use super::{PlateParams, MIN_SAFE_CLEARANCE};

/// Print and activation settings for the plate.
#[derive(Debug, Clone, PartialEq)]
pub struct PrintRecipe {
    pub connector_layer_h: f64,
    pub tile_layer_h: f64,
    pub connector_speed: f64,
    pub tile_speed: f64,
    pub connector_fill: String,
    pub activation: String,
    pub notes: Vec<String>,
}

impl PrintRecipe {
    /// `key = value` lines followed by notes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "connector_layer_h = {}", self.connector_layer_h);
        let _ = writeln!(s, "tile_layer_h = {}", self.tile_layer_h);
        let _ = writeln!(s, "connector_speed = {}", self.connector_speed);
        let _ = writeln!(s, "tile_speed = {}", self.tile_speed);
        let _ = writeln!(s, "connector_fill = {}", self.connector_fill);
        let _ = writeln!(s, "activation = {}", self.activation);
        for n in &self.notes {
            let _ = writeln!(s, "note = {n}");
        }
        s
    }
}

pub fn print_recipe(pp: &PlateParams) -> PrintRecipe {
    let mut notes = Vec::new();
    if pp.tile_speed != PlateParams::default().tile_speed {
        notes.push(format!(
            "tile_speed set to {} mm/s; any speed from 80 mm/s works for tiles",
            pp.tile_speed
        ));
    }
    if pp.clearance < MIN_SAFE_CLEARANCE {
        notes.push(format!(
            "clearance {} mm is below {MIN_SAFE_CLEARANCE} mm; connectors may fuse to tiles",
            pp.clearance
        ));
    }
    PrintRecipe {
        connector_layer_h: pp.connector_layer_h,
        tile_layer_h: pp.tile_layer_h,
        connector_speed: pp.connector_speed,
        tile_speed: pp.tile_speed,
        connector_fill: "concentric".into(),
        activation: pp.activation.clone(),
        notes,
    }
}
