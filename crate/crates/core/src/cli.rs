//! Pipeline driver behind the `freeshell` binary.
//!
//! Every stage writes its artifacts into the output directory. A stage run
//! on its own reads what the previous stage left there, so `plate` and
//! `verify` can be re-run without flattening again.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use crate::error::{Error, Result, StageExt};
use crate::flatten::{
    layout_obj_string, read_layout, run_discrete_flattening_observed, write_layout, EnergyParams,
    FlattenConfig, FlattenOutcome, Layout,
};
use crate::mesh::{isotropic_remesh, load_mesh, save_mesh, MeshFormat, TargetMesh};
use crate::plate::{
    clearance_violations, export_layout_svg, export_plate_mesh, generate_plate, lateral_mismatch,
    FlatPlate, PlateParams,
};
use crate::verify::{
    layout_metrics, point_to_mesh_distance, read_xyz, synthetic_scan, write_xyz, Report,
};

pub const REMESHED: &str = "remeshed.obj";
pub const TARGET: &str = "target.obj";
pub const LAYOUT: &str = "layout.txt";
pub const LAYOUT_OBJ: &str = "layout.obj";
pub const STATS: &str = "flatten_stats.txt";
pub const PLATE_OBJ: &str = "plate.obj";
pub const PLATE_STL: &str = "plate.stl";
pub const PLATE_SVG: &str = "plate.svg";
pub const RECIPE: &str = "recipe.txt";
pub const SCAN: &str = "scan.xyz";
pub const REPORT: &str = "report.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Remesh,
    Flatten,
    Plate,
    Verify,
    All,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemeshConfig {
    /// Target edge length (mm); `None` keeps the input mesh as it is.
    pub target_len: Option<f64>,
    pub iterations: usize,
}

impl Default for RemeshConfig {
    fn default() -> Self {
        Self {
            target_len: None,
            iterations: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Measured point cloud (XYZ); when absent a synthetic scan is sampled
    /// from the folded plate.
    pub scan: Option<PathBuf>,
    pub scan_points: usize,
    /// Standard deviation of the synthetic scan noise (mm).
    pub scan_sigma: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            scan: None,
            scan_points: 2000,
            scan_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    /// Dump a layout OBJ per outer iteration into `debug/`.
    pub debug_dumps: bool,
    pub remesh: RemeshConfig,
    pub flatten: FlattenConfig,
    pub plate: PlateParams,
    pub verify: VerifyConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.plate.shrink_rate = cfg.flatten.shrink_rate;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .remesh
            .target_len
            .is_some_and(|l| !(l > 0.0 && l.is_finite()))
        {
            return Err(Error::Config("remesh.target_len must be positive".into()));
        }
        if !(self.verify.scan_sigma >= 0.0) {
            return Err(Error::Config(
                "verify.scan_sigma must be non-negative".into(),
            ));
        }
        if self.verify.scan_points == 0 {
            return Err(Error::Config("verify.scan_points must be positive".into()));
        }
        self.flatten.validate()?;
        self.plate.validate()
    }

    fn out_dir(&self) -> Result<&Path> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory given".into()))
    }

    fn input_path(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Config("no input mesh given".into()))
    }
}

/// Files written by a run, in the order they were produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub artifacts: Vec<PathBuf>,
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    out: &'a Path,
    log: &'a mut dyn FnMut(&str),
    summary: RunSummary,
}

impl Run<'_> {
    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.summary.artifacts.push(path);
        Ok(())
    }

    fn note(&mut self, path: PathBuf) {
        self.summary.artifacts.push(path);
    }

    fn remesh(&mut self) -> Result<TargetMesh> {
        let mesh = load_mesh(self.cfg.input_path()?)?;
        let mesh = match self.cfg.remesh.target_len {
            Some(len) => isotropic_remesh(&mesh, len, self.cfg.remesh.iterations)?,
            None => mesh,
        };
        let path = self.out.join(REMESHED);
        save_mesh(&mesh, &path, MeshFormat::Obj)?;
        self.note(path);
        (self.log)(&format!(
            "remesh: {} vertices, {} triangles",
            mesh.vertex_count(),
            mesh.triangle_count()
        ));
        Ok(mesh)
    }

    fn flatten(&mut self, mesh: &TargetMesh) -> Result<FlattenOutcome> {
        let debug = self.cfg.debug_dumps.then(|| self.out.join("debug"));
        if let Some(dir) = &debug {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut dump_error = None;
        let mut dumps = Vec::new();
        let outcome = run_discrete_flattening_observed(mesh, &self.cfg.flatten, |rec, layout| {
            (self.log)(&rec.to_string());
            if let Some(dir) = &debug {
                let path = dir.join(format!("{}_{:03}.obj", rec.phase, rec.iteration));
                match fs::write(&path, layout_obj_string(layout)) {
                    Ok(()) => dumps.push(path),
                    Err(e) => {
                        dump_error.get_or_insert(Error::io(&path, e));
                    }
                }
            }
        })?;
        if let Some(e) = dump_error {
            return Err(e);
        }
        self.summary.artifacts.extend(dumps);
        let target = self.out.join(TARGET);
        save_mesh(mesh, &target, MeshFormat::Obj)?;
        self.note(target);
        let layout_path = self.out.join(LAYOUT);
        write_layout(&outcome.layout, &layout_path)?;
        self.note(layout_path);
        self.write(LAYOUT_OBJ, layout_obj_string(&outcome.layout))?;
        self.write(STATS, flatten_stats(&outcome))?;
        (self.log)(&format!(
            "flatten: {} cuts, mean gap {:?} (target {:.6})",
            outcome.layout.cut_count(),
            outcome.refine.final_avg_gap,
            outcome.d_target
        ));
        Ok(outcome)
    }

    fn plate(&mut self, mesh: &TargetMesh, layout: &Layout) -> Result<FlatPlate> {
        let plate = generate_plate(layout, mesh, &self.cfg.plate)?;
        for (name, format) in [(PLATE_OBJ, MeshFormat::Obj), (PLATE_STL, MeshFormat::Stl)] {
            let path = self.out.join(name);
            export_plate_mesh(&plate, &path, format)?;
            self.note(path);
        }
        let svg = self.out.join(PLATE_SVG);
        export_layout_svg(layout, &plate, &svg)?;
        self.note(svg);
        self.write(RECIPE, plate.recipe.to_text())?;
        for w in &plate.warnings {
            (self.log)(&format!("warning: {w}"));
        }
        (self.log)(&format!(
            "plate: {} tiles, {} connectors, {} seams",
            plate.tiles.len(),
            plate.connectors.len(),
            plate.interlocks.len()
        ));
        Ok(plate)
    }

    fn verify(&mut self, mesh: &TargetMesh, layout: &Layout, plate: &FlatPlate) -> Result<()> {
        let f = &self.cfg.flatten;
        let params = EnergyParams {
            w_rigid: 1.0,
            w_gap: 1.0,
            w_fair: 1.0,
            edge_scale: 1.0,
            gap_scale: 1.0,
            d: f.target_gap_for(layout.avg_edge)?,
            eps_tor: f.eps_tor,
            cut_rate: f.cut_rate,
        };
        let metrics = layout_metrics(layout, &params);
        let points = match &self.cfg.verify.scan {
            Some(path) => read_xyz(path)?,
            None => {
                let v = &self.cfg.verify;
                let pts = synthetic_scan(plate, v.scan_points, v.scan_sigma, self.cfg.seed)?;
                let path = self.out.join(SCAN);
                write_xyz(&pts, &path)?;
                self.note(path);
                pts
            }
        };
        let distance = point_to_mesh_distance(&points, mesh)?;
        let mut text = metrics.to_text();
        let _ = writeln!(text, "target_gap = {}", params.d);
        let _ = writeln!(
            text,
            "lateral_mismatch_mm = {}",
            lateral_mismatch(plate, layout)?
        );
        let _ = writeln!(
            text,
            "clearance_violations = {}",
            clearance_violations(plate).len()
        );
        let _ = writeln!(text, "warnings = {}", plate.warnings.len());
        text.push_str(&distance.to_text());
        self.write(REPORT, &text)?;
        (self.log)(&format!(
            "verify: max gap {:.6}, overlaps {}, connected {}, scan avg {:.6} max {:.6}",
            metrics.max_gap, metrics.overlap_pairs, metrics.connected, distance.avg, distance.max
        ));
        Ok(())
    }
}

fn flatten_stats(o: &FlattenOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "avg_edge = {}", o.avg_edge);
    let _ = writeln!(s, "d_target = {}", o.d_target);
    let _ = writeln!(s, "d_coarse = {}", o.d_coarse);
    let _ = writeln!(s, "amplification = {}", o.align.amplification);
    let _ = writeln!(s, "align_iterations = {}", o.align.iterations);
    let _ = writeln!(s, "coarse_iterations = {}", o.coarse.iterations);
    let _ = writeln!(s, "coarse_a_max = {}", o.coarse.a_max);
    let _ = writeln!(s, "refine_steps = {}", o.refine.steps);
    match o.refine.final_avg_gap {
        Some(g) => {
            let _ = writeln!(s, "final_avg_gap = {g}");
        }
        None => s.push_str("final_avg_gap = none\n"),
    }
    let _ = writeln!(s, "cut_count = {}", o.layout.cut_count());
    for line in o.trace_lines() {
        let _ = writeln!(s, "trace = {line}");
    }
    s
}

fn load_stage_inputs(out: &Path) -> Result<(TargetMesh, Layout)> {
    let mesh = load_mesh(out.join(TARGET))?;
    let layout = read_layout(out.join(LAYOUT))?;
    if layout
        .source_map
        .iter()
        .any(|&t| t >= mesh.triangle_count())
    {
        return Err(Error::Topology(format!(
            "{} does not match {}",
            out.join(LAYOUT).display(),
            out.join(TARGET).display()
        )));
    }
    Ok((mesh, layout))
}

/// Runs `cmd` and writes its artifacts into the configured output directory.
/// `log` receives progress lines.
pub fn run_pipeline(
    cmd: Command,
    cfg: &PipelineConfig,
    log: &mut dyn FnMut(&str),
) -> Result<RunSummary> {
    cfg.validate()?;
    let out = cfg.out_dir()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut run = Run {
        cfg,
        out,
        log,
        summary: RunSummary::default(),
    };
    let started = Instant::now();
    match cmd {
        Command::Remesh => {
            run.remesh().stage("remesh")?;
        }
        Command::Flatten => {
            let mesh = load_mesh(cfg.input_path()?).stage("flatten")?;
            run.flatten(&mesh).stage("flatten")?;
        }
        Command::Plate => {
            let (mesh, layout) = load_stage_inputs(out).stage("plate")?;
            run.plate(&mesh, &layout).stage("plate")?;
        }
        Command::Verify => {
            let (mesh, layout) = load_stage_inputs(out).stage("verify")?;
            let plate = generate_plate(&layout, &mesh, &cfg.plate).stage("verify")?;
            run.verify(&mesh, &layout, &plate).stage("verify")?;
        }
        Command::All => {
            let mesh = run.remesh().stage("remesh")?;
            let outcome = run.flatten(&mesh).stage("flatten")?;
            let plate = run.plate(&mesh, &outcome.layout).stage("plate")?;
            run.verify(&mesh, &outcome.layout, &plate).stage("verify")?;
        }
    }
    (run.log)(&format!("done in {:.2} s", started.elapsed().as_secs_f64()));
    Ok(run.summary)
}
