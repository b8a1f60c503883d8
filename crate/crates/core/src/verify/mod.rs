//! Quality metrics for layouts and deployed shapes.

mod exact;
mod overlap;

use std::fmt::Write;
use std::fs;
use std::path::Path;

use nalgebra::{Point2, Point3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::flatten::{EnergyParams, Layout, LinkageState};
use crate::mesh::TargetMesh;
use crate::plate::FlatPlate;
use crate::spatial::TriangleBvh;

pub use exact::orient2d;
pub use overlap::{overlapping_pairs, triangles_overlap};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutReport {
    pub max_gap: f64,
    pub avg_gap: f64,
    /// Counts over `[0, histogram_max]` in equal bins; the top bin is closed.
    pub gap_histogram: [usize; HISTOGRAM_BINS],
    pub histogram_max: f64,
    pub max_edge_distortion: f64,
    /// Largest deviation of a linkage quad angle from 90°, in degrees.
    pub max_shear_deg: f64,
    pub overlap_pairs: usize,
    pub retained: usize,
    pub cut_count: usize,
    pub connected: bool,
}

/// Interior angles of a linkage quad, skipping corners next to a collapsed side.
fn quad_angles(q: [Point2<f64>; 4], min_side: f64) -> Vec<f64> {
    (0..4)
        .filter_map(|c| {
            let u = q[(c + 3) % 4] - q[c];
            let v = q[(c + 1) % 4] - q[c];
            (u.norm() > min_side && v.norm() > min_side).then(|| u.angle(&v))
        })
        .collect()
}

pub fn layout_metrics(layout: &Layout, p: &EnergyParams) -> LayoutReport {
    let mut distortion: f64 = 0.0;
    for (t, rest) in layout.rest_edges.iter().enumerate() {
        for c in 0..3 {
            let r = rest[c] * p.edge_scale;
            let len = layout.edge_length(3 * t + c, 3 * t + (c + 1) % 3);
            distortion = distortion.max((len - r).abs() / r);
        }
    }
    let retained: Vec<_> = layout
        .linkages
        .iter()
        .filter(|l| l.state == LinkageState::Retained)
        .collect();
    let gaps: Vec<f64> = retained.iter().map(|l| layout.gap_value(l)).collect();
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let avg_gap = if gaps.is_empty() {
        0.0
    } else {
        gaps.iter().sum::<f64>() / gaps.len() as f64
    };
    let histogram_max = max_gap.max((1.0 + p.eps_tor) * p.d);
    let mut gap_histogram = [0; HISTOGRAM_BINS];
    for g in &gaps {
        let bin = if histogram_max > 0.0 {
            (g / histogram_max * HISTOGRAM_BINS as f64) as usize
        } else {
            0
        };
        gap_histogram[bin.min(HISTOGRAM_BINS - 1)] += 1;
    }
    let min_side = 1e-9 * layout.avg_edge;
    let max_shear_deg = retained
        .iter()
        .flat_map(|l| quad_angles(l.quad().map(|s| layout.positions[s]), min_side))
        .map(|a| (a.to_degrees() - 90.0).abs())
        .fold(0.0, f64::max);
    let tris: Vec<[Point2<f64>; 3]> = (0..layout.triangle_count())
        .map(|t| layout.corners(t))
        .collect();
    LayoutReport {
        max_gap,
        avg_gap,
        gap_histogram,
        histogram_max,
        max_edge_distortion: distortion,
        max_shear_deg,
        overlap_pairs: overlapping_pairs(&tris).len(),
        retained: retained.len(),
        cut_count: layout.cut_count(),
        connected: layout.graph_connected(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub avg: f64,
    pub max: f64,
    pub per_point: Vec<f64>,
}

/// Distance from each point to the nearest point on the mesh.
pub fn point_to_mesh_distance(points: &[Point3<f64>], mesh: &TargetMesh) -> Result<DistanceReport> {
    if points.is_empty() {
        return Err(Error::Domain("no points to measure".into()));
    }
    let bvh = TriangleBvh::new(mesh.vertices(), mesh.triangles());
    let per_point: Vec<f64> = points
        .iter()
        .map(|p| {
            bvh.nearest(p)
                .map_or(f64::INFINITY, |n| n.distance_squared.sqrt())
        })
        .collect();
    Ok(DistanceReport {
        avg: per_point.iter().sum::<f64>() / per_point.len() as f64,
        max: per_point.iter().copied().fold(0.0, f64::max),
        per_point,
    })
}

/// Line-oriented `key = value` text.
pub trait Report {
    fn to_text(&self) -> String;
}

impl Report for LayoutReport {
    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "max_gap = {}", self.max_gap);
        let _ = writeln!(s, "avg_gap = {}", self.avg_gap);
        let _ = writeln!(s, "max_edge_distortion = {}", self.max_edge_distortion);
        let _ = writeln!(s, "max_shear_deg = {}", self.max_shear_deg);
        let _ = writeln!(s, "overlap_pairs = {}", self.overlap_pairs);
        let _ = writeln!(s, "retained = {}", self.retained);
        let _ = writeln!(s, "cut_count = {}", self.cut_count);
        let _ = writeln!(s, "connected = {}", self.connected);
        let _ = writeln!(s, "histogram_max = {}", self.histogram_max);
        let bins: Vec<String> = self.gap_histogram.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "gap_histogram = {}", bins.join(" "));
        s
    }
}

impl Report for DistanceReport {
    fn to_text(&self) -> String {
        format!(
            "points = {}\navg_mm = {}\nmax_mm = {}\n",
            self.per_point.len(),
            self.avg,
            self.max
        )
    }
}

pub fn write_report(report: &impl Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report.to_text()).map_err(|e| Error::io(path, e))
}

/// Points sampled uniformly by area on the folded tile mid-planes, each
/// moved by isotropic Gaussian noise of standard deviation `sigma`.
pub fn synthetic_scan(
    plate: &FlatPlate,
    count: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<Point3<f64>>> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "scan noise {sigma} must be non-negative"
        )));
    }
    let tris: Vec<[Point3<f64>; 3]> = plate
        .tiles
        .iter()
        .map(|t| {
            t.corners
                .map(|c| t.frame.to_mesh(&Point3::new(c.x, c.y, 0.0)))
        })
        .collect();
    let mut cumulative = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for [a, b, c] in &tris {
        total += (b - a).cross(&(c - a)).norm() / 2.0;
        cumulative.push(total);
    }
    if tris.is_empty() || !(total > 0.0) {
        return Err(Error::Domain("plate has no tile area to sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let pick: f64 = rng.random_range(0.0..total);
        let t = cumulative
            .partition_point(|&c| c <= pick)
            .min(tris.len() - 1);
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            (u, v) = (1.0 - u, 1.0 - v);
        }
        let [a, b, c] = tris[t];
        let jitter = Vector3::new(
            noise.sample(&mut rng),
            noise.sample(&mut rng),
            noise.sample(&mut rng),
        );
        out.push(a + (b - a) * u + (c - a) * v + jitter);
    }
    Ok(out)
}

/// XYZ point cloud: three numbers per line; blank lines and `#` comments skipped.
pub fn read_xyz(path: impl AsRef<Path>) -> Result<Vec<Point3<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.into(),
            line: n + 1,
            message,
        };
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|e| bad(format!("{x:?}: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != 3 || v.iter().any(|x| !x.is_finite()) {
            return Err(bad("expected three finite coordinates".into()));
        }
        out.push(Point3::new(v[0], v[1], v[2]));
    }
    Ok(out)
}

pub fn xyz_string(points: &[Point3<f64>]) -> String {
    let mut s = String::with_capacity(points.len() * 48);
    for p in points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    s
}

pub fn write_xyz(points: &[Point3<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, xyz_string(points)).map_err(|e| Error::io(path, e))
}
