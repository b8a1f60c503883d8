//! Synthetic target meshes used by the tests, the guide and the CLI examples.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Point3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::TargetMesh;

fn build(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> TargetMesh {
    TargetMesh::new(vertices, triangles).expect("fixture meshes are valid")
}

pub fn equilateral_triangle(side: f64) -> TargetMesh {
    build(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(side, 0.0, 0.0),
            Point3::new(0.5 * side, 0.5 * 3f64.sqrt() * side, 0.0),
        ],
        vec![[0, 1, 2]],
    )
}

/// Square `[0, side]²` in `z = 0`, split along the `(0,0)-(side,side)` diagonal.
pub fn flat_square(side: f64) -> TargetMesh {
    build(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(side, 0.0, 0.0),
            Point3::new(side, side, 0.0),
            Point3::new(0.0, side, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// `n × n` quads over `[0, side]²`, each split along its rising diagonal.
pub fn grid_square(n: usize, side: f64) -> TargetMesh {
    let h = side / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut v = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            v.push(Point3::new(i as f64 * h, j as f64 * h, 0.0));
        }
    }
    let mut t = Vec::new();
    for j in 0..n {
        for i in 0..n {
            t.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            t.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(v, t)
}

/// Equilateral lattice with `nx` triangles pairs per strip and `ny` strips.
pub fn tri_lattice(nx: usize, ny: usize, spacing: f64) -> TargetMesh {
    let (v, t) = lattice_parts(nx, ny, spacing);
    build(v, t)
}

fn lattice_parts(nx: usize, ny: usize, h: f64) -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let row_h = h * 3f64.sqrt() / 2.0;
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut v = Vec::new();
    for j in 0..=ny {
        let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        for i in 0..=nx {
            v.push(Point3::new(i as f64 * h + shift, j as f64 * row_h, 0.0));
        }
    }
    let mut t = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if j % 2 == 0 {
                t.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
                t.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            } else {
                t.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                t.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
    }
    (v, t)
}

/// Equilateral lattice with one interior vertex pushed almost onto the
/// opposite edge of a neighbouring triangle, leaving a sliver of aspect
/// ratio about 100.
pub fn sliver_lattice(nx: usize, ny: usize, spacing: f64) -> TargetMesh {
    let (mut v, t) = lattice_parts(nx, ny, spacing);
    let p = (ny / 2) * (nx + 1) + nx / 2;
    let tri = t
        .iter()
        .find(|tri| {
            tri.contains(&p) && tri.iter().all(|&x| x == p || !on_lattice_border(x, nx, ny))
        })
        .copied()
        .expect("interior triangle next to the centre vertex");
    let others: Vec<usize> = tri.iter().copied().filter(|&x| x != p).collect();
    let (a, b) = (v[others[0]], v[others[1]]);
    let mid = nalgebra::center(&a, &b);
    let toward = (v[p] - mid).normalize();
    v[p] = mid + toward * (0.01 * spacing);
    build(v, t)
}

fn on_lattice_border(x: usize, nx: usize, ny: usize) -> bool {
    let (i, j) = (x % (nx + 1), x / (nx + 1));
    i == 0 || i == nx || j == 0 || j == ny
}

/// Hemisphere of radius 40 mm with exactly 143 faces: a pole vertex and five
/// latitude rings of 6, 12, 18, 24 and 23 vertices, the last on the equator.
pub fn hemisphere() -> TargetMesh {
    hemisphere_with(40.0, &[6, 12, 18, 24, 23])
}

pub fn hemisphere_with(radius: f64, rings: &[usize]) -> TargetMesh {
    let k_max = rings.len();
    let mut v = vec![Point3::new(0.0, 0.0, radius)];
    let mut ring_ids = Vec::new();
    for (k, &n) in rings.iter().enumerate() {
        let theta = (k + 1) as f64 * FRAC_PI_2 / k_max as f64;
        let start = v.len();
        for j in 0..n {
            let phi = 2.0 * PI * j as f64 / n as f64;
            v.push(Point3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
        ring_ids.push((start, n));
    }
    let mut t = Vec::new();
    let (s0, n0) = ring_ids[0];
    for j in 0..n0 {
        t.push([0, s0 + j, s0 + (j + 1) % n0]);
    }
    for w in ring_ids.windows(2) {
        let ((si, ni), (so, no)) = (w[0], w[1]);
        let (mut i, mut o) = (0usize, 0usize);
        while i < ni || o < no {
            let next_inner = (i + 1) as f64 / ni as f64;
            let next_outer = (o + 1) as f64 / no as f64;
            if o < no && (i >= ni || next_outer <= next_inner) {
                t.push([si + i % ni, so + o % no, so + (o + 1) % no]);
                o += 1;
            } else {
                t.push([si + i % ni, so + o % no, si + (i + 1) % ni]);
                i += 1;
            }
        }
    }
    build(v, t)
}

/// Three lateral faces of a triangular pyramid with the base removed. The
/// apex is an interior vertex whose face angles are 80° each, leaving a 120°
/// angle deficit.
pub fn cone_cap() -> TargetMesh {
    let rho = 10.0;
    let apex_angle = 80f64.to_radians();
    // base edge² = 3ρ² = 2 s² (1 − cos apex) with slant s² = ρ² + h²
    let h = (3.0 * rho * rho / (2.0 * (1.0 - apex_angle.cos())) - rho * rho).sqrt();
    cone_cap_with(rho, h)
}

pub fn cone_cap_with(rho: f64, height: f64) -> TargetMesh {
    let mut v = vec![Point3::new(0.0, 0.0, height)];
    for j in 0..3 {
        let phi = FRAC_PI_2 + 2.0 * PI * j as f64 / 3.0;
        v.push(Point3::new(rho * phi.cos(), rho * phi.sin(), 0.0));
    }
    build(v, vec![[0, 1, 2], [0, 2, 3], [0, 3, 1]])
}

/// [`cone_cap`] cut open along the lateral edge from the apex to the first
/// base vertex, which is duplicated. Intrinsically flat.
pub fn cone_cap_seamed() -> TargetMesh {
    let closed = cone_cap();
    let mut v = closed.vertices().to_vec();
    v.push(v[1]);
    build(v, vec![[0, 1, 2], [0, 2, 3], [0, 3, 4]])
}

/// Two congruent triangles sharing the edge `(0,0,0)-(0,10,0)`, each folded
/// down by `alpha` about that edge, so the face normals differ by `2·alpha`.
pub fn hinge(alpha: f64, width: f64) -> TargetMesh {
    let (c, s) = (alpha.cos(), alpha.sin());
    build(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.0, 10.0, 0.0),
            Point3::new(-width * c, 5.0, -width * s),
            Point3::new(width * c, 5.0, -width * s),
        ],
        vec![[0, 1, 2], [1, 0, 3]],
    )
}

/// Flat annulus with `n_theta` angular and `n_r` radial segments.
pub fn annulus(n_theta: usize, n_r: usize, r_in: f64, r_out: f64) -> TargetMesh {
    let idx = |i: usize, j: usize| j * n_theta + i % n_theta;
    let mut v = Vec::new();
    for j in 0..=n_r {
        let r = r_in + (r_out - r_in) * j as f64 / n_r as f64;
        for i in 0..n_theta {
            let phi = 2.0 * PI * i as f64 / n_theta as f64;
            v.push(Point3::new(r * phi.cos(), r * phi.sin(), 0.0));
        }
    }
    let mut t = Vec::new();
    for j in 0..n_r {
        for i in 0..n_theta {
            t.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            t.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(v, t)
}

/// Small curved lattice patch: an equilateral lattice lifted onto a random
/// paraboloid or saddle. Used for randomized pipeline runs.
pub fn random_patch(seed: u64) -> TargetMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = rng.random_range(2..=4);
    let ny = rng.random_range(1..=3);
    let spacing = 10.0;
    let (mut v, t) = lattice_parts(nx, ny, spacing);
    let cx = nx as f64 * spacing / 2.0;
    let cy = ny as f64 * spacing * 3f64.sqrt() / 4.0;
    let kx: f64 = rng.random_range(0.005..0.03);
    let ky: f64 = rng.random_range(0.005..0.03) * if rng.random_bool(0.3) { -1.0 } else { 1.0 };
    for p in &mut v {
        let (dx, dy) = (p.x - cx, p.y - cy);
        p.z = -(kx * dx * dx + ky * dy * dy);
    }
    build(v, t)
}
