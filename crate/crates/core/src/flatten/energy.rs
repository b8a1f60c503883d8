use nalgebra::{Point2, Vector2};

use super::layout::{Layout, LinkageState};
use crate::error::{Error, Result};
use crate::mesh::find;
use crate::optimizer::{minimize_in_place, MinimizeOptions, Objective, SolveStats};

/// Weights, multipliers and tolerances of the flattening energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub w_rigid: f64,
    pub w_gap: f64,
    pub w_fair: f64,
    /// Multiplier on rest edge lengths in the rigidity term.
    pub edge_scale: f64,
    /// Multiplier on `d` in the gap and fairness targets.
    pub gap_scale: f64,
    /// Target gap (mm).
    pub d: f64,
    pub eps_tor: f64,
    /// Cutting rate `c ∈ [0, 1]`.
    pub cut_rate: f64,
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.w_rigid >= 0.0
            && self.w_gap >= 0.0
            && self.w_fair >= 0.0
            && self.d >= 0.0
            && self.eps_tor >= 0.0
            && (0.0..=1.0).contains(&self.cut_rate)
            && self.edge_scale > 0.0
            && self.gap_scale >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "energy parameters out of range: {self:?}"
            )))
        }
    }
}

/// The three energy terms, unweighted, and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyTerms {
    pub rigid: f64,
    pub gap: f64,
    pub fair: f64,
    pub total: f64,
}

/// Squared-length regularizer relative to `Ē²`.
const LENGTH_EPS: f64 = 1e-18;

/// Adds `w·(‖x_b − x_a‖ − target)²` and its gradient.
#[inline]
fn spring(
    pos: &[Point2<f64>],
    grad: &mut [Vector2<f64>],
    a: usize,
    b: usize,
    target: f64,
    w: f64,
    reg: f64,
) -> f64 {
    let e = pos[b] - pos[a];
    let len = (e.norm_squared() + reg).sqrt();
    let r = len - target;
    if w != 0.0 {
        let g = e * (2.0 * w * r / len);
        grad[b] += g;
        grad[a] -= g;
    }
    r * r
}

/// Energy terms at `pos` with the gradient of the weighted total written
/// into `grad` (per slot).
pub fn evaluate(
    layout: &Layout,
    pos: &[Point2<f64>],
    p: &EnergyParams,
    grad: &mut [Vector2<f64>],
) -> EnergyTerms {
    grad.iter_mut().for_each(|g| *g = Vector2::zeros());
    let inv = 1.0 / (layout.avg_edge * layout.avg_edge);
    let reg = LENGTH_EPS * layout.avg_edge * layout.avg_edge;
    let mut terms = EnergyTerms::default();

    let wr = p.w_rigid * inv;
    for (t, rest) in layout.rest_edges.iter().enumerate() {
        for c in 0..3 {
            let (a, b) = (3 * t + c, 3 * t + (c + 1) % 3);
            terms.rigid += spring(pos, grad, a, b, rest[c] * p.edge_scale, wr, reg);
        }
    }

    let gap_target = p.d * p.gap_scale;
    let wg = p.w_gap * inv;
    let wf = p.w_fair * inv;
    for l in layout
        .linkages
        .iter()
        .filter(|l| l.state == LinkageState::Retained)
    {
        for [a, b] in l.short_edges() {
            terms.gap += spring(pos, grad, a, b, gap_target, wg, reg);
        }
        let h = (l.rest_len * l.rest_len + gap_target * gap_target).sqrt();
        for [a, b] in l.diagonals() {
            terms.fair += spring(pos, grad, a, b, h, wf, reg);
        }
    }
    terms.rigid *= inv;
    terms.gap *= inv;
    terms.fair *= inv;
    terms.total = p.w_rigid * terms.rigid + p.w_gap * terms.gap + p.w_fair * terms.fair;
    terms
}

/// Weighted energy and its gradient over all layout coordinates, laid out as
/// `[x0, y0, x1, y1, …]` by slot.
pub fn energy_and_gradient(layout: &Layout, p: &EnergyParams) -> (f64, Vec<f64>) {
    let mut g = vec![Vector2::zeros(); layout.positions.len()];
    let terms = evaluate(layout, &layout.positions, p, &mut g);
    (terms.total, g.iter().flat_map(|v| [v.x, v.y]).collect())
}

pub fn energy_terms(layout: &Layout, p: &EnergyParams) -> EnergyTerms {
    let mut g = vec![Vector2::zeros(); layout.positions.len()];
    evaluate(layout, &layout.positions, p, &mut g)
}

/// The energy as an [`Objective`] over free variables. Corner copies joined
/// by welded linkages share one variable.
pub struct LayoutObjective<'a> {
    layout: &'a Layout,
    params: EnergyParams,
    var_of_slot: Vec<usize>,
    vars: usize,
}

impl<'a> LayoutObjective<'a> {
    pub fn new(layout: &'a Layout, params: EnergyParams) -> Self {
        let n = layout.positions.len();
        let mut parent: Vec<usize> = (0..n).collect();
        for l in layout
            .linkages
            .iter()
            .filter(|l| l.state == LinkageState::Welded)
        {
            for [a, b] in l.short_edges() {
                crate::mesh::union(&mut parent, a, b);
            }
        }
        let mut var_of_root = vec![usize::MAX; n];
        let mut var_of_slot = vec![0; n];
        let mut vars = 0;
        for s in 0..n {
            let r = find(&mut parent, s);
            if var_of_root[r] == usize::MAX {
                var_of_root[r] = vars;
                vars += 1;
            }
            var_of_slot[s] = var_of_root[r];
        }
        Self {
            layout,
            params,
            var_of_slot,
            vars,
        }
    }

    /// Current layout positions as a variable vector. Welded copies are
    /// represented by the first slot of their group.
    pub fn initial(&self) -> Vec<f64> {
        let mut x = vec![0.0; 2 * self.vars];
        let mut set = vec![false; self.vars];
        for (s, &v) in self.var_of_slot.iter().enumerate() {
            if !set[v] {
                set[v] = true;
                x[2 * v] = self.layout.positions[s].x;
                x[2 * v + 1] = self.layout.positions[s].y;
            }
        }
        x
    }

    pub fn positions(&self, x: &[f64]) -> Vec<Point2<f64>> {
        self.var_of_slot
            .iter()
            .map(|&v| Point2::new(x[2 * v], x[2 * v + 1]))
            .collect()
    }
}

impl Objective for LayoutObjective<'_> {
    fn dim(&self) -> usize {
        2 * self.vars
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let pos = self.positions(x);
        let mut g = vec![Vector2::zeros(); pos.len()];
        let terms = evaluate(self.layout, &pos, &self.params, &mut g);
        grad.iter_mut().for_each(|v| *v = 0.0);
        for (s, gs) in g.iter().enumerate() {
            let v = self.var_of_slot[s];
            grad[2 * v] += gs.x;
            grad[2 * v + 1] += gs.y;
        }
        terms.total
    }
}

/// Minimizes the energy over the layout, honouring welds, and writes the
/// result back. A line search that cannot improve further near the optimum
/// ends the solve with the last accepted point.
pub fn solve_layout(
    layout: &mut Layout,
    params: &EnergyParams,
    opts: &MinimizeOptions,
) -> Result<SolveStats> {
    params.validate()?;
    let obj = LayoutObjective::new(layout, *params);
    let mut x = obj.initial();
    let stats = match minimize_in_place(&obj, &mut x, opts) {
        Ok(stats) => stats,
        Err(Error::LineSearch {
            iteration, energy, ..
        }) => {
            let mut g = vec![0.0; x.len()];
            let f = obj.eval(&x, &mut g);
            SolveStats {
                iterations: iteration,
                evaluations: 0,
                final_energy: f,
                grad_norm: g.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                converged: false,
                history: vec![energy],
            }
        }
        Err(e) => return Err(e),
    };
    let pos = obj.positions(&x);
    layout.positions = pos;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::flatten::layout::explode_mesh;
    use crate::optimizer::finite_difference_check;
    use crate::param::tutte_embed;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(w_rigid: f64, w_gap: f64, w_fair: f64) -> EnergyParams {
        EnergyParams {
            w_rigid,
            w_gap,
            w_fair,
            edge_scale: 1.0,
            gap_scale: 1.0,
            d: 0.3,
            eps_tor: 0.1,
            cut_rate: 0.1,
        }
    }

    /// Square split along its diagonal, laid out exactly at the optimum:
    /// both triangles at rest and pushed apart by `d` perpendicular to the
    /// shared edge.
    fn square_at_rest(d: f64) -> Layout {
        let m = fixtures::flat_square(10.0);
        let mut l = explode_mesh(&m, &tutte_embed(&m).unwrap()).unwrap();
        let n = Vector2::new(1.0, -1.0) / 2f64.sqrt();
        for t in 0..2 {
            let shift = if t == 0 {
                n * (d / 2.0)
            } else {
                -n * (d / 2.0)
            };
            for c in 0..3 {
                let v = m.vertices()[m.triangles()[t][c]];
                l.positions[3 * t + c] = Point2::new(v.x, v.y) + shift;
            }
        }
        l
    }

    #[test]
    fn constructed_optimum_has_zero_energy() {
        let l = square_at_rest(0.3);
        let (e, g) = energy_and_gradient(&l, &params(1.0, 1.0, 1.0));
        assert!(e < 1e-24, "{e}");
        assert!(g.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn doubled_triangle_rigidity() {
        let mut l = explode_mesh(
            &fixtures::equilateral_triangle(1.0),
            &tutte_embed(&fixtures::equilateral_triangle(1.0)).unwrap(),
        )
        .unwrap();
        l.avg_edge = 1.0;
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 3f64.sqrt()),
        ];
        l.positions.copy_from_slice(&pts);
        let (e, _) = energy_and_gradient(&l, &params(1.0, 0.0, 0.0));
        assert!((e - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = fixtures::hemisphere();
        let base = explode_mesh(&m, &tutte_embed(&m).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for w in [
            (1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0),
            (0.0, 0.0, 1.0),
            (100.0, 30.0, 30.0),
        ] {
            let mut l = base.clone();
            for p in &mut l.positions {
                p.x += rng.random_range(-1.0..1.0);
                p.y += rng.random_range(-1.0..1.0);
            }
            let obj = LayoutObjective::new(&l, params(w.0, w.1, w.2));
            let err = finite_difference_check(&obj, &obj.initial(), 1e-6).unwrap();
            assert!(err < 1e-5, "{w:?}: {err}");
        }
    }

    #[test]
    fn welded_copies_share_variables() {
        let mut l = square_at_rest(0.0);
        l.linkages[0].state = LinkageState::Welded;
        let obj = LayoutObjective::new(&l, params(1.0, 1.0, 0.0));
        assert_eq!(obj.dim(), 8);
        let pos = obj.positions(&obj.initial());
        let k = l.linkages[0];
        assert_eq!(pos[k.i], pos[k.m]);
        assert_eq!(pos[k.j], pos[k.k]);
        assert!(finite_difference_check(&obj, &obj.initial(), 1e-6).unwrap() < 1e-5);
    }

    #[test]
    fn rigid_motion_leaves_energy_unchanged() {
        let m = fixtures::hemisphere();
        let l = explode_mesh(&m, &tutte_embed(&m).unwrap()).unwrap();
        let p = params(100.0, 20.0, 20.0);
        let e0 = energy_and_gradient(&l, &p).0;
        let mut moved = l.clone();
        moved.rigid_transform(0.83, Vector2::new(12.0, -7.0));
        let e1 = energy_and_gradient(&moved, &p).0;
        assert!((e0 - e1).abs() <= 1e-9 * e0.max(1.0));
    }

    #[test]
    fn fair_term_vanishes_only_for_rectangular_quads() {
        let d = 0.4;
        let l = square_at_rest(d);
        let k = l.linkages[0];
        for [a, b] in k.diagonals() {
            let h = (k.rest_len.powi(2) + d * d).sqrt();
            assert!((l.edge_length(a, b) - h).abs() < 1e-12);
        }
        let mut sheared = l.clone();
        let along = Vector2::new(1.0, 1.0) / 2f64.sqrt() * 0.1;
        for c in 3..6 {
            sheared.positions[c] += along;
        }
        let t = energy_terms(&sheared, &params(0.0, 0.0, 1.0));
        assert!(t.fair > 1e-6);
    }
}
