use nalgebra::Point2;

use super::cutting::{auto_cut_with_threshold, CutReport};
use super::energy::{solve_layout, EnergyParams};
use super::layout::{Layout, LinkageState};
use crate::error::{Error, Result};
use crate::optimizer::{MinimizeOptions, SolveStats};

/// Relative drop in `a_max` that counts as progress between passes.
const PROGRESS: f64 = 1e-3;

/// Enlargement of rest edges that opens a gap of `d` after contraction.
pub fn amplification_factor(d: f64, avg_edge: f64) -> f64 {
    1.0 + 3f64.sqrt() * d / avg_edge
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    pub max_iters: usize,
    /// Absolute gap (mm) below which a linkage is welded.
    pub weld_tol: f64,
    pub w_rigid: f64,
    pub w_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignReport {
    pub iterations: usize,
    pub amplification: f64,
    /// Largest retained gap after the last solve.
    pub a_max: f64,
    pub welded: usize,
    pub cuts: Vec<CutReport>,
    pub solves: Vec<SolveStats>,
}

/// Welds a linkage by moving each pair of copies to their midpoint.
fn weld(layout: &mut Layout, id: usize) {
    let l = &mut layout.linkages[id];
    l.state = LinkageState::Welded;
    let l = *l;
    for [a, b] in l.short_edges() {
        let mid = Point2::from((layout.positions[a].coords + layout.positions[b].coords) * 0.5);
        layout.positions[a] = mid;
        layout.positions[b] = mid;
    }
}

/// Magnify-and-weld: solves with enlarged triangles and short edges pulled
/// shut, cutting and welding until the remaining gaps fall within
/// `eps_tor·d`. On success every non-cut linkage is welded.
///
/// `p` supplies `d`, `eps_tor` and the cutting rate; weights and scales are
/// set here. `on_cut` sees the layout after every cut pass, together with
/// the energy parameters of the solve. When a pass neither cuts, welds nor
/// lowers `a_max`, the next pass cuts against `eps_tor·d` alone; if that
/// also changes nothing the phase fails as if out of iterations.
pub fn alignment_phase(
    layout: &mut Layout,
    p: &EnergyParams,
    opts: &AlignOptions,
    solver: &MinimizeOptions,
    mut on_cut: impl FnMut(usize, &CutReport, &Layout, &EnergyParams),
) -> Result<AlignReport> {
    let m = amplification_factor(p.d, layout.avg_edge);
    let params = EnergyParams {
        w_rigid: opts.w_rigid,
        w_gap: opts.w_gap,
        w_fair: 0.0,
        edge_scale: m,
        gap_scale: 0.0,
        ..*p
    };
    let stop = p.eps_tor * p.d;
    let mut report = AlignReport {
        amplification: m,
        ..Default::default()
    };
    let mut stalled = false;
    let mut prev_a_max = f64::INFINITY;
    loop {
        report.solves.push(solve_layout(layout, &params, solver)?);
        report.iterations += 1;
        let a_max = layout.max_retained_gap();
        report.a_max = a_max;
        // After a pass that changed nothing, every candidate above the
        // rate-based threshold was a bridge; fall back to the stop level.
        let threshold = if stalled {
            stop
        } else {
            stop.max((1.0 - p.cut_rate) * a_max)
        };
        let cut = auto_cut_with_threshold(layout, threshold);
        on_cut(report.iterations, &cut, layout, &params);
        let mut changed = !cut.cut.is_empty() || a_max < (1.0 - PROGRESS) * prev_a_max;
        prev_a_max = a_max;
        report.cuts.push(cut);
        for id in 0..layout.linkages.len() {
            let l = layout.linkages[id];
            if l.state == LinkageState::Retained && layout.gap_value(&l) < opts.weld_tol {
                weld(layout, id);
                changed = true;
            }
        }
        if a_max <= stop {
            break;
        }
        if report.iterations >= opts.max_iters || (stalled && !changed) {
            return Err(Error::Convergence {
                phase: "alignment",
                iterations: report.iterations,
                a_max,
                limit: stop,
            });
        }
        stalled = !changed;
    }
    for id in 0..layout.linkages.len() {
        if layout.linkages[id].state == LinkageState::Retained {
            weld(layout, id);
        }
    }
    report.welded = layout
        .linkages
        .iter()
        .filter(|l| l.state == LinkageState::Welded)
        .count();
    Ok(report)
}
