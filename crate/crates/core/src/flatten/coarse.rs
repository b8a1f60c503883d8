use super::cutting::{auto_cut, CutReport};
use super::energy::{energy_terms, solve_layout, EnergyParams, EnergyTerms};
use super::layout::Layout;
use crate::error::{Error, Result};
use crate::optimizer::{MinimizeOptions, SolveStats};

/// Weights `(w_rigid, w_gap, w_fair)` for outer iteration `n` (from 0).
pub fn coarse_weights(n: usize) -> (f64, f64, f64) {
    let w = (10.0 + 10.0 * n as f64).min(100.0);
    (100.0, w, w)
}

/// One line of the per-iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub phase: &'static str,
    pub iteration: usize,
    pub terms: EnergyTerms,
    pub a_max: f64,
    pub cut_count: usize,
}

impl std::fmt::Display for IterRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "phase={} iter={} rigid={:.9e} gap={:.9e} fair={:.9e} total={:.9e} a_max={:.9} cuts={}",
            self.phase,
            self.iteration,
            self.terms.rigid,
            self.terms.gap,
            self.terms.fair,
            self.terms.total,
            self.a_max,
            self.cut_count
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoarseReport {
    pub iterations: usize,
    pub a_max: f64,
    pub limit: f64,
    pub cuts: Vec<CutReport>,
    pub solves: Vec<SolveStats>,
    pub records: Vec<IterRecord>,
}

/// Outer loop: solve with the scheduled weights, then cut, until every
/// retained gap is within `(1 + eps_tor)·d`.
///
/// `p.d` is the coarse target; weights and scales in `p` are overridden.
/// Welded linkages are released first.
pub fn coarse_optimize(
    layout: &mut Layout,
    p: &EnergyParams,
    max_iters: usize,
    solver: &MinimizeOptions,
    mut observe: impl FnMut(&IterRecord, Option<&CutReport>, &Layout),
) -> Result<CoarseReport> {
    layout.unweld();
    let limit = (1.0 + p.eps_tor) * p.d;
    let mut report = CoarseReport {
        limit,
        ..Default::default()
    };
    for n in 0..max_iters {
        let (w_rigid, w_gap, w_fair) = coarse_weights(n);
        let params = EnergyParams {
            w_rigid,
            w_gap,
            w_fair,
            edge_scale: 1.0,
            gap_scale: 1.0,
            ..*p
        };
        report.solves.push(solve_layout(layout, &params, solver)?);
        report.iterations = n + 1;
        let a_max = layout.max_retained_gap();
        report.a_max = a_max;
        let mut record = IterRecord {
            phase: "coarse",
            iteration: n,
            terms: energy_terms(layout, &params),
            a_max,
            cut_count: layout.cut_count(),
        };
        if a_max <= limit {
            observe(&record, None, layout);
            report.records.push(record);
            return Ok(report);
        }
        let cut = auto_cut(layout, &params);
        record.cut_count = layout.cut_count();
        observe(&record, Some(&cut), layout);
        report.records.push(record);
        report.cuts.push(cut);
    }
    Err(Error::Convergence {
        phase: "coarse optimization",
        iterations: report.iterations,
        a_max: report.a_max,
        limit,
    })
}
