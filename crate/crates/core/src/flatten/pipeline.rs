use super::align::{alignment_phase, AlignOptions, AlignReport};
use super::coarse::{coarse_optimize, CoarseReport, IterRecord};
use super::cutting::CutReport;
use super::energy::{energy_terms, EnergyParams};
use super::layout::{explode_mesh, Layout, LinkageState};
use super::refine::{local_refinement, target_gap_from_rate, RefineParams, RefineReport};
use crate::error::{Error, Result, StageExt};
use crate::mesh::TargetMesh;
use crate::optimizer::MinimizeOptions;
use crate::param::{arap_parameterize, tutte_embed, Param2D};
use serde::Deserialize;

/// Settings of the full flattening run. Length-valued tolerances are given
/// as multiples of the mean edge length `Ē`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlattenConfig {
    /// Connector shrinkage rate `r`, sets the target gap.
    pub shrink_rate: f64,
    /// Explicit target gap (mm); overrides `shrink_rate` when set.
    pub target_gap: Option<f64>,
    /// Coarse target relaxation `κ`.
    #[serde(alias = "kappa")]
    pub coarse_relax: f64,
    pub cut_rate: f64,
    pub eps_tor: f64,
    pub align_max_iters: usize,
    pub align_w_rigid: f64,
    pub align_w_gap: f64,
    pub weld_tol_scale: f64,
    pub outer_max_iters: usize,
    /// Learning rate in units of `1/Ē²`.
    pub learn_rate_scale: f64,
    pub refine_max_steps: usize,
    pub loss_tol_scale: f64,
    pub arap_max_iters: usize,
    pub arap_tol: f64,
    pub solver: MinimizeOptions,
}

impl Default for FlattenConfig {
    fn default() -> Self {
        Self {
            shrink_rate: 0.14,
            target_gap: None,
            coarse_relax: 1.2,
            cut_rate: 0.1,
            eps_tor: 0.1,
            align_max_iters: 20,
            align_w_rigid: 100.0,
            align_w_gap: 10.0,
            weld_tol_scale: 1e-4,
            outer_max_iters: 50,
            learn_rate_scale: 20.0,
            refine_max_steps: 200,
            loss_tol_scale: 1e-3,
            arap_max_iters: crate::param::DEFAULT_MAX_ITERS,
            arap_tol: crate::param::DEFAULT_TOL,
            solver: MinimizeOptions::default(),
        }
    }
}

impl FlattenConfig {
    /// Refinement target `d_t` for a mesh with mean edge length `avg_edge`.
    pub fn target_gap_for(&self, avg_edge: f64) -> Result<f64> {
        match self.target_gap {
            Some(d) => Ok(d),
            None => target_gap_from_rate(avg_edge, self.shrink_rate),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} is out of range")));
        if !(0.0..1.0).contains(&self.shrink_rate) {
            return bad("shrink_rate");
        }
        if self.target_gap.is_some_and(|d| !(d >= 0.0)) {
            return bad("target_gap");
        }
        if !(self.coarse_relax > 0.0) {
            return bad("coarse_relax");
        }
        if !(0.0..=1.0).contains(&self.cut_rate) {
            return bad("cut_rate");
        }
        if !(self.eps_tor >= 0.0) {
            return bad("eps_tor");
        }
        if !(self.learn_rate_scale > 0.0) {
            return bad("learn_rate_scale");
        }
        if !(self.loss_tol_scale > 0.0) || !(self.weld_tol_scale > 0.0) {
            return bad("tolerance scale");
        }
        if self.align_max_iters == 0 || self.outer_max_iters == 0 {
            return bad("iteration limit");
        }
        Ok(())
    }
}

/// A cut pass and the linkage states it left behind.
#[derive(Debug, Clone, PartialEq)]
pub struct CutEvent {
    pub phase: &'static str,
    pub iteration: usize,
    pub report: CutReport,
    pub states: Vec<LinkageState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlattenOutcome {
    pub layout: Layout,
    pub param: Param2D,
    pub avg_edge: f64,
    pub d_target: f64,
    pub d_coarse: f64,
    pub align: AlignReport,
    pub coarse: CoarseReport,
    pub refine: RefineReport,
    pub cut_events: Vec<CutEvent>,
    pub trace: Vec<IterRecord>,
}

impl FlattenOutcome {
    pub fn trace_lines(&self) -> Vec<String> {
        self.trace.iter().map(ToString::to_string).collect()
    }
}

/// Runs the flattening pipeline: parameterize, explode, align, coarse
/// optimization and local refinement.
pub fn run_discrete_flattening(mesh: &TargetMesh, cfg: &FlattenConfig) -> Result<FlattenOutcome> {
    run_discrete_flattening_observed(mesh, cfg, |_, _| {})
}

/// As [`run_discrete_flattening`], calling `observe` after every outer
/// iteration of the alignment and coarse phases.
pub fn run_discrete_flattening_observed(
    mesh: &TargetMesh,
    cfg: &FlattenConfig,
    mut observe: impl FnMut(&IterRecord, &Layout),
) -> Result<FlattenOutcome> {
    cfg.validate()?;
    let avg_edge = mesh.edge_statistics().avg_edge_len;
    let d_target = cfg.target_gap_for(avg_edge)?;
    let d_coarse = cfg.coarse_relax * d_target;

    let param = tutte_embed(mesh)
        .and_then(|init| arap_parameterize(mesh, &init, cfg.arap_max_iters, cfg.arap_tol))
        .stage("param")?;
    let mut layout = explode_mesh(mesh, &param).stage("explode")?;

    let params = EnergyParams {
        w_rigid: 100.0,
        w_gap: 100.0,
        w_fair: 100.0,
        edge_scale: 1.0,
        gap_scale: 1.0,
        d: d_coarse,
        eps_tor: cfg.eps_tor,
        cut_rate: cfg.cut_rate,
    };
    let mut cut_events = Vec::new();
    let mut trace = Vec::new();

    let align_opts = AlignOptions {
        max_iters: cfg.align_max_iters,
        weld_tol: cfg.weld_tol_scale * avg_edge,
        w_rigid: cfg.align_w_rigid,
        w_gap: cfg.align_w_gap,
    };
    let align = alignment_phase(
        &mut layout,
        &params,
        &align_opts,
        &cfg.solver,
        |iter, cut, lay, solved| {
            let record = IterRecord {
                phase: "alignment",
                iteration: iter - 1,
                terms: energy_terms(lay, solved),
                a_max: cut.a_max,
                cut_count: lay.cut_count(),
            };
            observe(&record, lay);
            trace.push(record);
            cut_events.push(CutEvent {
                phase: "alignment",
                iteration: iter - 1,
                report: cut.clone(),
                states: lay.states(),
            });
        },
    )
    .stage("alignment")?;

    let coarse = coarse_optimize(
        &mut layout,
        &params,
        cfg.outer_max_iters,
        &cfg.solver,
        |record, cut, lay| {
            observe(record, lay);
            trace.push(record.clone());
            if let Some(cut) = cut {
                cut_events.push(CutEvent {
                    phase: "coarse",
                    iteration: record.iteration,
                    report: cut.clone(),
                    states: lay.states(),
                });
            }
        },
    )
    .stage("coarse")?;

    let refine = local_refinement(
        &mut layout,
        &RefineParams {
            d_target,
            learn_rate: cfg.learn_rate_scale / (avg_edge * avg_edge),
            max_steps: cfg.refine_max_steps,
            loss_tol: cfg.loss_tol_scale * avg_edge,
        },
    )
    .stage("refine")?;

    Ok(FlattenOutcome {
        layout,
        param,
        avg_edge,
        d_target,
        d_coarse,
        align,
        coarse,
        refine,
        cut_events,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn square_is_flattened_without_cuts() {
        let out = run_discrete_flattening(&fixtures::flat_square(10.0), &FlattenConfig::default())
            .unwrap();
        assert_eq!(out.layout.cut_count(), 0);
        let gap = out.refine.final_avg_gap.unwrap();
        assert!((gap - out.d_target).abs() <= 1e-3 * out.avg_edge);
        assert!(out.cut_events.iter().all(|e| e.report.connected));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = FlattenConfig {
            cut_rate: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            run_discrete_flattening(&fixtures::flat_square(1.0), &cfg),
            Err(Error::Config(_))
        ));
        let cfg = FlattenConfig {
            shrink_rate: 1.0,
            ..Default::default()
        };
        assert!(run_discrete_flattening(&fixtures::flat_square(1.0), &cfg).is_err());
    }

    #[test]
    fn errors_carry_stage_labels() {
        let cfg = FlattenConfig {
            outer_max_iters: 1,
            ..Default::default()
        };
        match run_discrete_flattening(&fixtures::hemisphere(), &cfg) {
            Err(Error::Stage { stage, source }) => {
                assert_eq!(stage, "coarse");
                assert!(matches!(*source, Error::Convergence { .. }));
            }
            other => panic!(
                "expected a staged convergence error, got {:?}",
                other.map(|o| o.coarse.iterations)
            ),
        }
    }
}
