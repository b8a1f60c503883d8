//! Discrete flattening of a target mesh into a planar tile layout.

mod align;
mod coarse;
mod cutting;
mod energy;
mod io;
mod layout;
mod pipeline;
mod refine;

pub use align::{alignment_phase, amplification_factor, AlignOptions, AlignReport};
pub use coarse::{coarse_optimize, coarse_weights, CoarseReport, IterRecord};
pub use cutting::{auto_cut, auto_cut_with_threshold, cut_threshold, CutReport};
pub use energy::{
    energy_and_gradient, energy_terms, evaluate, solve_layout, EnergyParams, EnergyTerms,
    LayoutObjective,
};
pub use io::{layout_from_str, layout_obj_string, layout_to_string, read_layout, write_layout};
pub use layout::{explode_mesh, graph_connected, Layout, Linkage, LinkageState};
pub use pipeline::{
    run_discrete_flattening, run_discrete_flattening_observed, CutEvent, FlattenConfig,
    FlattenOutcome,
};
pub use refine::{
    lambda_update, local_refinement, target_gap_from_rate, two_step_scale, RefineParams,
    RefineReport,
};
