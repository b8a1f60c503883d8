use freeshell::fixtures;
use freeshell::flatten::{run_discrete_flattening, EnergyParams, FlattenConfig, LinkageState};
use freeshell::plate::{clearance_violations, generate_plate, lateral_mismatch, PlateParams};
use freeshell::verify::{layout_metrics, point_to_mesh_distance, synthetic_scan};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn flattened_patches_are_rigid_connected_and_printable(seed in 0u64..10_000, c in 0.0..0.9f64) {
        let mesh = fixtures::random_patch(seed);
        let cfg = FlattenConfig { cut_rate: c, ..Default::default() };
        let o = run_discrete_flattening(&mesh, &cfg).unwrap();
        prop_assert!(o.layout.graph_connected());
        prop_assert!(o.layout.linkages.iter().all(|l| l.state != LinkageState::Welded));
        let p = EnergyParams {
            w_rigid: 1.0,
            w_gap: 1.0,
            w_fair: 1.0,
            edge_scale: 1.0,
            gap_scale: 1.0,
            d: o.d_target,
            eps_tor: cfg.eps_tor,
            cut_rate: c,
        };
        let r = layout_metrics(&o.layout, &p);
        // rigidity is a penalty, so curved patches keep a small residual strain
        prop_assert!(r.max_edge_distortion < 5e-3, "distortion {}", r.max_edge_distortion);
        prop_assert_eq!(r.gap_histogram.iter().sum::<usize>(), r.retained);
        prop_assert!(r.max_gap <= (1.0 + cfg.eps_tor) * o.d_coarse);
        if let Some(mean) = o.refine.final_avg_gap {
            prop_assert!((mean - o.d_target).abs() <= 1e-3 * o.avg_edge);
        }

        let plate = generate_plate(&o.layout, &mesh, &PlateParams::default()).unwrap();
        prop_assert_eq!(plate.tiles.len(), mesh.triangle_count());
        prop_assert_eq!(plate.connectors.len() + plate.interlocks.len(), o.layout.linkages.len());
        for s in plate.solids() {
            prop_assert!(s.is_valid(), "{}", s.name);
        }
        prop_assert!(lateral_mismatch(&plate, &o.layout).unwrap() < 1e-6);
        prop_assert!(clearance_violations(&plate).is_empty());

        let scan = synthetic_scan(&plate, 200, 0.0, seed).unwrap();
        prop_assert!(point_to_mesh_distance(&scan, &mesh).unwrap().max < 1e-6);
    }
}
