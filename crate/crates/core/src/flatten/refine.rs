use nalgebra::Point2;

use super::layout::Layout;
use crate::error::{Error, Result};

/// Consecutive growing steps tolerated before giving up.
const DIVERGENCE_PATIENCE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    /// Target mean gap `d_t` (mm).
    pub d_target: f64,
    /// Learning rate (1/mm²).
    pub learn_rate: f64,
    pub max_steps: usize,
    /// Stop when `|Ā − d_t|` is at most this (mm).
    pub loss_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefineReport {
    /// Mean retained gap at termination; `None` without retained linkages.
    pub final_avg_gap: Option<f64>,
    pub steps: usize,
    pub converged: bool,
    /// Loss `Ā − d_t` before every step and at the end.
    pub losses: Vec<f64>,
}

/// Ideal gap for connectors of shrinkage rate `r` between tiles of edge `Ē`.
pub fn target_gap_from_rate(avg_edge: f64, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!(
            "shrinkage rate must lie in [0, 1), got {r}"
        )));
    }
    Ok(avg_edge * r / (3f64.sqrt() * (1.0 - r)))
}

/// Scale factor for loss `ε`: `ε·|ε|·r_learn + 1`.
pub fn lambda_update(loss: f64, learn_rate: f64) -> f64 {
    loss * loss.abs() * learn_rate + 1.0
}

/// Scales every triangle about its centroid by `lambda`, then the whole
/// layout about the origin by `1/lambda`. Triangle shapes are preserved.
pub fn two_step_scale(layout: &mut Layout, lambda: f64) {
    let inv = 1.0 / lambda;
    for t in 0..layout.triangle_count() {
        let c = layout.centroid(t).coords;
        for s in 3 * t..3 * t + 3 {
            let p = layout.positions[s].coords;
            layout.positions[s] = Point2::from(((p - c) * lambda + c) * inv);
        }
    }
}

/// Adjusts the mean retained gap toward `d_target` by repeated two-step
/// scaling.
pub fn local_refinement(layout: &mut Layout, rp: &RefineParams) -> Result<RefineReport> {
    if !(rp.d_target >= 0.0 && rp.learn_rate > 0.0) {
        return Err(Error::Domain(format!(
            "invalid refinement parameters: {rp:?}"
        )));
    }
    let mut report = RefineReport::default();
    let Some(mut avg) = layout.mean_retained_gap() else {
        report.converged = true;
        return Ok(report);
    };
    let mut growing = 0;
    loop {
        let loss = avg - rp.d_target;
        report.losses.push(loss);
        if loss.abs() <= rp.loss_tol {
            report.converged = true;
            break;
        }
        if report.steps >= rp.max_steps {
            break;
        }
        if let [.., prev, _] = report.losses[..] {
            growing = if loss.abs() > prev.abs() {
                growing + 1
            } else {
                0
            };
            if growing >= DIVERGENCE_PATIENCE {
                return Err(Error::Divergence {
                    step: report.steps,
                    loss: loss.abs(),
                });
            }
        }
        let lambda = lambda_update(loss, rp.learn_rate);
        if !(lambda > 0.0) {
            return Err(Error::Divergence {
                step: report.steps,
                loss: loss.abs(),
            });
        }
        two_step_scale(layout, lambda);
        report.steps += 1;
        avg = layout.mean_retained_gap().unwrap_or(rp.d_target);
    }
    report.final_avg_gap = Some(avg);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatten::layout::{Linkage, LinkageState};
    use proptest::prelude::*;

    #[test]
    fn target_gap_examples() {
        assert_eq!(target_gap_from_rate(10.0, 0.0).unwrap(), 0.0);
        assert!((target_gap_from_rate(3f64.sqrt(), 0.5).unwrap() - 1.0).abs() < 1e-12);
        let d = target_gap_from_rate(10.0, 0.14).unwrap();
        assert!((d - 10.0 * 0.14 / (3f64.sqrt() * 0.86)).abs() < 1e-12);
        assert!((d - 0.9399).abs() < 1e-4);
        assert!(matches!(
            target_gap_from_rate(10.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_update(0.0, 3.0), 1.0);
        assert!((lambda_update(0.5, 1.0) - 1.25).abs() < 1e-12);
        assert!((lambda_update(-0.5, 1.0) - 0.75).abs() < 1e-12);
    }

    fn single(points: [Point2<f64>; 3]) -> Layout {
        Layout {
            positions: points.to_vec(),
            rest_edges: vec![[1.0; 3]],
            linkages: vec![],
            avg_edge: 1.0,
            source_map: vec![0],
        }
    }

    #[test]
    fn two_step_hand_example() {
        let mut l = single([
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ]);
        two_step_scale(&mut l, 2.0);
        let want = [
            (-1.0 / 6.0, -1.0 / 6.0),
            (5.0 / 6.0, -1.0 / 6.0),
            (-1.0 / 6.0, 5.0 / 6.0),
        ];
        for (p, w) in l.positions.iter().zip(want) {
            assert!((p.x - w.0).abs() < 1e-12 && (p.y - w.1).abs() < 1e-12);
        }
        assert!((l.edge_length(0, 1) - 1.0).abs() < 1e-12);
    }

    /// Two unit right triangles mirrored across their hypotenuse and pushed
    /// apart by `gap` along its normal.
    fn pair(gap: f64) -> Layout {
        let n = nalgebra::Vector2::new(1.0, 1.0) / 2f64.sqrt() * gap;
        let positions = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0) + n,
            Point2::new(0.0, 1.0) + n,
            Point2::new(1.0, 0.0) + n,
        ];
        Layout {
            positions,
            rest_edges: vec![[1.0, 2f64.sqrt(), 1.0]; 2],
            linkages: vec![Linkage {
                tri_a: 0,
                tri_b: 1,
                i: 1,
                j: 2,
                k: 4,
                m: 5,
                rest_len: 2f64.sqrt(),
                state: LinkageState::Retained,
            }],
            avg_edge: 1.0,
            source_map: vec![0, 1],
        }
    }

    #[test]
    fn fixed_point_at_target() {
        let mut l = pair(0.2);
        let before = l.clone();
        let r = local_refinement(
            &mut l,
            &RefineParams {
                d_target: 0.2,
                learn_rate: 1.0,
                max_steps: 10,
                loss_tol: 1e-9,
            },
        )
        .unwrap();
        assert_eq!(r.steps, 0);
        assert!(r.converged);
        assert_eq!(l, before);
    }

    #[test]
    fn refinement_closes_the_loss() {
        let mut l = pair(0.5);
        let rp = RefineParams {
            d_target: 0.2,
            learn_rate: 20.0,
            max_steps: 200,
            loss_tol: 1e-3,
        };
        let r = local_refinement(&mut l, &rp).unwrap();
        assert!(r.converged);
        assert!((r.final_avg_gap.unwrap() - 0.2).abs() <= 1e-3);
    }

    #[test]
    fn non_positive_lambda_diverges() {
        let mut l = pair(0.0);
        let rp = RefineParams {
            d_target: 5.0,
            learn_rate: 1.0,
            max_steps: 10,
            loss_tol: 1e-3,
        };
        assert!(matches!(
            local_refinement(&mut l, &rp),
            Err(Error::Divergence { .. })
        ));
    }

    proptest! {
        #[test]
        fn two_step_preserves_shapes(
            pts in prop::collection::vec(-50.0f64..50.0, 12),
            lambda in 0.2f64..5.0,
        ) {
            let mut l = pair(0.0);
            for (s, p) in l.positions.iter_mut().enumerate() {
                *p = Point2::new(pts[2 * s], pts[2 * s + 1]);
            }
            let before = l.clone();
            two_step_scale(&mut l, lambda);
            for t in 0..2 {
                for c in 0..3 {
                    let (a, b) = (3 * t + c, 3 * t + (c + 1) % 3);
                    let (l0, l1) = (before.edge_length(a, b), l.edge_length(a, b));
                    prop_assert!((l1 - l0).abs() <= 1e-9 * l0.max(1e-300) + 1e-12);
                }
            }
            let d0 = (before.centroid(1) - before.centroid(0)).norm();
            let d1 = (l.centroid(1) - l.centroid(0)).norm();
            prop_assert!((d1 - d0 / lambda).abs() <= 1e-9 * d0.max(1.0));
        }
    }
}
