use super::energy::EnergyParams;
use super::layout::{graph_connected, Layout, LinkageState};

/// Gap above which a retained linkage is a cutting candidate.
pub fn cut_threshold(p: &EnergyParams, a_max: f64) -> f64 {
    ((1.0 + p.eps_tor) * p.d).max((1.0 - p.cut_rate) * a_max)
}

/// Outcome of one auto-cut pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CutReport {
    pub threshold: f64,
    /// Largest retained gap before cutting.
    pub a_max: f64,
    /// Linkages whose gap exceeded the threshold, in processing order.
    pub selected: Vec<usize>,
    /// Linkages actually cut.
    pub cut: Vec<usize>,
    /// Whether the linkage graph was connected after the pass.
    pub connected: bool,
}

impl CutReport {
    pub fn cut_count(&self) -> usize {
        self.cut.len()
    }
}

/// Cuts over-stretched retained linkages while keeping the graph connected.
pub fn auto_cut(layout: &mut Layout, p: &EnergyParams) -> CutReport {
    let a_max = layout.max_retained_gap();
    auto_cut_with_threshold(layout, cut_threshold(p, a_max))
}

/// Like [`auto_cut`] with an explicit threshold.
///
/// Candidates are taken in descending gap order, ties by linkage id. A
/// candidate that would disconnect the graph is kept.
pub fn auto_cut_with_threshold(layout: &mut Layout, threshold: f64) -> CutReport {
    let a_max = layout.max_retained_gap();
    let mut selected: Vec<(usize, f64)> = layout
        .linkages
        .iter()
        .enumerate()
        .filter(|(_, l)| l.state == LinkageState::Retained)
        .map(|(id, l)| (id, layout.gap_value(l)))
        .filter(|&(_, g)| g > threshold)
        .collect();
    selected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let triangles = layout.triangle_count();
    let mut cut = Vec::new();
    for &(id, _) in &selected {
        layout.linkages[id].state = LinkageState::Cut;
        if graph_connected(triangles, &layout.linkages) {
            cut.push(id);
        } else {
            layout.linkages[id].state = LinkageState::Retained;
        }
    }
    CutReport {
        threshold,
        a_max,
        selected: selected.into_iter().map(|(id, _)| id).collect(),
        cut,
        connected: layout.graph_connected(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatten::layout::Linkage;
    use nalgebra::{Point2, Vector2};
    use proptest::prelude::*;

    fn params(eps_tor: f64, d: f64, c: f64) -> EnergyParams {
        EnergyParams {
            w_rigid: 1.0,
            w_gap: 1.0,
            w_fair: 1.0,
            edge_scale: 1.0,
            gap_scale: 1.0,
            d,
            eps_tor,
            cut_rate: c,
        }
    }

    #[test]
    fn threshold_examples() {
        assert!((cut_threshold(&params(0.1, 1.0, 0.1), 2.0) - 1.8).abs() < 1e-12);
        assert!((cut_threshold(&params(0.1, 1.0, 1.0), 57.0) - 1.1).abs() < 1e-12);
        assert!((cut_threshold(&params(0.1, 1.0, 0.1), 1.05) - 1.1).abs() < 1e-12);
    }

    /// Degenerate triangles far apart; linkage `t` joins `t` to `t+1`
    /// (wrapping when `closed`) with exactly the given gap. Slots 0 and 1 of
    /// a triangle carry its outgoing linkage, slot 2 its incoming one.
    fn chain(gaps: &[f64], closed: bool) -> Layout {
        let n = if closed { gaps.len() } else { gaps.len() + 1 };
        let mut positions = Vec::new();
        for t in 0..n {
            let a = Point2::new(100.0 * t as f64, 0.0);
            positions.extend([a, a, a + Vector2::new(0.0, 50.0)]);
        }
        let mut linkages = Vec::new();
        for (id, &g) in gaps.iter().enumerate() {
            let (a, b) = (id, (id + 1) % n);
            positions[3 * b + 2] = positions[3 * a] + Vector2::new(g, 0.0);
            linkages.push(Linkage {
                tri_a: a,
                tri_b: b,
                i: 3 * a,
                j: 3 * a + 1,
                k: 3 * b + 2,
                m: 3 * b + 2,
                rest_len: 1.0,
                state: LinkageState::Retained,
            });
        }
        Layout {
            positions,
            rest_edges: vec![[1.0; 3]; n],
            linkages,
            avg_edge: 1.0,
            source_map: (0..n).collect(),
        }
    }

    #[test]
    fn selects_only_above_threshold() {
        // a triangle cycle so the first cut keeps the graph connected
        let mut l = chain(&[2.0, 1.05, 0.9], true);
        let r = auto_cut(&mut l, &params(0.1, 1.0, 0.5));
        assert!((r.threshold - 1.1).abs() < 1e-12);
        assert_eq!(r.selected, vec![0]);
        assert_eq!(r.cut, vec![0]);
        assert!(r.connected);
    }

    #[test]
    fn bridge_is_retained() {
        let mut l = chain(&[5.0], false);
        let r = auto_cut(&mut l, &params(0.1, 1.0, 0.1));
        assert_eq!(r.selected, vec![0]);
        assert_eq!(r.cut_count(), 0);
        assert_eq!(l.linkages[0].state, LinkageState::Retained);
    }

    #[test]
    fn nothing_above_threshold() {
        let mut l = chain(&[0.5, 0.7, 1.0], true);
        let r = auto_cut(&mut l, &params(0.1, 1.0, 0.1));
        assert!(r.selected.is_empty() && r.cut.is_empty());
    }

    #[test]
    fn ties_break_by_id() {
        let mut l = chain(&[3.0, 3.0, 3.0], true);
        let r = auto_cut_with_threshold(&mut l, 1.0);
        assert_eq!(r.selected, vec![0, 1, 2]);
        assert_eq!(r.cut, vec![0]);
    }

    proptest! {
        #[test]
        fn never_disconnects(gaps in prop::collection::vec(0.0f64..5.0, 3..12), closed: bool, c in 0.0f64..1.0) {
            let mut l = chain(&gaps, closed);
            let before: Vec<_> = l.states();
            let r = auto_cut(&mut l, &params(0.1, 1.0, c));
            prop_assert!(r.connected && l.graph_connected());
            for (b, a) in before.iter().zip(l.states()) {
                if *b == LinkageState::Cut {
                    prop_assert_eq!(a, LinkageState::Cut);
                }
            }
            for &id in &r.cut {
                prop_assert!(l.gap_value(&l.linkages[id]) > r.threshold);
            }
        }
    }
}
