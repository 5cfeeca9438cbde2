use crate::geometry::{flight_time, Position};
use crate::protocol::{NodeId, ProtocolParams};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

/// Unit-disk radio with bounded ranging and positioning error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioModel {
    pub range: f64,
    pub eps_p: f64,
    pub eps_r: f64,
    pub loss_probability: f64,
}

impl RadioModel {
    pub fn from_params(params: &ProtocolParams, loss_probability: f64) -> Self {
        Self {
            range: params.range,
            eps_p: params.eps_p,
            eps_r: params.eps_r,
            loss_probability,
        }
    }

    /// Error-free radio for fixtures.
    pub fn exact(range: f64) -> Self {
        Self {
            range,
            eps_p: 0.0,
            eps_r: 0.0,
            loss_probability: 0.0,
        }
    }

    pub fn in_range(&self, a: Position, b: Position) -> bool {
        a.distance(&b) <= self.range
    }

    /// Recorded reception time of a frame sent at `t_tx` over `a -> b`:
    /// true arrival plus a ranging error uniform on `[-eps_r, eps_r]`.
    pub fn reception_time<R: Rng + ?Sized>(
        &self,
        t_tx: f64,
        a: Position,
        b: Position,
        rng: &mut R,
    ) -> f64 {
        let err = if self.eps_r > 0.0 {
            rng.gen_range(-self.eps_r..=self.eps_r)
        } else {
            0.0
        };
        t_tx + flight_time(a.distance(&b) + err)
    }

    /// Own-position estimate: truth plus an error uniform on the disk of radius `eps_p`.
    pub fn position_estimate<R: Rng + ?Sized>(&self, truth: Position, rng: &mut R) -> Position {
        if self.eps_p <= 0.0 {
            return truth;
        }
        let r = self.eps_p * rng.gen::<f64>().sqrt();
        let a = rng.gen_range(0.0..TAU);
        truth.offset(r * a.cos(), r * a.sin())
    }

    pub fn delivered<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.loss_probability <= 0.0 || !rng.gen_bool(self.loss_probability.min(1.0))
    }
}

pub type Adjacency = BTreeMap<NodeId, BTreeSet<NodeId>>;

/// Symmetric adjacency on true positions: nodes at most `range` apart.
/// Uses a uniform grid with cell size `range` so each node only checks
/// nearby cells.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn neighbor_graph(positions: &BTreeMap<NodeId, Position>, range: f64) -> Adjacency {
    let mut adj: Adjacency = positions.keys().map(|&id| (id, BTreeSet::new())).collect();
    if positions.is_empty() || !(range > 0.0) {
        return adj;
    }
    let cell = |p: &Position| ((p.x / range).floor() as i64, (p.y / range).floor() as i64);
    let mut grid: BTreeMap<(i64, i64), Vec<(NodeId, Position)>> = BTreeMap::new();
    for (&id, p) in positions {
        grid.entry(cell(p)).or_default().push((id, *p));
    }
    for (&id, p) in positions {
        let (cx, cy) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for &(other, q) in grid.get(&(cx + dx, cy + dy)).into_iter().flatten() {
                    if other != id && p.distance(&q) <= range {
                        adj.get_mut(&id).expect("node").insert(other);
                    }
                }
            }
        }
    }
    adj
}

/// Mean and population variance of node degree.
pub fn degree_stats(adj: &Adjacency) -> (f64, f64) {
    if adj.is_empty() {
        return (0.0, 0.0);
    }
    let n = adj.len() as f64;
    let mean = adj.values().map(|s| s.len() as f64).sum::<f64>() / n;
    let var = adj
        .values()
        .map(|s| (s.len() as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trace::{synth_trace, MobilityModel, SynthSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two(d: f64) -> BTreeMap<NodeId, Position> {
        BTreeMap::from([
            (NodeId(0), Position::new(0.0, 0.0)),
            (NodeId(1), Position::new(d, 0.0)),
        ])
    }

    #[test]
    fn adjacency_at_the_range_edge() {
        assert!(neighbor_graph(&two(249.0), 250.0)[&NodeId(0)].contains(&NodeId(1)));
        assert!(neighbor_graph(&two(251.0), 250.0)[&NodeId(0)].is_empty());
    }

    #[test]
    fn errors_stay_within_bounds() {
        let radio = RadioModel {
            range: 250.0,
            eps_p: 5.0,
            eps_r: 6.8,
            loss_probability: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (Position::new(0.0, 0.0), Position::new(120.0, 50.0));
        for _ in 0..1000 {
            let t = radio.reception_time(2.0, a, b, &mut rng);
            let d = (t - 2.0) * crate::geometry::SPEED_OF_LIGHT;
            assert!((d - 130.0).abs() <= 6.8 + 1e-6);
            assert!(radio.position_estimate(a, &mut rng).distance(&a) <= 5.0);
        }
    }

    #[test]
    fn exact_radio_reception_matches_distance() {
        let radio = RadioModel::exact(250.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = radio.reception_time(
            10.0,
            Position::new(0.0, 0.0),
            Position::new(0.0, 200.0),
            &mut rng,
        );
        assert!((t - 10.0 - 200.0 / crate::geometry::SPEED_OF_LIGHT).abs() < 1e-12);
    }

    #[test]
    fn grid_road_degree_matches_density_estimate() {
        let spec = SynthSpec {
            nodes: 300,
            duration: 20.0,
            ..Default::default()
        };
        let trace = synth_trace(&spec).unwrap();
        let analytic = 300.0 * std::f64::consts::PI * 250.0f64.powi(2) / (spec.width * spec.height);
        let mean = trace
            .snapshots
            .iter()
            .map(|s| degree_stats(&neighbor_graph(&s.positions, 250.0)).0)
            .sum::<f64>()
            / trace.len() as f64;
        assert!(
            mean > analytic / 2.0 && mean < analytic * 2.0,
            "mean {mean} vs {analytic}"
        );
    }

    /// Queued traffic on a 5 km grid: 1200 cars in platoons of ten at 3 m gaps.
    #[test]
    fn zurich_like_density_at_short_range() {
        let spec = SynthSpec {
            nodes: 1200,
            duration: 0.0,
            platoon_size: 10,
            platoon_gap: 7.0,
            ..Default::default()
        };
        let snap = &synth_trace(&spec).unwrap().snapshots[0];
        let (mean, _) = degree_stats(&neighbor_graph(&snap.positions, 50.0));
        assert!((4.0..=12.0).contains(&mean), "mean degree {mean}");
    }

    proptest! {
        #[test]
        fn grid_search_matches_brute_force(pts in prop::collection::vec((-500.0..500.0f64, -500.0..500.0f64), 0..40), r in 1.0..400.0f64) {
            let positions: BTreeMap<NodeId, Position> =
                pts.iter().enumerate().map(|(i, p)| (NodeId(i as u32), Position::new(p.0, p.1))).collect();
            let adj = neighbor_graph(&positions, r);
            for (a, pa) in &positions {
                for (b, pb) in &positions {
                    prop_assert_eq!(adj[a].contains(b), a != b && pa.distance(pb) <= r);
                }
            }
        }
    }

    #[test]
    fn static_model_degree_is_constant() {
        let spec = SynthSpec {
            model: MobilityModel::Static,
            nodes: 80,
            duration: 3.0,
            ..Default::default()
        };
        let t = synth_trace(&spec).unwrap();
        let d: Vec<_> = t
            .snapshots
            .iter()
            .map(|s| degree_stats(&neighbor_graph(&s.positions, 250.0)))
            .collect();
        assert!(d.windows(2).all(|w| w[0] == w[1]));
    }
}
