//! Hand-built scenarios with known outcomes.

use super::radio::RadioModel;
use super::round::{run_round_with, RoundOptions, RoundResult};
use super::scenario::stream_rng;
use crate::adversary::{AdversaryStrategy, AttackHints, StrategyKind};
use crate::geometry::Position;
use crate::protocol::{NodeId, ProtocolParams};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

/// One verifier, its neighborhood and the adversaries' fixed choices.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub positions: BTreeMap<NodeId, Position>,
    pub labels: BTreeMap<NodeId, String>,
    pub verifier: NodeId,
    pub strategies: BTreeMap<NodeId, AdversaryStrategy>,
    pub hints: BTreeMap<NodeId, AttackHints>,
    pub params: ProtocolParams,
    pub radio: RadioModel,
}

impl Fixture {
    pub fn run(&self, seed: u64) -> RoundResult {
        let options = RoundOptions {
            hints: self.hints.clone(),
            ..Default::default()
        };
        let mut rng = stream_rng(seed, 0);
        run_round_with(
            &self.positions,
            self.verifier,
            &self.params,
            &self.strategies,
            &self.radio,
            &options,
            &mut rng,
        )
    }

    /// Node carrying `label`.
    pub fn id(&self, label: &str) -> NodeId {
        *self
            .labels
            .iter()
            .find(|(_, l)| l.as_str() == label)
            .unwrap_or_else(|| panic!("no node labelled {label}"))
            .0
    }

    pub fn label(&self, id: NodeId) -> &str {
        self.labels.get(&id).map_or("?", String::as_str)
    }

    fn build(name: &str, nodes: &[(&str, f64, f64)], params: ProtocolParams) -> Self {
        let mut positions = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for (i, &(label, x, y)) in nodes.iter().enumerate() {
            positions.insert(NodeId(i as u32), Position::new(x, y));
            labels.insert(NodeId(i as u32), label.to_string());
        }
        Self {
            name: name.to_string(),
            positions,
            labels,
            verifier: NodeId(0),
            strategies: BTreeMap::new(),
            hints: BTreeMap::new(),
            radio: RadioModel::exact(params.range),
            params,
        }
    }
}

/// Default parameters with error-free positions and 1 mm ranging tolerance,
/// so verdicts depend on the attack logic rather than on noise margins.
pub fn exact_params() -> ProtocolParams {
    ProtocolParams {
        eps_p: 0.0,
        eps_r: 1e-3,
        ..ProtocolParams::default()
    }
}

/// Clique of `S`, correct `X` and two independent knowledgeable adversaries,
/// each placing its fake position on the locus through the other's position.
pub fn fig3() -> Fixture {
    let mut f = Fixture::build(
        "fig3",
        &[
            ("S", 0.0, 0.0),
            ("X", 60.0, -90.0),
            ("M1", 120.0, 40.0),
            ("M2", -70.0, 80.0),
        ],
        exact_params(),
    );
    let (s, m1, m2) = (f.id("S"), f.id("M1"), f.id("M2"));
    for (m, other) in [(m1, m2), (m2, m1)] {
        f.strategies
            .insert(m, AdversaryStrategy::KnowledgeableIndependent);
        f.hints.insert(
            m,
            AttackHints {
                guessed_verifier: Some(s),
                locus_neighbor: Some(other),
                fake_position: None,
                mapping_correct: Some(true),
            },
        );
    }
    f
}

/// Three basic colluders around `S`: `M1` shares no correct neighbor with
/// `S`, `M2` shares `X`, `M3` shares `X`, `Y` and `Z`.
pub fn fig4() -> Fixture {
    let mut f = Fixture::build(
        "fig4",
        &[
            ("S", 0.0, 0.0),
            ("X", -120.0, 40.0),
            ("Y", -150.0, -60.0),
            ("Z", -60.0, -150.0),
            ("M1", 200.0, 100.0),
            ("M2", 40.0, 180.0),
            ("M3", 0.0, 60.0),
        ],
        exact_params(),
    );
    let group: BTreeSet<NodeId> = ["M1", "M2", "M3"].iter().map(|l| f.id(l)).collect();
    let strategy =
        AdversaryStrategy::new(StrategyKind::ColludingBasic, group.clone()).expect("three members");
    for m in group {
        f.strategies.insert(m, strategy.clone());
    }
    f
}

/// Uniform point in the disk of radius `r` around the origin.
fn in_disk<R: Rng + ?Sized>(r: f64, rng: &mut R) -> Position {
    let rho = r * rng.gen::<f64>().sqrt();
    let a = rng.gen_range(0.0..TAU);
    Position::new(rho * a.cos(), rho * a.sin())
}

/// `S` at the origin with `others` nodes drawn in the disk of radius `R/2`,
/// so every pair is within range.
fn random_clique<R: Rng + ?Sized>(
    name: &str,
    labels: &[String],
    params: ProtocolParams,
    rng: &mut R,
) -> Fixture {
    let mut nodes = vec![("S".to_string(), 0.0, 0.0)];
    for l in labels {
        let p = in_disk(params.range / 2.0, rng);
        nodes.push((l.clone(), p.x, p.y));
    }
    let refs: Vec<(&str, f64, f64)> = nodes.iter().map(|(l, x, y)| (l.as_str(), *x, *y)).collect();
    Fixture::build(name, &refs, params)
}

/// A knowledgeable adversary `M` and `common` correct neighbors it shares
/// with `S`, all in one clique. The adversary guesses freely.
pub fn knowledgeable_clique<R: Rng + ?Sized>(common: usize, rng: &mut R) -> Fixture {
    let mut labels = vec!["M".to_string()];
    labels.extend((1..=common).map(|i| format!("X{i}")));
    let mut f = random_clique(
        &format!("knowledgeable_{common}"),
        &labels,
        exact_params(),
        rng,
    );
    f.strategies
        .insert(f.id("M"), AdversaryStrategy::KnowledgeableIndependent);
    f
}

/// `colluders` members of one group of `kind` and `correct` correct nodes,
/// all in one clique with `S`.
pub fn collusion_clique<R: Rng + ?Sized>(
    kind: StrategyKind,
    colluders: usize,
    correct: usize,
    rng: &mut R,
) -> Fixture {
    let mut labels: Vec<String> = (1..=colluders).map(|i| format!("M{i}")).collect();
    labels.extend((1..=correct).map(|i| format!("X{i}")));
    let mut f = random_clique(
        &format!("{kind}_{colluders}_{correct}"),
        &labels,
        exact_params(),
        rng,
    );
    let group: BTreeSet<NodeId> = (1..=colluders).map(|i| f.id(&format!("M{i}"))).collect();
    if let Ok(strategy) = AdversaryStrategy::new(kind, group.clone()) {
        for m in group {
            f.strategies.insert(m, strategy.clone());
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::Verdict;

    #[test]
    fn fig3_tags_everyone_faulty() {
        let f = fig3();
        for seed in 0..20 {
            let r = f.run(seed);
            let faulty: BTreeSet<&str> = r
                .classification
                .faulty
                .iter()
                .map(|x| f.label(*x))
                .collect();
            assert_eq!(faulty, BTreeSet::from(["X", "M1", "M2"]), "seed {seed}");
        }
    }

    #[test]
    fn fig4_layout_has_the_captioned_links() {
        let f = fig4();
        let adj = crate::sim::neighbor_graph(&f.positions, f.params.range);
        let labels =
            |id: &str| -> BTreeSet<&str> { adj[&f.id(id)].iter().map(|x| f.label(*x)).collect() };
        assert_eq!(labels("M1"), BTreeSet::from(["S", "M2", "M3"]));
        assert_eq!(labels("M2"), BTreeSet::from(["S", "X", "M1", "M3"]));
        assert_eq!(
            labels("M3"),
            BTreeSet::from(["S", "X", "Y", "Z", "M1", "M2"])
        );
        assert_eq!(adj[&f.id("S")].len(), 6);
    }

    #[test]
    fn fig4_matches_the_caption() {
        let f = fig4();
        for seed in 0..20 {
            let c = f.run(seed).classification;
            assert_eq!(
                c.verdict(f.id("M1")),
                Some(Verdict::Verified),
                "seed {seed}"
            );
            assert_eq!(
                c.verdict(f.id("M2")),
                Some(Verdict::Verified),
                "seed {seed}"
            );
            assert_eq!(c.verdict(f.id("M3")), Some(Verdict::Faulty), "seed {seed}");
        }
    }

    #[test]
    fn random_cliques_are_cliques() {
        let mut rng = stream_rng(3, 0);
        let f = collusion_clique(StrategyKind::ColludingHyperbola, 3, 6, &mut rng);
        let adj = crate::sim::neighbor_graph(&f.positions, f.params.range);
        assert!(adj.values().all(|n| n.len() == 9));
        assert_eq!(f.strategies.len(), 3);
        assert_eq!(f.label(f.verifier), "S");
    }
}
