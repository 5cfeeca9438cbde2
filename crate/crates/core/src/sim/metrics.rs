use super::round::{Role, RoundResult};
use crate::verification::Verdict;
use serde::{Deserialize, Serialize};

/// Verdict counts and rates over a set of rounds. A rate whose denominator
/// is zero is reported as 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rounds: usize,
    pub correct_responders: usize,
    pub adversary_responders: usize,
    pub correct_faulty: usize,
    pub correct_unverifiable: usize,
    pub adversary_verified: usize,
    pub adversary_unverifiable: usize,
    pub false_negative_rate: f64,
    pub false_positive_rate: f64,
    pub unverifiable_correct_rate: f64,
    pub unverifiable_adversary_rate: f64,
    pub degree_mean: f64,
    pub degree_variance: f64,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    fn finalize(mut self) -> Self {
        self.false_negative_rate = rate(self.adversary_verified, self.adversary_responders);
        self.false_positive_rate = rate(self.correct_faulty, self.correct_responders);
        self.unverifiable_correct_rate = rate(self.correct_unverifiable, self.correct_responders);
        self.unverifiable_adversary_rate =
            rate(self.adversary_unverifiable, self.adversary_responders);
        self
    }

    pub fn with_degree(mut self, mean: f64, variance: f64) -> Self {
        self.degree_mean = mean;
        self.degree_variance = variance;
        self
    }
}

/// Count each responder's verdict against its ground-truth role.
pub fn compute_metrics(results: &[RoundResult]) -> Metrics {
    let mut m = Metrics {
        rounds: results.len(),
        ..Default::default()
    };
    for r in results {
        for x in &r.responders {
            let verdict = r.classification.verdict(*x);
            match r.ground_truth.get(x) {
                Some(Role::Correct) => {
                    m.correct_responders += 1;
                    m.correct_faulty += usize::from(verdict == Some(Verdict::Faulty));
                    m.correct_unverifiable += usize::from(verdict == Some(Verdict::Unverifiable));
                }
                Some(Role::Adversary) => {
                    m.adversary_responders += 1;
                    m.adversary_verified += usize::from(verdict == Some(Verdict::Verified));
                    m.adversary_unverifiable += usize::from(verdict == Some(Verdict::Unverifiable));
                }
                None => log::warn!("responder {x} of round {} has no ground truth", r.verifier),
            }
        }
    }
    m.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{NodeId, ObservationSet};
    use crate::verification::Classification;
    use crate::Position;
    use proptest::prelude::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn result(entries: &[(u32, Role, Verdict)]) -> RoundResult {
        let mut cls = Classification::default();
        let mut truth = BTreeMap::new();
        for &(id, role, v) in entries {
            let id = NodeId(id);
            truth.insert(id, role);
            match v {
                Verdict::Faulty => cls.faulty.insert(id),
                Verdict::Unverifiable => cls.unverifiable.insert(id),
                Verdict::Verified => cls.verified.insert(id),
            };
        }
        RoundResult {
            verifier: NodeId(0),
            classification: cls,
            responders: truth.keys().copied().collect(),
            ground_truth: truth,
            observation: ObservationSet::new(NodeId(0), Position::new(0.0, 0.0), 0.0),
            attacks: BTreeMap::new(),
            oracle_readers: BTreeSet::new(),
            deliveries: Vec::new(),
        }
    }

    #[test]
    fn empty_input_gives_empty_metrics() {
        assert_eq!(compute_metrics(&[]), Metrics::default());
    }

    #[test]
    fn all_verified_correct_rounds_have_no_false_positives() {
        let rounds: Vec<_> = (0..10)
            .map(|_| {
                result(&[
                    (1, Role::Correct, Verdict::Verified),
                    (2, Role::Correct, Verdict::Verified),
                ])
            })
            .collect();
        let m = compute_metrics(&rounds);
        assert_eq!(
            (m.rounds, m.correct_responders, m.false_positive_rate),
            (10, 20, 0.0)
        );
        assert_eq!(m.adversary_responders, 0);
        assert_eq!(m.false_negative_rate, 0.0);
    }

    #[test]
    fn two_of_forty_adversaries_verified() {
        let rounds: Vec<_> = (0..40)
            .map(|i| {
                result(&[(
                    1,
                    Role::Adversary,
                    if i < 2 {
                        Verdict::Verified
                    } else {
                        Verdict::Faulty
                    },
                )])
            })
            .collect();
        let m = compute_metrics(&rounds);
        assert_eq!(m.adversary_responders, 40);
        assert!((m.false_negative_rate - 0.05).abs() < 1e-12);
    }

    fn arb_round() -> impl Strategy<Value = Vec<(u32, Role, Verdict)>> {
        let role = prop_oneof![Just(Role::Correct), Just(Role::Adversary)];
        let verdict = prop_oneof![
            Just(Verdict::Faulty),
            Just(Verdict::Unverifiable),
            Just(Verdict::Verified)
        ];
        prop::collection::btree_map(1u32..30, (role, verdict), 0..12)
            .prop_map(|m| m.into_iter().map(|(id, (r, v))| (id, r, v)).collect())
    }

    proptest! {
        #[test]
        fn rates_match_a_recount(rounds in prop::collection::vec(arb_round(), 0..20)) {
            let results: Vec<_> = rounds.iter().map(|r| result(r)).collect();
            let m = compute_metrics(&results);
            let all: Vec<_> = rounds.iter().flatten().collect();
            let count = |f: &dyn Fn(&(u32, Role, Verdict)) -> bool| all.iter().filter(|e| f(e)).count();
            let adv = count(&|e| e.1 == Role::Adversary);
            let cor = count(&|e| e.1 == Role::Correct);
            let fn_ = count(&|e| e.1 == Role::Adversary && e.2 == Verdict::Verified);
            let fp = count(&|e| e.1 == Role::Correct && e.2 == Verdict::Faulty);
            let uc = count(&|e| e.1 == Role::Correct && e.2 == Verdict::Unverifiable);
            let ua = count(&|e| e.1 == Role::Adversary && e.2 == Verdict::Unverifiable);
            let r = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
            prop_assert_eq!(m.false_negative_rate, r(fn_, adv));
            prop_assert_eq!(m.false_positive_rate, r(fp, cor));
            prop_assert_eq!(m.unverifiable_correct_rate, r(uc, cor));
            prop_assert_eq!(m.unverifiable_adversary_rate, r(ua, adv));
            for rate in [m.false_negative_rate, m.false_positive_rate, m.unverifiable_correct_rate, m.unverifiable_adversary_rate] {
                prop_assert!((0.0..=1.0).contains(&rate));
            }
        }
    }
}
