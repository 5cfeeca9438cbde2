//! Scenario execution: adversary assignment, verifier sampling and
//! aggregation over the snapshots of a trace.

use super::metrics::{compute_metrics, Metrics};
use super::radio::{neighbor_graph, Adjacency, RadioModel};
use super::round::{run_round_with, RoundOptions, RoundResult};
use super::trace::{load_trace, synth_trace, MobilityTrace, Snapshot, SynthSpec, TraceError};
use crate::adversary::{AdversaryStrategy, StrategyKind};
use crate::protocol::{NodeId, ProtocolParams};
use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("cannot open trace {path}: {source}")]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    File(PathBuf),
    Synthetic(SynthSpec),
}

impl Default for TraceSource {
    fn default() -> Self {
        Self::Synthetic(SynthSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversarySpec {
    pub strategy: StrategyKind,
    /// Target fraction of adversarial nodes per snapshot.
    pub ratio: f64,
    /// Colluding group size; only read for colluding strategies.
    pub group_size: usize,
}

impl Default for AdversarySpec {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::KnowledgeableIndependent,
            ratio: 0.0,
            group_size: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub trace: TraceSource,
    pub seed: u64,
    pub params: ProtocolParams,
    pub adversary: AdversarySpec,
    /// Fraction of nodes polling in each snapshot.
    pub verifier_ratio: f64,
    pub loss_probability: f64,
    /// Use only the first snapshots of the trace.
    pub max_snapshots: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            trace: TraceSource::default(),
            seed: 1,
            params: ProtocolParams::default(),
            adversary: AdversarySpec::default(),
            verifier_ratio: 0.01,
            loss_probability: 0.0,
            max_snapshots: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        self.params
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        for (name, r) in [
            ("adversary.ratio", self.adversary.ratio),
            ("verifier_ratio", self.verifier_ratio),
            ("loss_probability", self.loss_probability),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.adversary.strategy.is_colluding() && self.adversary.group_size < 1 {
            return bad("adversary.group_size must be at least 1");
        }
        if let TraceSource::Synthetic(spec) = &self.trace {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn radio(&self) -> RadioModel {
        RadioModel::from_params(&self.params, self.loss_probability)
    }

    pub fn load_trace(&self) -> Result<MobilityTrace, ScenarioError> {
        match &self.trace {
            TraceSource::Synthetic(spec) => Ok(synth_trace(spec)?),
            TraceSource::File(path) => {
                let f = File::open(path).map_err(|source| ScenarioError::Open {
                    path: path.clone(),
                    source,
                })?;
                Ok(load_trace(BufReader::new(f))?)
            }
        }
    }
}

/// Generator for independent stream `index` of `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed derived from `seed` for item `index`, e.g. a sweep point.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, index).next_u64()
}

/// Draw this snapshot's adversaries.
///
/// Independent strategies take `ratio * n` nodes uniformly. Colluding
/// strategies repeatedly pick a seed node and up to `group_size - 1` of its
/// free neighbors until `ratio * n` nodes are taken; a seed left without
/// companions acts as a knowledgeable independent adversary.
pub fn assign_adversaries<R: Rng + ?Sized>(
    adjacency: &Adjacency,
    spec: &AdversarySpec,
    rng: &mut R,
) -> BTreeMap<NodeId, AdversaryStrategy> {
    let mut out = BTreeMap::new();
    let target = (spec.ratio * adjacency.len() as f64).round() as usize;
    if target == 0 || spec.strategy == StrategyKind::Honest {
        return out;
    }
    let mut free: Vec<NodeId> = adjacency.keys().copied().collect();
    if !spec.strategy.is_colluding() {
        let strategy = AdversaryStrategy::new(spec.strategy, BTreeSet::new()).expect("independent");
        for id in free.choose_multiple(rng, target) {
            out.insert(*id, strategy.clone());
        }
        return out;
    }
    free.shuffle(rng);
    while out.len() < target {
        let Some(seed) = free.iter().copied().find(|x| !out.contains_key(x)) else {
            break;
        };
        let room = (target - out.len()).min(spec.group_size);
        let mut group: BTreeSet<NodeId> = adjacency[&seed]
            .iter()
            .copied()
            .filter(|x| !out.contains_key(x))
            .choose_multiple(rng, room.saturating_sub(1))
            .into_iter()
            .collect();
        group.insert(seed);
        let strategy = AdversaryStrategy::new(spec.strategy, group.clone())
            .unwrap_or(AdversaryStrategy::KnowledgeableIndependent);
        for id in group {
            out.insert(id, strategy.clone());
        }
    }
    out
}

/// Correct nodes chosen to poll in this snapshot: `ratio * n`, at least one.
pub fn select_verifiers<R: Rng + ?Sized>(
    nodes: &BTreeSet<NodeId>,
    adversaries: &BTreeMap<NodeId, AdversaryStrategy>,
    ratio: f64,
    rng: &mut R,
) -> Vec<NodeId> {
    if ratio <= 0.0 {
        return Vec::new();
    }
    let count = ((ratio * nodes.len() as f64).round() as usize).max(1);
    let correct: Vec<NodeId> = nodes
        .iter()
        .copied()
        .filter(|x| !adversaries.contains_key(x))
        .collect();
    let mut chosen: Vec<NodeId> = correct.choose_multiple(rng, count).copied().collect();
    chosen.sort();
    chosen
}

/// Everything produced by one snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotRun {
    pub time: f64,
    pub adversaries: BTreeMap<NodeId, AdversaryStrategy>,
    pub rounds: Vec<RoundResult>,
    pub degrees: Vec<usize>,
}

/// Play the rounds of one snapshot one after another.
pub fn run_snapshot(config: &ScenarioConfig, snapshot: &Snapshot, index: u64) -> SnapshotRun {
    let mut rng = stream_rng(config.seed, index);
    let radio = config.radio();
    let adjacency = neighbor_graph(&snapshot.positions, config.params.range);
    let adversaries = assign_adversaries(&adjacency, &config.adversary, &mut rng);
    let nodes: BTreeSet<NodeId> = snapshot.positions.keys().copied().collect();
    let verifiers = select_verifiers(&nodes, &adversaries, config.verifier_ratio, &mut rng);
    let options = RoundOptions {
        adjacency: Some(&adjacency),
        ..Default::default()
    };
    let rounds = verifiers
        .iter()
        .map(|&s| {
            run_round_with(
                &snapshot.positions,
                s,
                &config.params,
                &adversaries,
                &radio,
                &options,
                &mut rng,
            )
        })
        .collect();
    SnapshotRun {
        time: snapshot.time,
        adversaries,
        rounds,
        degrees: adjacency.values().map(BTreeSet::len).collect(),
    }
}

/// Run every snapshot of `trace` in parallel and merge in snapshot order.
pub fn run_trace(
    config: &ScenarioConfig,
    trace: &MobilityTrace,
) -> Result<(Metrics, Vec<SnapshotRun>), ScenarioError> {
    config.validate()?;
    let limit = config.max_snapshots.unwrap_or(usize::MAX);
    let runs: Vec<SnapshotRun> = trace
        .snapshots
        .par_iter()
        .take(limit)
        .enumerate()
        .map(|(i, snap)| run_snapshot(config, snap, i as u64))
        .collect();
    let rounds: Vec<RoundResult> = runs.iter().flat_map(|r| r.rounds.iter().cloned()).collect();
    let degrees: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.degrees.iter().map(|&d| d as f64))
        .collect();
    let n = degrees.len().max(1) as f64;
    let mean = degrees.iter().sum::<f64>() / n;
    let var = degrees.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok((compute_metrics(&rounds).with_degree(mean, var), runs))
}

/// Load or synthesize the trace, then run it.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Metrics, ScenarioError> {
    config.validate()?;
    let trace = config.load_trace()?;
    Ok(run_trace(config, &trace)?.0)
}
