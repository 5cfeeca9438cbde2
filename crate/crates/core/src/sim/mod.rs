//! Trace-driven simulation of discovery rounds.

pub mod fixtures;
pub mod metrics;
pub mod radio;
pub mod round;
pub mod scenario;
pub mod trace;

pub use metrics::{compute_metrics, Metrics};
pub use radio::{degree_stats, neighbor_graph, Adjacency, RadioModel};
pub use round::{run_round, run_round_with, Delivery, Role, RoundOptions, RoundResult};
pub use scenario::{
    run_scenario, run_trace, AdversarySpec, ScenarioConfig, ScenarioError, TraceSource,
};
pub use trace::{
    load_trace, parse_trace, synth_trace, MobilityModel, MobilityTrace, Snapshot, SynthSpec,
    TraceError,
};
