use super::NodeId;
use crate::geometry::{Position, SPEED_OF_LIGHT};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// What the verifier learned about one responder over the direct link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectRecord {
    /// Advertised position.
    pub position: Position,
    /// Advertised REPLY transmit time.
    pub reply_tx: f64,
    /// POLL reception time from the responder's commitment.
    pub poll_rx: f64,
    /// Reception time of the responder's REPLY at the verifier.
    pub reply_rx: f64,
}

/// Everything a verifier knows after one protocol run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationSet {
    pub verifier: NodeId,
    pub verifier_position: Position,
    pub poll_tx: f64,
    pub responders: BTreeMap<NodeId, DirectRecord>,
    /// `(sender, receiver) -> time the receiver reported hearing the sender's REPLY`.
    pub cross: BTreeMap<(NodeId, NodeId), f64>,
}

impl ObservationSet {
    pub fn new(verifier: NodeId, verifier_position: Position, poll_tx: f64) -> Self {
        Self {
            verifier,
            verifier_position,
            poll_tx,
            ..Default::default()
        }
    }

    pub fn responder_ids(&self) -> BTreeSet<NodeId> {
        self.responders.keys().copied().collect()
    }

    pub fn position(&self, x: NodeId) -> Option<Position> {
        self.responders.get(&x).map(|r| r.position)
    }

    /// Verifier-to-responder range from the POLL.
    pub fn poll_range(&self, x: NodeId) -> Option<f64> {
        self.responders
            .get(&x)
            .map(|r| (r.poll_rx - self.poll_tx) * SPEED_OF_LIGHT)
    }

    /// Responder-to-verifier range from the REPLY.
    pub fn reply_range(&self, x: NodeId) -> Option<f64> {
        self.responders
            .get(&x)
            .map(|r| (r.reply_rx - r.reply_tx) * SPEED_OF_LIGHT)
    }

    /// Range of `sender`'s REPLY as heard by `receiver`.
    pub fn cross_range(&self, sender: NodeId, receiver: NodeId) -> Option<f64> {
        let tx = self.responders.get(&sender)?.reply_tx;
        self.cross
            .get(&(sender, receiver))
            .map(|rx| (rx - tx) * SPEED_OF_LIGHT)
    }

    pub fn has_cross(&self, sender: NodeId, receiver: NodeId) -> bool {
        self.cross.contains_key(&(sender, receiver))
    }

    /// Drop cross-observations whose endpoints are not both responders.
    pub fn prune_cross(&mut self) {
        let ids = self.responder_ids();
        self.cross
            .retain(|(a, b), _| a != b && ids.contains(a) && ids.contains(b));
    }

    /// Structural invariants: cross-observations reference responders,
    /// timestamps are non-negative.
    pub fn is_consistent(&self) -> bool {
        let ids = self.responder_ids();
        self.cross
            .iter()
            .all(|((a, b), t)| a != b && ids.contains(a) && ids.contains(b) && *t >= 0.0)
            && self.poll_tx >= 0.0
            && self
                .responders
                .values()
                .all(|r| r.reply_tx >= 0.0 && r.poll_rx >= 0.0 && r.reply_rx >= 0.0)
    }
}
