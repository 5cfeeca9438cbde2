//! The four-message neighbor position discovery exchange.
//!
//! A verifier broadcasts an anonymous POLL carrying a one-time public key.
//! Every neighbor answers with an anonymous REPLY holding a commitment that
//! only the verifier can open, and records the REPLYs it overhears from other
//! neighbors. After a fixed wait the verifier REVEALs its identity and each
//! neighbor unicasts a REPORT with its position, its REPLY transmit time and
//! the overheard (reception time, commitment) pairs. The verifier turns the
//! reports into an [`ObservationSet`].

pub mod golden;
mod message;
mod node;
mod observation;
pub mod wire;

pub use message::{
    CommitmentBody, Message, MessageKind, Poll, Reply, Report, ReportBody, ReportEntry, Reveal,
    Sealed,
};
pub use node::{honest_report_claim, HeardReply, ReplyClaim, ReportClaim, Responder, Verifier};
pub use observation::{DirectRecord, ObservationSet};

use crate::crypto::{KeyPair, PublicKey};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use thiserror::Error;

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Link-layer identifier, fresh for every anonymous transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(pub u32);

/// Source of link identifiers that never repeats within 2^32 draws.
///
/// The counter is scrambled by an odd multiplier and an xor mask, which is a
/// bijection on `u32`.
#[derive(Debug, Clone)]
pub struct LinkIdSource {
    counter: u32,
    mask: u32,
}

impl LinkIdSource {
    pub fn new(seed: u32) -> Self {
        Self {
            counter: 0,
            mask: seed.rotate_left(13) ^ 0x5bd1_e995,
        }
    }

    pub fn next_id(&mut self) -> LinkId {
        self.counter = self.counter.wrapping_add(1);
        LinkId(self.counter.wrapping_mul(0x9e37_79b1) ^ self.mask)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("one-time key pool exhausted")]
    ExhaustedKeyPool,
    #[error("expected a {expected} message, got {got}")]
    UnexpectedMessage {
        expected: MessageKind,
        got: MessageKind,
    },
    #[error("no poll has been received in this round")]
    MissingPollState,
    #[error("no poll has been sent in this round")]
    NotPolling,
    #[error("reveal is due at {due} s, called at {now} s")]
    RevealTooEarly { now: f64, due: f64 },
    #[error("reveal does not prove authorship of the poll")]
    AuthorshipCheckFailed,
    #[error("reveal signature or identity is invalid")]
    InvalidReveal,
    #[error("sealed payload is addressed to a different key")]
    WrongKey,
    #[error("report carries {0} entries, at most 255 fit the encoding")]
    TooManyEntries(usize),
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
}

/// Long-term key pair plus the pool of single-use keys for polls.
#[derive(Debug, Clone)]
pub struct KeyMaterial {
    long_term: KeyPair,
    one_time_pool: VecDeque<KeyPair>,
}

impl KeyMaterial {
    pub fn new(long_term: KeyPair, one_time: impl IntoIterator<Item = KeyPair>) -> Self {
        Self {
            long_term,
            one_time_pool: one_time.into_iter().collect(),
        }
    }

    pub fn generate<R: rand::Rng + ?Sized>(rng: &mut R, pool_size: usize) -> Self {
        let long_term = KeyPair::generate(rng);
        let pool = (0..pool_size)
            .map(|_| KeyPair::generate(rng))
            .collect::<Vec<_>>();
        Self::new(long_term, pool)
    }

    pub fn long_term(&self) -> &KeyPair {
        &self.long_term
    }

    pub fn remaining_one_time(&self) -> usize {
        self.one_time_pool.len()
    }

    pub fn one_time_keys(&self) -> impl Iterator<Item = &KeyPair> {
        self.one_time_pool.iter()
    }

    fn take_one_time(&mut self) -> Result<KeyPair, ProtocolError> {
        self.one_time_pool
            .pop_front()
            .ok_or(ProtocolError::ExhaustedKeyPool)
    }
}

/// Trusted binding between long-term public keys and node identities.
#[derive(Debug, Clone, Default)]
pub struct Directory {
    by_key: BTreeMap<PublicKey, NodeId>,
    by_id: BTreeMap<NodeId, PublicKey>,
}

impl Directory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: NodeId, key: PublicKey) {
        self.by_key.insert(key, id);
        self.by_id.insert(id, key);
    }

    pub fn identify(&self, key: &PublicKey) -> Option<NodeId> {
        self.by_key.get(key).copied()
    }

    pub fn key_of(&self, id: NodeId) -> Option<PublicKey> {
        self.by_id.get(&id).copied()
    }
}

/// Protocol and verification parameters. Lengths in meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Proximity range `R`.
    pub range: f64,
    /// Maximum own-position error.
    pub eps_p: f64,
    /// Maximum ranging error.
    pub eps_r: f64,
    /// Upper bound of the random REPLY wait.
    pub t_max: f64,
    /// Allowance for propagation and contention of late REPLYs.
    pub contention_lag: f64,
    /// Upper bound of the random REVEAL jitter.
    pub jitter_max: f64,
    /// Mismatch-to-link ratio threshold of the cross-symmetry test.
    pub mismatch_threshold: f64,
    /// Multilateration demotion margin; `2 * eps_p` when unset.
    pub ml_margin: Option<f64>,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            range: 250.0,
            eps_p: 5.0,
            eps_r: 6.8,
            t_max: 0.2,
            contention_lag: 0.03,
            jitter_max: 0.05,
            mismatch_threshold: 0.5,
            ml_margin: None,
        }
    }
}

impl ProtocolParams {
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |what: &str| Err(ProtocolError::InvalidParams(what.to_string()));
        if !(self.range > 0.0 && self.range.is_finite()) {
            return bad("range must be positive");
        }
        if !(self.eps_p >= 0.0 && self.eps_r >= 0.0) {
            return bad("eps_p and eps_r must be non-negative");
        }
        if !(self.mismatch_threshold > 0.0 && self.mismatch_threshold < 1.0) {
            return bad("mismatch_threshold must lie in (0, 1)");
        }
        if !(self.t_max > 0.0 && self.contention_lag > 0.0 && self.jitter_max > 0.0) {
            return bad("t_max, contention_lag and jitter_max must be positive");
        }
        if self.ml_margin.is_some_and(|m| !(m >= 0.0)) {
            return bad("ml_margin must be non-negative");
        }
        Ok(())
    }

    /// Margin for comparing a ranged distance against advertised positions.
    pub fn position_margin(&self) -> f64 {
        2.0 * self.eps_p + self.eps_r
    }

    /// Margin for comparing the two directions of a ranged link.
    pub fn symmetry_margin(&self) -> f64 {
        2.0 * self.eps_r
    }

    /// Largest ranged distance accepted as within proximity range.
    pub fn range_limit(&self) -> f64 {
        self.range + self.eps_r
    }

    pub fn ml_margin(&self) -> f64 {
        self.ml_margin.unwrap_or(2.0 * self.eps_p)
    }

    /// Earliest REVEAL time relative to the POLL, before jitter.
    pub fn reveal_delay(&self) -> f64 {
        self.t_max + self.contention_lag
    }
}
