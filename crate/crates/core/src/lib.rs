//! Secure neighbor position discovery (SNPD) for vehicular ad hoc networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: planar positions, time-of-flight conversions, hyperbolae and
//!   the multilateration solver.
//! * [`crypto`] and [`protocol`]: the four-message exchange (POLL, REPLY,
//!   REVEAL, REPORT), the per-node state machines and the wire encoding.
//! * [`verification`]: the direct-symmetry, cross-symmetry and multilateration
//!   tests run by a verifier.
//! * [`adversary`]: attack strategies that forge timings and positions.
//! * [`sim`]: mobility traces, the per-round discrete-event engine, scenario
//!   execution and metrics.

pub mod adversary;
pub mod crypto;
pub mod geometry;
pub mod protocol;
pub mod sim;
pub mod verification;

pub use geometry::{Hyperbola, Position, SPEED_OF_LIGHT};
pub use protocol::{NodeId, ObservationSet, ProtocolParams};
pub use verification::{classify, Classification};
