use super::{LinkId, NodeId, ProtocolError};
use crate::crypto::{Digest, KeyPair, PublicKey, Signature};
use crate::geometry::Position;
use std::fmt;

/// Payload encrypted to `recipient`. Opening it requires the matching key pair.
///
/// Values are kept at full resolution in memory; the byte form produced by
/// [`super::wire`] is what travels on the air.
#[derive(Debug, Clone, PartialEq)]
pub struct Sealed<T> {
    recipient: PublicKey,
    nonce: u32,
    body: T,
}

impl<T> Sealed<T> {
    pub fn seal(recipient: PublicKey, nonce: u32, body: T) -> Self {
        Self {
            recipient,
            nonce,
            body,
        }
    }

    pub fn open(&self, key: &KeyPair) -> Result<&T, ProtocolError> {
        if key.public() == self.recipient {
            Ok(&self.body)
        } else {
            Err(ProtocolError::WrongKey)
        }
    }

    pub fn recipient(&self) -> &PublicKey {
        &self.recipient
    }

    pub fn nonce(&self) -> u32 {
        self.nonce
    }

    /// Body without a key; only the wire encoder and tests use this.
    pub(crate) fn body_unchecked(&self) -> &T {
        &self.body
    }
}

/// Contents of a REPLY commitment: poll reception time, identity and signature.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentBody {
    pub poll_rx_time: f64,
    pub key: PublicKey,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poll {
    pub link: LinkId,
    pub onetime_key: PublicKey,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub link: LinkId,
    pub poll_hash: Digest,
    pub commitment: Sealed<CommitmentBody>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reveal {
    pub link: LinkId,
    /// Hash of the poll's one-time key, proven under the one-time private key.
    pub proof: Digest,
    pub key: PublicKey,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    pub rx_time: f64,
    pub commitment: Sealed<CommitmentBody>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBody {
    pub position: Position,
    pub reply_tx_time: f64,
    pub entries: Vec<ReportEntry>,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub source: NodeId,
    pub destination: NodeId,
    pub payload: Sealed<ReportBody>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Poll(Poll),
    Reply(Reply),
    Reveal(Reveal),
    Report(Report),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    Poll = 1,
    Reply = 2,
    Reveal = 3,
    Report = 4,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::Poll => "POLL",
            MessageKind::Reply => "REPLY",
            MessageKind::Reveal => "REVEAL",
            MessageKind::Report => "REPORT",
        })
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Poll(_) => MessageKind::Poll,
            Message::Reply(_) => MessageKind::Reply,
            Message::Reveal(_) => MessageKind::Reveal,
            Message::Report(_) => MessageKind::Report,
        }
    }

    pub fn as_poll(&self) -> Result<&Poll, ProtocolError> {
        match self {
            Message::Poll(p) => Ok(p),
            other => Err(ProtocolError::UnexpectedMessage {
                expected: MessageKind::Poll,
                got: other.kind(),
            }),
        }
    }

    pub fn as_reply(&self) -> Result<&Reply, ProtocolError> {
        match self {
            Message::Reply(r) => Ok(r),
            other => Err(ProtocolError::UnexpectedMessage {
                expected: MessageKind::Reply,
                got: other.kind(),
            }),
        }
    }

    pub fn as_reveal(&self) -> Result<&Reveal, ProtocolError> {
        match self {
            Message::Reveal(r) => Ok(r),
            other => Err(ProtocolError::UnexpectedMessage {
                expected: MessageKind::Reveal,
                got: other.kind(),
            }),
        }
    }

    pub fn as_report(&self) -> Result<&Report, ProtocolError> {
        match self {
            Message::Report(r) => Ok(r),
            other => Err(ProtocolError::UnexpectedMessage {
                expected: MessageKind::Report,
                got: other.kind(),
            }),
        }
    }
}
