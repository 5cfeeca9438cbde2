//! Byte-level encoding of the four messages. Integers are big-endian.
//!
//! ```text
//! POLL    type(1) link(4) onetime_key(21)                          = 26
//! REPLY   type(1) link(4) poll_hash(20) commitment(46)             = 71
//! REVEAL  type(1) link(4) proof(20) key(21) signature(21)          = 67
//! REPORT  type(1) source(4) destination(4) len(2) payload(len)     = 45 + 50n
//!
//! commitment plaintext  time(4) key(21) signature(21)              = 46
//! report plaintext      count(1) x(4) y(4) time(4)
//!                       count * [ rx_time(4) commitment(46) ]
//!                       signature(21)                              = 34 + 50n
//! ```
//!
//! Times are unsigned 32-bit fixed point with 2^-20 s resolution, wrapping
//! every 4096 s. Coordinates are signed 32-bit millimeters. Commitments and
//! report payloads are encrypted with the backend keystream and keep their
//! length. See FORMAT.md at the repository root for golden fixtures.

use super::message::{
    CommitmentBody, Message, MessageKind, Report, ReportBody, ReportEntry, Sealed,
};
use crate::crypto::{
    Authenticator, Digest, KeyPair, PublicKey, Signature, DIGEST_LEN, PUBLIC_KEY_LEN, SIGNATURE_LEN,
};
use crate::geometry::Position;
use thiserror::Error;

pub const HEADER_LEN: usize = 5;
pub const POLL_LEN: usize = HEADER_LEN + PUBLIC_KEY_LEN;
pub const COMMITMENT_LEN: usize = TIME_LEN + PUBLIC_KEY_LEN + SIGNATURE_LEN;
pub const REPLY_LEN: usize = HEADER_LEN + DIGEST_LEN + COMMITMENT_LEN;
pub const REVEAL_LEN: usize = HEADER_LEN + DIGEST_LEN + PUBLIC_KEY_LEN + SIGNATURE_LEN;
pub const TIME_LEN: usize = 4;
pub const ENTRY_LEN: usize = TIME_LEN + COMMITMENT_LEN;
/// Report bytes outside the per-entry part.
pub const REPORT_FIXED_LEN: usize = HEADER_LEN + 4 + 2 + 1 + 8 + TIME_LEN + SIGNATURE_LEN;
pub const MAX_REPORT_ENTRIES: usize = u8::MAX as usize;

/// Seconds per unit of an encoded timestamp.
pub const TIME_RESOLUTION: f64 = 1.0 / (1u64 << 20) as f64;

pub const fn report_len(entries: usize) -> usize {
    REPORT_FIXED_LEN + entries * ENTRY_LEN
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("buffer is empty")]
    Empty,
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("{kind} needs {expected} bytes, buffer has {actual}")]
    Length {
        kind: MessageKind,
        expected: usize,
        actual: usize,
    },
    #[error("report payload length {0} is not 34 + 50n")]
    BadPayloadLength(usize),
    #[error("report payload declares {declared} entries but carries {actual}")]
    EntryCount { declared: usize, actual: usize },
}

pub fn encode_time(t: f64) -> u32 {
    ((t / TIME_RESOLUTION).round() as i64).rem_euclid(1i64 << 32) as u32
}

pub fn decode_time(raw: u32) -> f64 {
    raw as f64 * TIME_RESOLUTION
}

/// Time as it survives a round trip through the wire.
pub fn quantize_time(t: f64) -> f64 {
    decode_time(encode_time(t))
}

fn encode_coord(v: f64) -> [u8; 4] {
    ((v * 1000.0).round().clamp(i32::MIN as f64, i32::MAX as f64) as i32).to_be_bytes()
}

fn decode_coord(b: [u8; 4]) -> f64 {
    i32::from_be_bytes(b) as f64 / 1000.0
}

pub fn encode_position(p: Position) -> [u8; 8] {
    let mut out = [0u8; 8];
    out[..4].copy_from_slice(&encode_coord(p.x));
    out[4..].copy_from_slice(&encode_coord(p.y));
    out
}

pub fn decode_position(b: [u8; 8]) -> Position {
    Position::new(
        decode_coord(b[..4].try_into().unwrap()),
        decode_coord(b[4..].try_into().unwrap()),
    )
}

/// Bytes covered by a commitment signature.
pub fn commitment_signed_bytes(poll_rx_time: f64, key: &PublicKey, poll_hash: &Digest) -> Vec<u8> {
    let mut out = Vec::with_capacity(TIME_LEN + PUBLIC_KEY_LEN + DIGEST_LEN);
    out.extend_from_slice(&encode_time(poll_rx_time).to_be_bytes());
    out.extend_from_slice(&key.0);
    out.extend_from_slice(&poll_hash.0);
    out
}

pub fn commitment_plaintext(body: &CommitmentBody) -> [u8; COMMITMENT_LEN] {
    let mut out = [0u8; COMMITMENT_LEN];
    out[..4].copy_from_slice(&encode_time(body.poll_rx_time).to_be_bytes());
    out[4..25].copy_from_slice(&body.key.0);
    out[25..].copy_from_slice(&body.signature.0);
    out
}

pub fn commitment_ciphertext(
    sealed: &Sealed<CommitmentBody>,
    auth: &dyn Authenticator,
) -> [u8; COMMITMENT_LEN] {
    let mut buf = commitment_plaintext(sealed.body_unchecked());
    auth.apply_keystream(sealed.recipient(), sealed.nonce(), &mut buf);
    buf
}

/// Decrypt a commitment taken off the wire. The signature is not checked here.
pub fn open_commitment(
    ciphertext: &[u8; COMMITMENT_LEN],
    key: &KeyPair,
    nonce: u32,
    auth: &dyn Authenticator,
) -> CommitmentBody {
    let mut buf = *ciphertext;
    auth.apply_keystream(&key.public(), nonce, &mut buf);
    CommitmentBody {
        poll_rx_time: decode_time(u32::from_be_bytes(buf[..4].try_into().unwrap())),
        key: PublicKey(buf[4..25].try_into().unwrap()),
        signature: Signature(buf[25..].try_into().unwrap()),
    }
}

/// Bytes covered by a report signature: the plaintext minus the signature.
pub fn report_signed_bytes(
    position: Position,
    reply_tx_time: f64,
    entries: &[ReportEntry],
    auth: &dyn Authenticator,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + entries.len() * ENTRY_LEN);
    out.push(entries.len().min(MAX_REPORT_ENTRIES) as u8);
    out.extend_from_slice(&encode_position(position));
    out.extend_from_slice(&encode_time(reply_tx_time).to_be_bytes());
    for e in entries {
        out.extend_from_slice(&encode_time(e.rx_time).to_be_bytes());
        out.extend_from_slice(&commitment_ciphertext(&e.commitment, auth));
    }
    out
}

/// Report payload decoded from plaintext bytes. Timestamps are quantized.
#[derive(Debug, Clone, PartialEq)]
pub struct WireReport {
    pub position: Position,
    pub reply_tx_time: f64,
    pub entries: Vec<(f64, [u8; COMMITMENT_LEN])>,
    pub signature: Signature,
    /// The signed prefix, for verification by the caller.
    pub signed: Vec<u8>,
}

pub fn open_report_payload(
    ciphertext: &[u8],
    key: &KeyPair,
    nonce: u32,
    auth: &dyn Authenticator,
) -> Result<WireReport, WireError> {
    let mut buf = ciphertext.to_vec();
    auth.apply_keystream(&key.public(), nonce, &mut buf);
    let fixed = 1 + 8 + TIME_LEN + SIGNATURE_LEN;
    if buf.len() < fixed || !(buf.len() - fixed).is_multiple_of(ENTRY_LEN) {
        return Err(WireError::BadPayloadLength(buf.len()));
    }
    let actual = (buf.len() - fixed) / ENTRY_LEN;
    let declared = buf[0] as usize;
    if declared != actual {
        return Err(WireError::EntryCount { declared, actual });
    }
    let position = decode_position(buf[1..9].try_into().unwrap());
    let reply_tx_time = decode_time(u32::from_be_bytes(buf[9..13].try_into().unwrap()));
    let entries = buf[13..13 + actual * ENTRY_LEN]
        .chunks_exact(ENTRY_LEN)
        .map(|c| {
            let t = decode_time(u32::from_be_bytes(c[..4].try_into().unwrap()));
            (t, c[4..].try_into().unwrap())
        })
        .collect();
    let split = buf.len() - SIGNATURE_LEN;
    let signature = Signature(buf[split..].try_into().unwrap());
    buf.truncate(split);
    Ok(WireReport {
        position,
        reply_tx_time,
        entries,
        signature,
        signed: buf,
    })
}

/// A message as it appears on the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Poll {
        link: u32,
        onetime_key: [u8; PUBLIC_KEY_LEN],
    },
    Reply {
        link: u32,
        poll_hash: [u8; DIGEST_LEN],
        commitment: [u8; COMMITMENT_LEN],
    },
    Reveal {
        link: u32,
        proof: [u8; DIGEST_LEN],
        key: [u8; PUBLIC_KEY_LEN],
        signature: [u8; SIGNATURE_LEN],
    },
    Report {
        source: u32,
        destination: u32,
        payload: Vec<u8>,
    },
}

impl Frame {
    pub fn kind(&self) -> MessageKind {
        match self {
            Frame::Poll { .. } => MessageKind::Poll,
            Frame::Reply { .. } => MessageKind::Reply,
            Frame::Reveal { .. } => MessageKind::Reveal,
            Frame::Report { .. } => MessageKind::Report,
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self {
            Frame::Poll { .. } => POLL_LEN,
            Frame::Reply { .. } => REPLY_LEN,
            Frame::Reveal { .. } => REVEAL_LEN,
            Frame::Report { payload, .. } => HEADER_LEN + 6 + payload.len(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(self.kind() as u8);
        match self {
            Frame::Poll { link, onetime_key } => {
                out.extend_from_slice(&link.to_be_bytes());
                out.extend_from_slice(onetime_key);
            }
            Frame::Reply {
                link,
                poll_hash,
                commitment,
            } => {
                out.extend_from_slice(&link.to_be_bytes());
                out.extend_from_slice(poll_hash);
                out.extend_from_slice(commitment);
            }
            Frame::Reveal {
                link,
                proof,
                key,
                signature,
            } => {
                out.extend_from_slice(&link.to_be_bytes());
                out.extend_from_slice(proof);
                out.extend_from_slice(key);
                out.extend_from_slice(signature);
            }
            Frame::Report {
                source,
                destination,
                payload,
            } => {
                out.extend_from_slice(&source.to_be_bytes());
                out.extend_from_slice(&destination.to_be_bytes());
                out.extend_from_slice(&(payload.len() as u16).to_be_bytes());
                out.extend_from_slice(payload);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Frame, WireError> {
        let (&tag, rest) = bytes.split_first().ok_or(WireError::Empty)?;
        let kind = match tag {
            1 => MessageKind::Poll,
            2 => MessageKind::Reply,
            3 => MessageKind::Reveal,
            4 => MessageKind::Report,
            other => return Err(WireError::UnknownType(other)),
        };
        let expect = |expected: usize| {
            if bytes.len() == expected {
                Ok(())
            } else {
                Err(WireError::Length {
                    kind,
                    expected,
                    actual: bytes.len(),
                })
            }
        };
        let u32_at = |at: usize| u32::from_be_bytes(rest[at..at + 4].try_into().unwrap());
        match kind {
            MessageKind::Poll => {
                expect(POLL_LEN)?;
                Ok(Frame::Poll {
                    link: u32_at(0),
                    onetime_key: rest[4..].try_into().unwrap(),
                })
            }
            MessageKind::Reply => {
                expect(REPLY_LEN)?;
                Ok(Frame::Reply {
                    link: u32_at(0),
                    poll_hash: rest[4..24].try_into().unwrap(),
                    commitment: rest[24..].try_into().unwrap(),
                })
            }
            MessageKind::Reveal => {
                expect(REVEAL_LEN)?;
                Ok(Frame::Reveal {
                    link: u32_at(0),
                    proof: rest[4..24].try_into().unwrap(),
                    key: rest[24..45].try_into().unwrap(),
                    signature: rest[45..].try_into().unwrap(),
                })
            }
            MessageKind::Report => {
                if bytes.len() < HEADER_LEN + 6 {
                    return Err(WireError::Length {
                        kind,
                        expected: HEADER_LEN + 6,
                        actual: bytes.len(),
                    });
                }
                let len = u16::from_be_bytes(rest[8..10].try_into().unwrap()) as usize;
                expect(HEADER_LEN + 6 + len)?;
                Ok(Frame::Report {
                    source: u32_at(0),
                    destination: u32_at(4),
                    payload: rest[10..].to_vec(),
                })
            }
        }
    }
}

fn report_payload(report: &Report, auth: &dyn Authenticator) -> Vec<u8> {
    let body: &ReportBody = report.payload.body_unchecked();
    let mut plain = report_signed_bytes(body.position, body.reply_tx_time, &body.entries, auth);
    plain.extend_from_slice(&body.signature.0);
    auth.apply_keystream(
        report.payload.recipient(),
        report.payload.nonce(),
        &mut plain,
    );
    plain
}

/// Encrypt and lay out a message for transmission.
pub fn to_frame(msg: &Message, auth: &dyn Authenticator) -> Frame {
    match msg {
        Message::Poll(p) => Frame::Poll {
            link: p.link.0,
            onetime_key: p.onetime_key.0,
        },
        Message::Reply(r) => Frame::Reply {
            link: r.link.0,
            poll_hash: r.poll_hash.0,
            commitment: commitment_ciphertext(&r.commitment, auth),
        },
        Message::Reveal(r) => Frame::Reveal {
            link: r.link.0,
            proof: r.proof.0,
            key: r.key.0,
            signature: r.signature.0,
        },
        Message::Report(r) => Frame::Report {
            source: r.source.0,
            destination: r.destination.0,
            payload: report_payload(r, auth),
        },
    }
}

pub fn serialize(msg: &Message, auth: &dyn Authenticator) -> Vec<u8> {
    to_frame(msg, auth).to_bytes()
}

pub fn deserialize(bytes: &[u8]) -> Result<Frame, WireError> {
    Frame::from_bytes(bytes)
}
