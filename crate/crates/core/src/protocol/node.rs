//! Verifier and neighbor state machines. Each owns the state of a single
//! protocol round and is driven by the caller's event loop.

use super::message::{
    CommitmentBody, Message, Poll, Reply, Report, ReportBody, ReportEntry, Reveal, Sealed,
};
use super::observation::{DirectRecord, ObservationSet};
use super::wire::{commitment_signed_bytes, report_signed_bytes, MAX_REPORT_ENTRIES};
use super::{Directory, KeyMaterial, LinkId, LinkIdSource, NodeId, ProtocolError, ProtocolParams};
use crate::crypto::{Authenticator, Digest, KeyPair, PublicKey};
use crate::geometry::Position;
use rand::Rng;

/// A REPLY as recorded by the node that heard it. The origin is unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct HeardReply {
    pub rx_time: f64,
    pub link: LinkId,
    pub commitment: Sealed<CommitmentBody>,
}

#[derive(Debug, Clone)]
struct PollState {
    onetime: KeyPair,
    poll_hash: Digest,
    poll_tx: f64,
    replies: Vec<HeardReply>,
    revealed: bool,
}

/// The node initiating a discovery round.
#[derive(Debug, Clone)]
pub struct Verifier {
    id: NodeId,
    keys: KeyMaterial,
    position: Position,
    state: Option<PollState>,
}

impl Verifier {
    /// `position` is the verifier's own (possibly noisy) position estimate.
    pub fn new(id: NodeId, keys: KeyMaterial, position: Position) -> Self {
        Self {
            id,
            keys,
            position,
            state: None,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn keys(&self) -> &KeyMaterial {
        &self.keys
    }

    pub fn poll_time(&self) -> Option<f64> {
        self.state.as_ref().map(|s| s.poll_tx)
    }

    pub fn poll_hash(&self) -> Option<Digest> {
        self.state.as_ref().map(|s| s.poll_hash)
    }

    pub fn stored_replies(&self) -> usize {
        self.state.as_ref().map_or(0, |s| s.replies.len())
    }

    pub fn start_poll(
        &mut self,
        now: f64,
        links: &mut LinkIdSource,
        auth: &dyn Authenticator,
    ) -> Result<Message, ProtocolError> {
        let onetime = self.keys.take_one_time()?;
        let onetime_key = onetime.public();
        self.state = Some(PollState {
            poll_hash: auth.digest(&onetime_key.0),
            onetime,
            poll_tx: now,
            replies: Vec::new(),
            revealed: false,
        });
        Ok(Message::Poll(Poll {
            link: links.next_id(),
            onetime_key,
        }))
    }

    /// Store a REPLY bound to this poll. Foreign replies are ignored.
    pub fn handle_reply(&mut self, reply: &Reply, t_rx: f64) -> bool {
        let Some(state) = self.state.as_mut() else {
            return false;
        };
        if reply.poll_hash != state.poll_hash || state.revealed {
            return false;
        }
        state.replies.push(HeardReply {
            rx_time: t_rx,
            link: reply.link,
            commitment: reply.commitment.clone(),
        });
        true
    }

    /// Earliest time the REVEAL may go out, given this round's jitter draw.
    pub fn reveal_due(&self, params: &ProtocolParams, jitter: f64) -> Option<f64> {
        self.poll_time().map(|t| t + params.reveal_delay() + jitter)
    }

    pub fn build_reveal(
        &mut self,
        now: f64,
        params: &ProtocolParams,
        jitter: f64,
        links: &mut LinkIdSource,
        auth: &dyn Authenticator,
    ) -> Result<Message, ProtocolError> {
        let due = self
            .reveal_due(params, jitter)
            .ok_or(ProtocolError::NotPolling)?;
        if now < due {
            return Err(ProtocolError::RevealTooEarly { now, due });
        }
        let state = self.state.as_mut().ok_or(ProtocolError::NotPolling)?;
        state.revealed = true;
        let proof = auth.prove(&state.onetime, &state.poll_hash.0);
        let key = self.keys.long_term().public();
        let signature = auth.sign(self.keys.long_term(), &reveal_signed_bytes(&proof, &key));
        Ok(Message::Reveal(Reveal {
            link: links.next_id(),
            proof,
            key,
            signature,
        }))
    }

    /// Decrypt commitments and reports and assemble the observation set.
    ///
    /// Replies or reports that fail to decrypt, verify or resolve to a known
    /// identity are dropped; a responder needs both a direct REPLY and a
    /// REPORT to appear in the result.
    pub fn ingest_reports(
        &self,
        reports: &[Report],
        directory: &Directory,
        auth: &dyn Authenticator,
    ) -> Result<ObservationSet, ProtocolError> {
        let state = self.state.as_ref().ok_or(ProtocolError::NotPolling)?;
        if !state.revealed {
            return Err(ProtocolError::NotPolling);
        }
        let resolve = |c: &Sealed<CommitmentBody>| -> Option<(NodeId, f64)> {
            let body = c.open(&state.onetime).ok()?;
            let signed = commitment_signed_bytes(body.poll_rx_time, &body.key, &state.poll_hash);
            if !auth.verify(&body.key, &signed, &body.signature) {
                return None;
            }
            directory
                .identify(&body.key)
                .map(|id| (id, body.poll_rx_time))
        };

        let mut direct = std::collections::BTreeMap::new();
        for heard in &state.replies {
            if let Some((id, poll_rx)) = resolve(&heard.commitment) {
                if id != self.id {
                    direct.entry(id).or_insert((poll_rx, heard.rx_time));
                }
            }
        }

        let mut obs = ObservationSet::new(self.id, self.position, state.poll_tx);
        for report in reports {
            if report.destination != self.id {
                continue;
            }
            let Some(&(poll_rx, reply_rx)) = direct.get(&report.source) else {
                continue;
            };
            let Some(sender_key) = directory.key_of(report.source) else {
                continue;
            };
            let Ok(body) = report.payload.open(self.keys.long_term()) else {
                continue;
            };
            let signed =
                report_signed_bytes(body.position, body.reply_tx_time, &body.entries, auth);
            if !auth.verify(&sender_key, &signed, &body.signature)
                || obs.responders.contains_key(&report.source)
            {
                continue;
            }
            obs.responders.insert(
                report.source,
                DirectRecord {
                    position: body.position,
                    reply_tx: body.reply_tx_time,
                    poll_rx,
                    reply_rx,
                },
            );
            for entry in &body.entries {
                if let Some((sender, _)) = resolve(&entry.commitment) {
                    if sender != report.source {
                        obs.cross
                            .entry((sender, report.source))
                            .or_insert(entry.rx_time);
                    }
                }
            }
        }
        obs.prune_cross();
        Ok(obs)
    }
}

fn reveal_signed_bytes(proof: &Digest, key: &PublicKey) -> Vec<u8> {
    [proof.0.as_slice(), key.0.as_slice()].concat()
}

/// Poll reception time placed in the commitment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplyClaim {
    pub poll_rx_time: f64,
}

/// Contents of a REPORT before signing.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportClaim {
    pub position: Position,
    pub reply_tx_time: f64,
    pub entries: Vec<ReportEntry>,
}

#[derive(Debug, Clone)]
struct ResponderState {
    poll_key: PublicKey,
    poll_hash: Digest,
    poll_rx: f64,
    reply: Option<(LinkId, f64)>,
    heard: Vec<HeardReply>,
}

/// A neighbor answering someone else's poll.
#[derive(Debug, Clone)]
pub struct Responder {
    id: NodeId,
    keys: KeyMaterial,
    state: Option<ResponderState>,
}

impl Responder {
    pub fn new(id: NodeId, keys: KeyMaterial) -> Self {
        Self {
            id,
            keys,
            state: None,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.long_term().public()
    }

    pub fn poll_rx_time(&self) -> Option<f64> {
        self.state.as_ref().map(|s| s.poll_rx)
    }

    pub fn reply_tx_time(&self) -> Option<f64> {
        self.state.as_ref().and_then(|s| s.reply.map(|(_, t)| t))
    }

    pub fn reply_link(&self) -> Option<LinkId> {
        self.state.as_ref().and_then(|s| s.reply.map(|(l, _)| l))
    }

    pub fn heard(&self) -> &[HeardReply] {
        self.state.as_ref().map_or(&[], |s| &s.heard)
    }

    /// Record a POLL and draw the REPLY wait, uniform on `[0, t_max]`.
    pub fn handle_poll<R: Rng + ?Sized>(
        &mut self,
        msg: &Message,
        t_rx: f64,
        t_max: f64,
        auth: &dyn Authenticator,
        rng: &mut R,
    ) -> Result<f64, ProtocolError> {
        let poll = msg.as_poll()?;
        self.state = Some(ResponderState {
            poll_key: poll.onetime_key,
            poll_hash: auth.digest(&poll.onetime_key.0),
            poll_rx: t_rx,
            reply: None,
            heard: Vec::new(),
        });
        Ok(rng.gen_range(0.0..=t_max))
    }

    pub fn honest_reply_claim(&self) -> Result<ReplyClaim, ProtocolError> {
        let state = self.state.as_ref().ok_or(ProtocolError::MissingPollState)?;
        Ok(ReplyClaim {
            poll_rx_time: state.poll_rx,
        })
    }

    pub fn build_reply(
        &mut self,
        now: f64,
        claim: ReplyClaim,
        links: &mut LinkIdSource,
        auth: &dyn Authenticator,
    ) -> Result<Message, ProtocolError> {
        let state = self.state.as_mut().ok_or(ProtocolError::MissingPollState)?;
        let key = self.keys.long_term().public();
        let signed = commitment_signed_bytes(claim.poll_rx_time, &key, &state.poll_hash);
        let signature = auth.sign(self.keys.long_term(), &signed);
        let link = links.next_id();
        let commitment = Sealed::seal(
            state.poll_key,
            link.0,
            CommitmentBody {
                poll_rx_time: claim.poll_rx_time,
                key,
                signature,
            },
        );
        state.reply = Some((link, now));
        Ok(Message::Reply(Reply {
            link,
            poll_hash: state.poll_hash,
            commitment,
        }))
    }

    /// Store an overheard REPLY bound to the same poll.
    pub fn handle_reply(&mut self, reply: &Reply, t_rx: f64) -> bool {
        match self.state.as_mut() {
            Some(state) if state.poll_hash == reply.poll_hash => {
                state.heard.push(HeardReply {
                    rx_time: t_rx,
                    link: reply.link,
                    commitment: reply.commitment.clone(),
                });
                true
            }
            _ => false,
        }
    }

    /// Check a REVEAL's proof of poll authorship and return the verifier's identity.
    pub fn verify_reveal(
        &self,
        msg: &Message,
        directory: &Directory,
        auth: &dyn Authenticator,
    ) -> Result<NodeId, ProtocolError> {
        let reveal = msg.as_reveal()?;
        let state = self.state.as_ref().ok_or(ProtocolError::MissingPollState)?;
        if !auth.check_proof(&state.poll_key, &state.poll_hash.0, &reveal.proof) {
            return Err(ProtocolError::AuthorshipCheckFailed);
        }
        if !auth.verify(
            &reveal.key,
            &reveal_signed_bytes(&reveal.proof, &reveal.key),
            &reveal.signature,
        ) {
            return Err(ProtocolError::InvalidReveal);
        }
        directory
            .identify(&reveal.key)
            .ok_or(ProtocolError::InvalidReveal)
    }

    pub fn build_report(
        &mut self,
        reveal: &Message,
        claim: ReportClaim,
        directory: &Directory,
        auth: &dyn Authenticator,
    ) -> Result<Message, ProtocolError> {
        let verifier = self.verify_reveal(reveal, directory, auth)?;
        let verifier_key = reveal.as_reveal()?.key;
        if claim.entries.len() > MAX_REPORT_ENTRIES {
            return Err(ProtocolError::TooManyEntries(claim.entries.len()));
        }
        let signed = report_signed_bytes(claim.position, claim.reply_tx_time, &claim.entries, auth);
        let signature = auth.sign(self.keys.long_term(), &signed);
        let body = ReportBody {
            position: claim.position,
            reply_tx_time: claim.reply_tx_time,
            entries: claim.entries,
            signature,
        };
        Ok(Message::Report(Report {
            source: self.id,
            destination: verifier,
            payload: Sealed::seal(verifier_key, self.id.0, body),
        }))
    }
}

/// Truthful report: own position estimate, actual REPLY time, every overheard REPLY.
pub fn honest_report_claim(responder: &Responder, position: Position) -> Option<ReportClaim> {
    let reply_tx_time = responder.reply_tx_time()?;
    let entries = responder
        .heard()
        .iter()
        .map(|h| ReportEntry {
            rx_time: h.rx_time,
            commitment: h.commitment.clone(),
        })
        .collect();
    Some(ReportClaim {
        position,
        reply_tx_time,
        entries,
    })
}
