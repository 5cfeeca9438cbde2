//! One discovery round, played out as a sequential event queue.

use super::radio::{Adjacency, RadioModel};
use crate::adversary::{
    plan_attack, plan_group, AdversaryStrategy, AttackHints, AttackPlan, FakeBounds, GroupPlan,
    ReplyContext, ReportContext,
};
use crate::crypto::SimulatedAuth;
use crate::geometry::{flight_time, Position};
use crate::protocol::wire::MAX_REPORT_ENTRIES;
use crate::protocol::{
    honest_report_claim, Directory, KeyMaterial, LinkId, LinkIdSource, Message, MessageKind,
    NodeId, ObservationSet, ProtocolParams, Report, Responder, Verifier,
};
use crate::verification::{classify, Classification};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

const ROUND_START: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Correct,
    Adversary,
}

/// One frame handed to a receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: MessageKind,
    pub tx_time: f64,
    pub rx_time: f64,
    /// Reception time as recorded by the receiver, ranging error included.
    pub recorded: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RoundOptions<'a> {
    /// Fixed adversary choices, keyed by node.
    pub hints: BTreeMap<NodeId, AttackHints>,
    /// Keep a log of every delivered frame in [`RoundResult::deliveries`].
    pub record_deliveries: bool,
    /// Neighbor graph of the snapshot at the radio range, to skip range scans.
    pub adjacency: Option<&'a Adjacency>,
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    pub verifier: NodeId,
    pub classification: Classification,
    pub ground_truth: BTreeMap<NodeId, Role>,
    /// Nodes with a direct record in the observation set.
    pub responders: BTreeSet<NodeId>,
    pub observation: ObservationSet,
    pub attacks: BTreeMap<NodeId, AttackPlan>,
    /// Nodes that read true positions from the oracle.
    pub oracle_readers: BTreeSet<NodeId>,
    pub deliveries: Vec<Delivery>,
}

impl RoundResult {
    fn empty(verifier: NodeId) -> Self {
        Self {
            verifier,
            classification: Classification::default(),
            ground_truth: BTreeMap::new(),
            responders: BTreeSet::new(),
            observation: ObservationSet::new(verifier, Position::new(0.0, 0.0), ROUND_START),
            attacks: BTreeMap::new(),
            oracle_readers: BTreeSet::new(),
            deliveries: Vec::new(),
        }
    }
}

/// True positions, handed out only to adversaries and logged per reader.
struct Oracle<'a> {
    positions: &'a BTreeMap<NodeId, Position>,
    readers: RefCell<BTreeSet<NodeId>>,
}

impl<'a> Oracle<'a> {
    fn read(
        &self,
        reader: NodeId,
        ids: impl IntoIterator<Item = NodeId>,
    ) -> BTreeMap<NodeId, Position> {
        self.readers.borrow_mut().insert(reader);
        ids.into_iter()
            .filter_map(|id| self.positions.get(&id).map(|p| (id, *p)))
            .collect()
    }
}

#[derive(Debug)]
enum Action {
    SendReply(NodeId),
    SendReveal,
    Deliver {
        to: NodeId,
        msg: Rc<Message>,
        tx_time: f64,
        recorded: f64,
    },
}

/// Queue key: time, then sender, then message type, then receiver.
type Key = (u64, NodeId, MessageKind, NodeId);

struct Queue(BTreeMap<Key, Vec<Action>>);

impl Queue {
    fn push(
        &mut self,
        time: f64,
        sender: NodeId,
        kind: MessageKind,
        receiver: NodeId,
        action: Action,
    ) {
        debug_assert!(time >= 0.0 && time.is_finite());
        self.0
            .entry((time.to_bits(), sender, kind, receiver))
            .or_default()
            .push(action);
    }

    fn pop(&mut self) -> Option<(f64, Action)> {
        loop {
            let mut entry = self.0.first_entry()?;
            let time = f64::from_bits(entry.key().0);
            if entry.get().is_empty() {
                entry.remove();
                continue;
            }
            let action = entry.get_mut().remove(0);
            return Some((time, action));
        }
    }
}

/// Run one round with no fixed adversary choices.
pub fn run_round<R: Rng + ?Sized>(
    snapshot: &BTreeMap<NodeId, Position>,
    verifier: NodeId,
    params: &ProtocolParams,
    strategies: &BTreeMap<NodeId, AdversaryStrategy>,
    radio: &RadioModel,
    rng: &mut R,
) -> RoundResult {
    run_round_with(
        snapshot,
        verifier,
        params,
        strategies,
        radio,
        &RoundOptions::default(),
        rng,
    )
}

/// Run POLL, REPLYs, REVEAL and REPORTs on frozen positions, then classify.
pub fn run_round_with<R: Rng + ?Sized>(
    snapshot: &BTreeMap<NodeId, Position>,
    verifier: NodeId,
    params: &ProtocolParams,
    strategies: &BTreeMap<NodeId, AdversaryStrategy>,
    radio: &RadioModel,
    options: &RoundOptions<'_>,
    rng: &mut R,
) -> RoundResult {
    let Some(&p_s) = snapshot.get(&verifier) else {
        return RoundResult::empty(verifier);
    };
    let mut round = Round::new(
        snapshot, verifier, p_s, params, strategies, radio, options, rng,
    );
    round.run(rng);
    round.finish()
}

/// Nodes within radio range of `center`, in id order.
fn in_range_of(
    snapshot: &BTreeMap<NodeId, Position>,
    adjacency: Option<&Adjacency>,
    radio: &RadioModel,
    center: NodeId,
) -> Vec<(NodeId, Position)> {
    let p = snapshot[&center];
    match adjacency.and_then(|a| a.get(&center)) {
        Some(near) => near.iter().map(|id| (*id, snapshot[id])).collect(),
        None => snapshot
            .iter()
            .filter(|(id, q)| **id != center && radio.in_range(p, **q))
            .map(|(id, q)| (*id, *q))
            .collect(),
    }
}

struct Round<'a> {
    snapshot: &'a BTreeMap<NodeId, Position>,
    params: &'a ProtocolParams,
    strategies: &'a BTreeMap<NodeId, AdversaryStrategy>,
    radio: &'a RadioModel,
    options: &'a RoundOptions<'a>,
    auth: SimulatedAuth,
    oracle: Oracle<'a>,
    directory: Directory,
    links: LinkIdSource,
    verifier: Verifier,
    verifier_id: NodeId,
    verifier_pos: Position,
    jitter: f64,
    responders: BTreeMap<NodeId, Responder>,
    estimates: BTreeMap<NodeId, Position>,
    participants: BTreeSet<NodeId>,
    origins: BTreeMap<LinkId, NodeId>,
    group_plans: BTreeMap<BTreeSet<NodeId>, GroupPlan>,
    attacks: BTreeMap<NodeId, AttackPlan>,
    reports: Vec<Report>,
    deliveries: Vec<Delivery>,
    queue: Queue,
}

impl<'a> Round<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new<R: Rng + ?Sized>(
        snapshot: &'a BTreeMap<NodeId, Position>,
        verifier_id: NodeId,
        verifier_pos: Position,
        params: &'a ProtocolParams,
        strategies: &'a BTreeMap<NodeId, AdversaryStrategy>,
        radio: &'a RadioModel,
        options: &'a RoundOptions<'a>,
        rng: &mut R,
    ) -> Self {
        let mut directory = Directory::new();
        let verifier_keys = KeyMaterial::generate(rng, 1);
        directory.insert(verifier_id, verifier_keys.long_term().public());
        let estimate = radio.position_estimate(verifier_pos, rng);
        let verifier = Verifier::new(verifier_id, verifier_keys, estimate);
        let mut responders = BTreeMap::new();
        let mut estimates = BTreeMap::new();
        for (id, p) in in_range_of(snapshot, options.adjacency, radio, verifier_id) {
            {
                let keys = KeyMaterial::generate(rng, 0);
                directory.insert(id, keys.long_term().public());
                responders.insert(id, Responder::new(id, keys));
                estimates.insert(id, radio.position_estimate(p, rng));
            }
        }
        Self {
            snapshot,
            params,
            strategies,
            radio,
            options,
            auth: SimulatedAuth,
            oracle: Oracle {
                positions: snapshot,
                readers: RefCell::new(BTreeSet::new()),
            },
            directory,
            links: LinkIdSource::new(rng.gen()),
            verifier,
            verifier_id,
            verifier_pos,
            jitter: rng.gen_range(0.0..=params.jitter_max),
            responders,
            estimates,
            participants: BTreeSet::new(),
            origins: BTreeMap::new(),
            group_plans: BTreeMap::new(),
            attacks: BTreeMap::new(),
            reports: Vec::new(),
            deliveries: Vec::new(),
            queue: Queue(BTreeMap::new()),
        }
    }

    fn strategy(&self, id: NodeId) -> &AdversaryStrategy {
        self.strategies
            .get(&id)
            .unwrap_or(&AdversaryStrategy::Honest)
    }

    /// Schedule delivery of `msg` to every node within range of `from`.
    fn broadcast<R: Rng + ?Sized>(&mut self, from: NodeId, now: f64, msg: Message, rng: &mut R) {
        let p_from = self.snapshot[&from];
        let kind = msg.kind();
        let msg = Rc::new(msg);
        for (to, p_to) in in_range_of(self.snapshot, self.options.adjacency, self.radio, from) {
            if self.radio.delivered(rng) {
                self.schedule_delivery(from, to, now, p_from, p_to, kind, Rc::clone(&msg), rng);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn schedule_delivery<R: Rng + ?Sized>(
        &mut self,
        from: NodeId,
        to: NodeId,
        now: f64,
        p_from: Position,
        p_to: Position,
        kind: MessageKind,
        msg: Rc<Message>,
        rng: &mut R,
    ) {
        let arrival = now + flight_time(p_from.distance(&p_to));
        let recorded = self.radio.reception_time(now, p_from, p_to, rng);
        self.queue.push(
            arrival,
            from,
            kind,
            to,
            Action::Deliver {
                to,
                msg,
                tx_time: now,
                recorded,
            },
        );
    }

    fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let poll = match self
            .verifier
            .start_poll(ROUND_START, &mut self.links, &self.auth)
        {
            Ok(m) => m,
            Err(e) => {
                log::warn!("verifier {} cannot poll: {e}", self.verifier_id);
                return;
            }
        };
        self.broadcast(self.verifier_id, ROUND_START, poll, rng);
        let reveal_at = self
            .verifier
            .reveal_due(self.params, self.jitter)
            .expect("polling");
        self.queue.push(
            reveal_at,
            self.verifier_id,
            MessageKind::Reveal,
            self.verifier_id,
            Action::SendReveal,
        );

        while let Some((now, action)) = self.queue.pop() {
            match action {
                Action::SendReply(id) => self.send_reply(id, now, rng),
                Action::SendReveal => {
                    let reveal = self.verifier.build_reveal(
                        now,
                        self.params,
                        self.jitter,
                        &mut self.links,
                        &self.auth,
                    );
                    match reveal {
                        Ok(m) => self.broadcast(self.verifier_id, now, m, rng),
                        Err(e) => log::warn!("verifier {} cannot reveal: {e}", self.verifier_id),
                    }
                }
                Action::Deliver {
                    to,
                    msg,
                    tx_time,
                    recorded,
                } => {
                    if self.options.record_deliveries {
                        let from = self.sender_of(&msg, to);
                        self.deliveries.push(Delivery {
                            from,
                            to,
                            kind: msg.kind(),
                            tx_time,
                            rx_time: now,
                            recorded,
                        });
                    }
                    self.deliver(to, &msg, now, recorded, rng);
                }
            }
        }
    }

    fn sender_of(&self, msg: &Message, to: NodeId) -> NodeId {
        match msg {
            Message::Poll(_) | Message::Reveal(_) => self.verifier_id,
            Message::Reply(r) => self.origins.get(&r.link).copied().unwrap_or(to),
            Message::Report(r) => r.source,
        }
    }

    fn deliver<R: Rng + ?Sized>(
        &mut self,
        to: NodeId,
        msg: &Message,
        now: f64,
        recorded: f64,
        rng: &mut R,
    ) {
        match msg {
            Message::Poll(_) => {
                let Some(responder) = self.responders.get_mut(&to) else {
                    return;
                };
                match responder.handle_poll(msg, recorded, self.params.t_max, &self.auth, rng) {
                    Ok(wait) => {
                        self.participants.insert(to);
                        self.queue.push(
                            now + wait,
                            to,
                            MessageKind::Reply,
                            to,
                            Action::SendReply(to),
                        );
                    }
                    Err(e) => log::debug!("node {to} drops poll: {e}"),
                }
            }
            Message::Reply(reply) => {
                if to == self.verifier_id {
                    self.verifier.handle_reply(reply, recorded);
                } else if let Some(responder) = self.responders.get_mut(&to) {
                    responder.handle_reply(reply, recorded);
                }
            }
            Message::Reveal(_) => self.send_report(to, msg, now, rng),
            Message::Report(report) => {
                if to == self.verifier_id {
                    self.reports.push(report.clone());
                }
            }
        }
    }

    fn send_reply<R: Rng + ?Sized>(&mut self, id: NodeId, now: f64, rng: &mut R) {
        let claim = if self.strategy(id).is_adversarial() {
            let plan = self.plan(id, now, rng);
            let claim = plan.reply_claim();
            self.attacks.insert(id, plan);
            claim
        } else {
            match self.responders[&id].honest_reply_claim() {
                Ok(c) => c,
                Err(_) => return,
            }
        };
        let responder = self.responders.get_mut(&id).expect("responder");
        let Ok(reply) = responder.build_reply(now, claim, &mut self.links, &self.auth) else {
            return;
        };
        if let Message::Reply(r) = &reply {
            self.origins.insert(r.link, id);
        }
        self.broadcast(id, now, reply, rng);
    }

    fn plan<R: Rng + ?Sized>(&mut self, id: NodeId, now: f64, rng: &mut R) -> AttackPlan {
        let strategy = self.strategy(id).clone();
        let p_m = self.snapshot[&id];
        let heard: Vec<NodeId> = self
            .participants
            .iter()
            .copied()
            .filter(|&x| x != id && self.radio.in_range(p_m, self.snapshot[&x]))
            .collect();
        let candidates = self
            .oracle
            .read(id, std::iter::once(self.verifier_id).chain(heard));
        let bounds = FakeBounds::from_params(self.params);
        let group = strategy.group().cloned();
        if let Some(group) = &group {
            if !self.group_plans.contains_key(group) {
                let plan = self.plan_group(id, strategy.kind(), group, bounds, rng);
                self.group_plans.insert(group.clone(), plan);
            }
        }
        let ctx = ReplyContext {
            me: id,
            position: p_m,
            poll_rx: self.responders[&id].poll_rx_time().expect("polled"),
            reply_tx: now,
            candidates: &candidates,
            group: group.as_ref().and_then(|g| self.group_plans.get(g)),
            bounds,
        };
        let hints = self.options.hints.get(&id).cloned().unwrap_or_default();
        plan_attack(&strategy, &ctx, &hints, rng)
    }

    /// Plan shared by the members of `group` that received this poll.
    fn plan_group<R: Rng + ?Sized>(
        &self,
        reader: NodeId,
        kind: crate::adversary::StrategyKind,
        group: &BTreeSet<NodeId>,
        bounds: FakeBounds,
        rng: &mut R,
    ) -> GroupPlan {
        let present: Vec<NodeId> = group
            .iter()
            .copied()
            .filter(|m| self.participants.contains(m))
            .collect();
        let known = self.oracle.read(
            reader,
            self.participants.iter().copied().chain([self.verifier_id]),
        );
        let members: BTreeMap<NodeId, Position> = present.iter().map(|m| (*m, known[m])).collect();
        let shared = present
            .iter()
            .map(|&m| {
                let hears = self
                    .participants
                    .iter()
                    .copied()
                    .filter(|&x| {
                        !self.strategy(x).is_adversarial()
                            && x != m
                            && self.radio.in_range(known[&m], known[&x])
                    })
                    .collect();
                (m, hears)
            })
            .collect();
        self.oracle
            .readers
            .borrow_mut()
            .extend(present.iter().copied());
        plan_group(
            kind,
            (self.verifier_id, known[&self.verifier_id]),
            &members,
            &shared,
            &known,
            bounds,
            rng,
        )
    }

    fn send_report<R: Rng + ?Sized>(
        &mut self,
        id: NodeId,
        reveal: &Message,
        now: f64,
        rng: &mut R,
    ) {
        let Some(responder) = self.responders.get(&id) else {
            return;
        };
        if responder.reply_tx_time().is_none() {
            return;
        }
        let heard = responder.heard().to_vec();
        let claim = if let Some(mut plan) = self.attacks.remove(&id) {
            let group = self.strategy(id).group().cloned();
            let group_tx: Option<BTreeMap<NodeId, f64>> = group.as_ref().map(|g| {
                g.iter()
                    .filter_map(|m| self.attacks.get(m).map(|p| (*m, p.forged_reply_time)))
                    .collect()
            });
            let hints = self.options.hints.get(&id).cloned().unwrap_or_default();
            let sees_origins = group.is_some() || hints.mapping_correct.is_some();
            let ctx = ReportContext {
                heard: &heard,
                origins: sees_origins.then_some(&self.origins),
                group_reply_tx: group_tx.as_ref(),
            };
            plan.complete(&ctx, &hints, rng);
            let claim = plan.report_claim(&heard);
            self.attacks.insert(id, plan);
            claim
        } else {
            match honest_report_claim(responder, self.estimates[&id]) {
                Some(c) => c,
                None => return,
            }
        };
        let mut claim = claim;
        claim.entries.truncate(MAX_REPORT_ENTRIES);
        let responder = self.responders.get_mut(&id).expect("responder");
        match responder.build_report(reveal, claim, &self.directory, &self.auth) {
            Ok(report) => {
                let (p_from, p_to) = (self.snapshot[&id], self.verifier_pos);
                if self.radio.in_range(p_from, p_to) && self.radio.delivered(rng) {
                    let to = self.verifier_id;
                    self.schedule_delivery(
                        id,
                        to,
                        now,
                        p_from,
                        p_to,
                        MessageKind::Report,
                        Rc::new(report),
                        rng,
                    );
                }
            }
            Err(e) => log::debug!("node {id} sends no report: {e}"),
        }
    }

    fn finish(self) -> RoundResult {
        let observation =
            match self
                .verifier
                .ingest_reports(&self.reports, &self.directory, &self.auth)
            {
                Ok(obs) => obs,
                Err(_) => ObservationSet::new(self.verifier_id, self.verifier_pos, ROUND_START),
            };
        let classification = classify(&observation, self.params);
        let responders = observation.responder_ids();
        let ground_truth = responders
            .iter()
            .map(|&x| {
                let role = if self.strategy(x).is_adversarial() {
                    Role::Adversary
                } else {
                    Role::Correct
                };
                (x, role)
            })
            .collect();
        RoundResult {
            verifier: self.verifier_id,
            classification,
            ground_truth,
            responders,
            observation,
            attacks: self.attacks,
            oracle_readers: self.oracle.readers.into_inner(),
            deliveries: self.deliveries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::StrategyKind;
    use crate::geometry::SPEED_OF_LIGHT;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layout(points: &[(f64, f64)]) -> BTreeMap<NodeId, Position> {
        points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (NodeId(i as u32), Position::new(x, y)))
            .collect()
    }

    fn pentagon() -> BTreeMap<NodeId, Position> {
        layout(&[
            (0.0, 0.0),
            (100.0, 0.0),
            (50.0, 90.0),
            (-60.0, 70.0),
            (-40.0, -80.0),
        ])
    }

    #[test]
    fn isolated_verifier_has_no_responders() {
        let snap = layout(&[(0.0, 0.0), (1000.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = run_round(
            &snap,
            NodeId(0),
            &ProtocolParams::default(),
            &BTreeMap::new(),
            &RadioModel::exact(250.0),
            &mut rng,
        );
        assert!(r.responders.is_empty());
        assert!(r.classification.is_empty());
    }

    #[test]
    fn missing_verifier_yields_empty_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = run_round(
            &pentagon(),
            NodeId(42),
            &ProtocolParams::default(),
            &BTreeMap::new(),
            &RadioModel::exact(250.0),
            &mut rng,
        );
        assert!(r.responders.is_empty());
    }

    #[test]
    fn honest_clique_without_error_is_verified() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = run_round(
            &pentagon(),
            NodeId(0),
            &ProtocolParams::default(),
            &BTreeMap::new(),
            &RadioModel::exact(250.0),
            &mut rng,
        );
        let expected: BTreeSet<_> = (1..5).map(NodeId).collect();
        assert_eq!(r.responders, expected);
        assert_eq!(r.classification.verified, expected);
        assert!(r.ground_truth.values().all(|&g| g == Role::Correct));
        assert_eq!(r.observation.cross.len(), 12);
    }

    #[test]
    fn receptions_match_true_distance_without_error() {
        let snap = pentagon();
        let opts = RoundOptions {
            record_deliveries: true,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = run_round_with(
            &snap,
            NodeId(0),
            &ProtocolParams::default(),
            &BTreeMap::new(),
            &RadioModel::exact(250.0),
            &opts,
            &mut rng,
        );
        assert!(!r.deliveries.is_empty());
        for d in &r.deliveries {
            let expected = d.tx_time + snap[&d.from].distance(&snap[&d.to]) / SPEED_OF_LIGHT;
            assert!((d.rx_time - expected).abs() < 1e-12, "{d:?}");
            assert!((d.recorded - expected).abs() < 1e-12, "{d:?}");
        }
        let obs = &r.observation;
        for (x, rec) in &obs.responders {
            let t = snap[&NodeId(0)].distance(&snap[x]) / SPEED_OF_LIGHT;
            assert!((rec.poll_rx - obs.poll_tx - t).abs() < 1e-12);
            assert!((rec.reply_rx - rec.reply_tx - t).abs() < 1e-12);
        }
    }

    #[test]
    fn frames_never_leave_the_range() {
        let snap = layout(&[
            (0.0, 0.0),
            (200.0, 0.0),
            (400.0, 0.0),
            (-200.0, 10.0),
            (0.0, 600.0),
        ]);
        let radio = RadioModel {
            range: 250.0,
            eps_p: 5.0,
            eps_r: 6.8,
            loss_probability: 0.2,
        };
        let opts = RoundOptions {
            record_deliveries: true,
            ..Default::default()
        };
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = run_round_with(
                &snap,
                NodeId(0),
                &ProtocolParams::default(),
                &BTreeMap::new(),
                &radio,
                &opts,
                &mut rng,
            );
            for d in &r.deliveries {
                assert!(snap[&d.from].distance(&snap[&d.to]) <= 250.0, "{d:?}");
            }
            assert!(!r.responders.contains(&NodeId(2)) && !r.responders.contains(&NodeId(4)));
        }
    }

    #[test]
    fn only_adversaries_consult_the_oracle() {
        let snap = pentagon();
        let strategies = BTreeMap::from([
            (NodeId(1), AdversaryStrategy::KnowledgeableIndependent),
            (
                NodeId(2),
                AdversaryStrategy::new(StrategyKind::ColludingBasic, [NodeId(2), NodeId(3)].into())
                    .unwrap(),
            ),
            (
                NodeId(3),
                AdversaryStrategy::new(StrategyKind::ColludingBasic, [NodeId(2), NodeId(3)].into())
                    .unwrap(),
            ),
        ]);
        let radio = RadioModel::from_params(&ProtocolParams::default(), 0.0);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = run_round(
                &snap,
                NodeId(0),
                &ProtocolParams::default(),
                &strategies,
                &radio,
                &mut rng,
            );
            assert!(
                r.oracle_readers.iter().all(|x| strategies.contains_key(x)),
                "{:?}",
                r.oracle_readers
            );
            assert!(
                !r.oracle_readers.contains(&NodeId(0)) && !r.oracle_readers.contains(&NodeId(4))
            );
            assert_eq!(r.ground_truth[&NodeId(1)], Role::Adversary);
            assert_eq!(r.ground_truth[&NodeId(4)], Role::Correct);
        }
    }

    #[test]
    fn rounds_are_deterministic_per_seed() {
        let snap = pentagon();
        let strategies = BTreeMap::from([(NodeId(2), AdversaryStrategy::KnowledgeableIndependent)]);
        let radio = RadioModel::from_params(&ProtocolParams::default(), 0.1);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = run_round(
                &snap,
                NodeId(0),
                &ProtocolParams::default(),
                &strategies,
                &radio,
                &mut rng,
            );
            (r.classification, r.observation)
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn unknowledgeable_liar_is_caught() {
        let strategies = BTreeMap::from([(NodeId(3), AdversaryStrategy::UnknowledgeableLiar)]);
        let radio = RadioModel::from_params(&ProtocolParams::default(), 0.0);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = run_round(
                &pentagon(),
                NodeId(0),
                &ProtocolParams::default(),
                &strategies,
                &radio,
                &mut rng,
            );
            assert!(r.classification.faulty.contains(&NodeId(3)), "seed {seed}");
        }
    }
}
