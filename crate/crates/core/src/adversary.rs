//! Attack strategies.
//!
//! An adversary answers polls like any other node but substitutes the values
//! it commits to. Planning happens in two phases that mirror what the node
//! can know: [`plan_attack`] runs when the REPLY is due and fixes the fake
//! position and the forged direct timings; [`AttackPlan::complete`] runs after
//! the REVEAL and decides what goes into the REPORT for each overheard REPLY.
//!
//! Knowledgeable strategies read true positions from an oracle snapshot taken
//! at poll time. Colluders additionally learn the verifier, each other's
//! plans and the origin of every overheard REPLY out of band.

use crate::geometry::{hyperbola_through_point, sample_point, Hyperbola, Position, SPEED_OF_LIGHT};
use crate::protocol::{
    HeardReply, LinkId, NodeId, ProtocolParams, ReplyClaim, ReportClaim, ReportEntry,
};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Honest,
    UnknowledgeableLiar,
    KnowledgeableIndependent,
    CollinearExploit,
    ColludingBasic,
    ColludingHyperbola,
    ReplyDisregard,
}

impl StrategyKind {
    pub fn is_colluding(self) -> bool {
        matches!(
            self,
            Self::ColludingBasic | Self::ColludingHyperbola | Self::ReplyDisregard
        )
    }

    /// Smallest group the strategy is defined for.
    pub fn min_group_size(self) -> usize {
        match self {
            Self::ReplyDisregard => 3,
            k if k.is_colluding() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Honest => "honest",
            Self::UnknowledgeableLiar => "unknowledgeable_liar",
            Self::KnowledgeableIndependent => "knowledgeable_independent",
            Self::CollinearExploit => "collinear_exploit",
            Self::ColludingBasic => "colluding_basic",
            Self::ColludingHyperbola => "colluding_hyperbola",
            Self::ReplyDisregard => "reply_disregard",
        })
    }
}

/// Behavior of one node, with its colluding group where applicable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversaryStrategy {
    Honest,
    UnknowledgeableLiar,
    KnowledgeableIndependent,
    CollinearExploit,
    ColludingBasic { group: BTreeSet<NodeId> },
    ColludingHyperbola { group: BTreeSet<NodeId> },
    ReplyDisregard { group: BTreeSet<NodeId> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} needs a group of at least {min} nodes, got {got}")]
pub struct GroupSizeError {
    pub kind: StrategyKind,
    pub min: usize,
    pub got: usize,
}

impl AdversaryStrategy {
    pub fn new(kind: StrategyKind, group: BTreeSet<NodeId>) -> Result<Self, GroupSizeError> {
        if group.len() < kind.min_group_size() && kind.is_colluding() {
            return Err(GroupSizeError {
                kind,
                min: kind.min_group_size(),
                got: group.len(),
            });
        }
        Ok(match kind {
            StrategyKind::Honest => Self::Honest,
            StrategyKind::UnknowledgeableLiar => Self::UnknowledgeableLiar,
            StrategyKind::KnowledgeableIndependent => Self::KnowledgeableIndependent,
            StrategyKind::CollinearExploit => Self::CollinearExploit,
            StrategyKind::ColludingBasic => Self::ColludingBasic { group },
            StrategyKind::ColludingHyperbola => Self::ColludingHyperbola { group },
            StrategyKind::ReplyDisregard => Self::ReplyDisregard { group },
        })
    }

    pub fn kind(&self) -> StrategyKind {
        match self {
            Self::Honest => StrategyKind::Honest,
            Self::UnknowledgeableLiar => StrategyKind::UnknowledgeableLiar,
            Self::KnowledgeableIndependent => StrategyKind::KnowledgeableIndependent,
            Self::CollinearExploit => StrategyKind::CollinearExploit,
            Self::ColludingBasic { .. } => StrategyKind::ColludingBasic,
            Self::ColludingHyperbola { .. } => StrategyKind::ColludingHyperbola,
            Self::ReplyDisregard { .. } => StrategyKind::ReplyDisregard,
        }
    }

    pub fn group(&self) -> Option<&BTreeSet<NodeId>> {
        match self {
            Self::ColludingBasic { group }
            | Self::ColludingHyperbola { group }
            | Self::ReplyDisregard { group } => Some(group),
            _ => None,
        }
    }

    pub fn is_adversarial(&self) -> bool {
        !matches!(self, Self::Honest)
    }
}

/// Limits on a fake position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FakeBounds {
    /// Largest distance from the (believed) verifier.
    pub range: f64,
    /// Smallest displacement from the true position. Smaller lies are
    /// indistinguishable from position error and are not attempted.
    pub min_offset: f64,
}

impl FakeBounds {
    pub fn from_params(params: &ProtocolParams) -> Self {
        Self {
            range: params.range,
            min_offset: 2.0 * params.position_margin(),
        }
    }
}

/// Fixture overrides for the random choices of a knowledgeable adversary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttackHints {
    pub guessed_verifier: Option<NodeId>,
    pub locus_neighbor: Option<NodeId>,
    pub fake_position: Option<Position>,
    /// Force the REPLY-to-identity mapping right or wrong.
    pub mapping_correct: Option<bool>,
}

/// Forged REPORT transmit time and REPLY poll-reception time that make the
/// verifier's direct ranging agree with `p_fake`.
pub fn forge_direct_timings(
    p_s: Position,
    p_m: Position,
    p_fake: Position,
    t_m: f64,
    t_sm: f64,
) -> (f64, f64) {
    let shift = (p_s.distance(&p_m) - p_s.distance(&p_fake)) / SPEED_OF_LIGHT;
    (t_m + shift, t_sm - shift)
}

/// Forged reception time of `X`'s REPLY that agrees with `p_fake`.
pub fn forge_cross_timing(p_x: Position, p_m: Position, p_fake: Position, t_xm: f64) -> f64 {
    t_xm - p_x.distance(&p_m) / SPEED_OF_LIGHT + p_x.distance(&p_fake) / SPEED_OF_LIGHT
}

/// Fake positions that keep the links with both `S` and `X` consistent: the
/// branch with foci `p_s`, `p_x` through `p_m`.
pub fn feasible_fake_locus(p_s: Position, p_x: Position, p_m: Position) -> Option<Hyperbola> {
    hyperbola_through_point(p_s, p_x, p_m).ok()
}

const LOCUS_SPAN: f64 = 14.0;
const LOCUS_STEPS: usize = 1000;
const MAX_DRAWS: usize = 256;

/// Uniform draw over the part of the branch parameter range whose points lie
/// within `bounds.range` of `anchor`, rejecting points closer than
/// `bounds.min_offset` to `origin`.
pub fn sample_on_locus<R: Rng + ?Sized>(
    h: &Hyperbola,
    anchor: Position,
    origin: Position,
    bounds: FakeBounds,
    rng: &mut R,
) -> Option<Position> {
    let step = 2.0 * LOCUS_SPAN / LOCUS_STEPS as f64;
    let in_range = |p: Position| anchor.distance(&p) <= bounds.range;
    let mut feasible = (0..=LOCUS_STEPS)
        .map(|i| -LOCUS_SPAN + i as f64 * step)
        .filter(|&t| sample_point(h, t).is_ok_and(in_range));
    let lo = feasible.next()?;
    let hi = feasible.next_back().unwrap_or(lo);
    let (lo, hi) = ((lo - step).max(-LOCUS_SPAN), (hi + step).min(LOCUS_SPAN));
    (0..MAX_DRAWS).find_map(|_| {
        let p = sample_point(h, rng.gen_range(lo..=hi)).ok()?;
        (in_range(p) && p.distance(&origin) >= bounds.min_offset).then_some(p)
    })
}

/// Uniform draw in the disk of radius `radius` around `centre`, at least
/// `min_offset` from `origin`.
pub fn sample_in_disk<R: Rng + ?Sized>(
    centre: Position,
    radius: f64,
    origin: Position,
    min_offset: f64,
    rng: &mut R,
) -> Option<Position> {
    (0..MAX_DRAWS).find_map(|_| {
        let r = radius * rng.gen::<f64>().sqrt();
        let a = rng.gen_range(0.0..TAU);
        let p = centre.offset(r * a.cos(), r * a.sin());
        (p.distance(&origin) >= min_offset).then_some(p)
    })
}

/// Uniform draw on the segment from `anchor` through `through`, up to
/// `bounds.range` from `anchor`.
fn sample_on_ray<R: Rng + ?Sized>(
    anchor: Position,
    through: Position,
    bounds: FakeBounds,
    rng: &mut R,
) -> Option<Position> {
    let len = anchor.distance(&through);
    if len == 0.0 {
        return None;
    }
    (0..MAX_DRAWS).find_map(|_| {
        let p = anchor.lerp(&through, rng.gen_range(0.0..=bounds.range) / len);
        (p.distance(&through) >= bounds.min_offset).then_some(p)
    })
}

/// Plan agreed by the colluders taking part in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPlan {
    pub verifier: NodeId,
    pub verifier_position: Position,
    /// Correct neighbor whose links the hyperbola-based attack keeps consistent.
    pub witness: Option<(NodeId, Position)>,
    /// Fake position of every participating member.
    pub fakes: BTreeMap<NodeId, Position>,
}

impl GroupPlan {
    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.fakes.keys().copied()
    }
}

/// Agree on fake positions for the members of a group that answered a poll.
///
/// `members` holds the true positions of participating members and
/// `shared` the correct participants each member can hear.
/// Attempts at a group-wide set of fakes, and draws per member within one.
const GROUP_TRIES: usize = 32;
const MEMBER_TRIES: usize = 16;

pub fn plan_group<R: Rng + ?Sized>(
    kind: StrategyKind,
    verifier: (NodeId, Position),
    members: &BTreeMap<NodeId, Position>,
    shared: &BTreeMap<NodeId, BTreeSet<NodeId>>,
    positions: &BTreeMap<NodeId, Position>,
    bounds: FakeBounds,
    rng: &mut R,
) -> GroupPlan {
    let (s, p_s) = verifier;
    let witness = (kind == StrategyKind::ColludingHyperbola)
        .then(|| {
            let mut votes: BTreeMap<NodeId, usize> = BTreeMap::new();
            for x in shared.values().flatten() {
                *votes.entry(*x).or_default() += 1;
            }
            // Most shared first; BTreeMap order breaks ties toward the smallest id.
            let best = votes
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
            positions.get(best.0).map(|p| (*best.0, *p))
        })
        .flatten();
    let loci: BTreeMap<NodeId, Option<Hyperbola>> = members
        .iter()
        .map(|(&m, &p_m)| {
            (
                m,
                witness.and_then(|(_, p_x)| feasible_fake_locus(p_s, p_x, p_m)),
            )
        })
        .collect();
    let draw = |m: NodeId, p_m: Position, rng: &mut R| {
        loci[&m]
            .as_ref()
            .and_then(|h| sample_on_locus(h, p_s, p_m, bounds, rng))
            .or_else(|| sample_in_disk(p_s, bounds.range, p_m, bounds.min_offset, rng))
            .unwrap_or(p_m)
    };
    // Members that hear each other, and the witness, must also see the fake
    // positions in range.
    // Redraw the whole set until no such pair is out of range, keeping the
    // best attempt otherwise.
    let mut best: Option<(usize, BTreeMap<NodeId, Position>)> = None;
    for _ in 0..GROUP_TRIES {
        let mut fakes: BTreeMap<NodeId, Position> = BTreeMap::new();
        let mut broken = 0;
        for (&m, &p_m) in members {
            let linked: Vec<Position> = members
                .iter()
                .filter(|(o, p_o)| fakes.contains_key(o) && p_o.distance(&p_m) <= bounds.range)
                .map(|(o, _)| fakes[o])
                .chain(
                    witness
                        .map(|(_, p_x)| p_x)
                        .filter(|p_x| p_x.distance(&p_m) <= bounds.range),
                )
                .collect();
            let mut fake = draw(m, p_m, rng);
            for _ in 1..MEMBER_TRIES {
                if linked.iter().all(|q| q.distance(&fake) <= bounds.range) {
                    break;
                }
                fake = draw(m, p_m, rng);
            }
            broken += linked
                .iter()
                .filter(|q| q.distance(&fake) > bounds.range)
                .count();
            fakes.insert(m, fake);
        }
        if best.as_ref().is_none_or(|(b, _)| broken < *b) {
            best = Some((broken, fakes));
        }
        if broken == 0 {
            break;
        }
    }
    let fakes = best.map(|(_, f)| f).unwrap_or_default();
    GroupPlan {
        verifier: s,
        verifier_position: p_s,
        witness,
        fakes,
    }
}

/// What an adversary knows when its REPLY is due.
#[derive(Debug, Clone, Copy)]
pub struct ReplyContext<'a> {
    pub me: NodeId,
    pub position: Position,
    /// Recorded POLL reception time.
    pub poll_rx: f64,
    /// Actual REPLY transmit time.
    pub reply_tx: f64,
    /// True positions of the possible poll sources: the verifier and the
    /// participants this node can hear.
    pub candidates: &'a BTreeMap<NodeId, Position>,
    pub group: Option<&'a GroupPlan>,
    pub bounds: FakeBounds,
}

/// What an adversary knows when its REPORT is due.
#[derive(Debug, Clone, Copy)]
pub struct ReportContext<'a> {
    pub heard: &'a [HeardReply],
    /// True origin of each overheard REPLY. Only colluders and fixture hints use it.
    pub origins: Option<&'a BTreeMap<LinkId, NodeId>>,
    /// Forged REPLY transmit times of fellow colluders.
    pub group_reply_tx: Option<&'a BTreeMap<NodeId, f64>>,
}

/// Values an adversary commits to in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    pub kind: StrategyKind,
    pub me: NodeId,
    pub true_position: Position,
    pub fake_position: Position,
    pub reply_tx: f64,
    pub poll_rx: f64,
    pub forged_reply_time: f64,
    pub forged_poll_reception: f64,
    pub guessed_verifier: Option<NodeId>,
    pub locus_neighbor: Option<NodeId>,
    pub forged_cross_receptions: BTreeMap<LinkId, f64>,
    pub disregard_set: BTreeSet<NodeId>,
    pub guessed_reply_mapping: BTreeMap<LinkId, NodeId>,
    candidates: BTreeMap<NodeId, Position>,
    group: Option<GroupPlan>,
}

/// Decide the fake position and forge the direct timings.
///
/// Strategies that lack the knowledge they need (a colluder without a group
/// plan) fall back to the unknowledgeable liar.
pub fn plan_attack<R: Rng + ?Sized>(
    strategy: &AdversaryStrategy,
    ctx: &ReplyContext<'_>,
    hints: &AttackHints,
    rng: &mut R,
) -> AttackPlan {
    let mut kind = strategy.kind();
    if kind.is_colluding() && ctx.group.is_none_or(|g| !g.fakes.contains_key(&ctx.me)) {
        kind = StrategyKind::UnknowledgeableLiar;
    }
    let bounds = ctx.bounds;
    let p_m = ctx.position;
    let mut plan = AttackPlan {
        kind,
        me: ctx.me,
        true_position: p_m,
        fake_position: p_m,
        reply_tx: ctx.reply_tx,
        poll_rx: ctx.poll_rx,
        forged_reply_time: ctx.reply_tx,
        forged_poll_reception: ctx.poll_rx,
        guessed_verifier: None,
        locus_neighbor: None,
        forged_cross_receptions: BTreeMap::new(),
        disregard_set: BTreeSet::new(),
        guessed_reply_mapping: BTreeMap::new(),
        candidates: ctx.candidates.clone(),
        group: ctx.group.cloned(),
    };
    let anchor = match kind {
        StrategyKind::Honest => return plan,
        StrategyKind::UnknowledgeableLiar => {
            plan.fake_position = hints
                .fake_position
                .or_else(|| sample_in_disk(p_m, bounds.range, p_m, bounds.min_offset, rng))
                .unwrap_or(p_m);
            return plan;
        }
        StrategyKind::KnowledgeableIndependent | StrategyKind::CollinearExploit => {
            let ids: Vec<NodeId> = ctx.candidates.keys().copied().collect();
            let Some(guess) = hints.guessed_verifier.or_else(|| ids.choose(rng).copied()) else {
                plan.kind = StrategyKind::UnknowledgeableLiar;
                plan.fake_position =
                    sample_in_disk(p_m, bounds.range, p_m, bounds.min_offset, rng).unwrap_or(p_m);
                return plan;
            };
            let p_g = ctx.candidates[&guess];
            plan.guessed_verifier = Some(guess);
            let fake = if let Some(p) = hints.fake_position {
                Some(p)
            } else if kind == StrategyKind::CollinearExploit {
                sample_on_ray(p_g, p_m, bounds, rng)
            } else {
                let others: Vec<NodeId> = ids.iter().copied().filter(|&x| x != guess).collect();
                let neighbor = hints.locus_neighbor.or_else(|| others.choose(rng).copied());
                plan.locus_neighbor = neighbor;
                neighbor
                    .and_then(|x| feasible_fake_locus(p_g, ctx.candidates[&x], p_m))
                    .and_then(|h| sample_on_locus(&h, p_g, p_m, bounds, rng))
                    .or_else(|| sample_in_disk(p_g, bounds.range, p_m, bounds.min_offset, rng))
            };
            plan.fake_position = fake.unwrap_or(p_m);
            p_g
        }
        StrategyKind::ColludingBasic
        | StrategyKind::ColludingHyperbola
        | StrategyKind::ReplyDisregard => {
            let g = ctx.group.expect("checked above");
            plan.guessed_verifier = Some(g.verifier);
            plan.locus_neighbor = g.witness.map(|w| w.0);
            plan.fake_position = hints.fake_position.unwrap_or(g.fakes[&ctx.me]);
            g.verifier_position
        }
    };
    let (t_m, t_sm) =
        forge_direct_timings(anchor, p_m, plan.fake_position, ctx.reply_tx, ctx.poll_rx);
    plan.forged_reply_time = t_m;
    plan.forged_poll_reception = t_sm;
    plan
}

impl AttackPlan {
    pub fn reply_claim(&self) -> ReplyClaim {
        ReplyClaim {
            poll_rx_time: self.forged_poll_reception,
        }
    }

    /// Decide the reported reception time of each overheard REPLY.
    pub fn complete<R: Rng + ?Sized>(
        &mut self,
        ctx: &ReportContext<'_>,
        hints: &AttackHints,
        rng: &mut R,
    ) {
        self.forged_cross_receptions.clear();
        self.guessed_reply_mapping.clear();
        self.disregard_set.clear();
        match self.kind {
            StrategyKind::Honest | StrategyKind::UnknowledgeableLiar => {}
            StrategyKind::KnowledgeableIndependent | StrategyKind::CollinearExploit => {
                self.guess_mapping(ctx, hints, rng);
                for h in ctx.heard {
                    if let Some(p_x) = self
                        .guessed_reply_mapping
                        .get(&h.link)
                        .map(|x| self.candidates[x])
                    {
                        let t = forge_cross_timing(
                            p_x,
                            self.true_position,
                            self.fake_position,
                            h.rx_time,
                        );
                        self.forged_cross_receptions.insert(h.link, t);
                    }
                }
            }
            StrategyKind::ColludingBasic
            | StrategyKind::ColludingHyperbola
            | StrategyKind::ReplyDisregard => self.collude(ctx),
        }
    }

    /// Random injection of overheard REPLYs into the candidates other than
    /// the guessed verifier.
    fn guess_mapping<R: Rng + ?Sized>(
        &mut self,
        ctx: &ReportContext<'_>,
        hints: &AttackHints,
        rng: &mut R,
    ) {
        let mut targets: Vec<NodeId> = self
            .candidates
            .keys()
            .copied()
            .filter(|&x| Some(x) != self.guessed_verifier)
            .collect();
        let links: Vec<LinkId> = ctx.heard.iter().map(|h| h.link).collect();
        let truth = |l: &LinkId| ctx.origins.and_then(|o| o.get(l)).copied();
        match hints.mapping_correct {
            Some(true) => {
                for l in &links {
                    if let Some(x) = truth(l).filter(|x| self.candidates.contains_key(x)) {
                        self.guessed_reply_mapping.insert(*l, x);
                    }
                }
            }
            Some(false) if targets.len() > 1 => {
                // Rotate the true assignment so no REPLY keeps its origin.
                for l in &links {
                    if let Some(pos) = truth(l).and_then(|x| targets.iter().position(|t| *t == x)) {
                        self.guessed_reply_mapping
                            .insert(*l, targets[(pos + 1) % targets.len()]);
                    }
                }
            }
            _ => {
                targets.shuffle(rng);
                for (l, x) in links.iter().zip(targets) {
                    self.guessed_reply_mapping.insert(*l, x);
                }
            }
        }
    }

    fn collude(&mut self, ctx: &ReportContext<'_>) {
        let Some(group) = &self.group else { return };
        let Some(origins) = ctx.origins else { return };
        let members: BTreeSet<NodeId> = group.members().collect();
        let mut correct: Vec<(NodeId, LinkId)> = Vec::new();
        for h in ctx.heard {
            let Some(&origin) = origins.get(&h.link) else {
                continue;
            };
            self.guessed_reply_mapping.insert(h.link, origin);
            if members.contains(&origin) {
                let forged_tx = ctx.group_reply_tx.and_then(|t| t.get(&origin)).copied();
                if let Some(t) = forged_tx {
                    let d = group.fakes[&origin].distance(&self.fake_position);
                    self.forged_cross_receptions
                        .insert(h.link, t + d / SPEED_OF_LIGHT);
                }
            } else if group.witness.is_some_and(|w| w.0 == origin)
                && self.kind == StrategyKind::ColludingHyperbola
            {
                let p_x = group.witness.expect("checked").1;
                let t = forge_cross_timing(p_x, self.true_position, self.fake_position, h.rx_time);
                self.forged_cross_receptions.insert(h.link, t);
            } else {
                correct.push((origin, h.link));
            }
        }
        if self.kind == StrategyKind::ReplyDisregard {
            // Keep fewer correct entries than colluder links so the majority holds.
            let colluders = members.len().saturating_sub(1);
            correct.sort();
            for (origin, _) in correct.iter().skip(colluders.saturating_sub(1)) {
                self.disregard_set.insert(*origin);
            }
        }
    }

    /// REPORT contents for the REPLYs actually overheard.
    pub fn report_claim(&self, heard: &[HeardReply]) -> ReportClaim {
        let entries = heard
            .iter()
            .filter(|h| {
                self.guessed_reply_mapping
                    .get(&h.link)
                    .is_none_or(|origin| !self.disregard_set.contains(origin))
            })
            .map(|h| ReportEntry {
                rx_time: self
                    .forged_cross_receptions
                    .get(&h.link)
                    .copied()
                    .unwrap_or(h.rx_time),
                commitment: h.commitment.clone(),
            })
            .collect();
        ReportClaim {
            position: self.fake_position,
            reply_tx_time: self.forged_reply_time,
            entries,
        }
    }
}
