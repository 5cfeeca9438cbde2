//! Verifier-side position checks.
//!
//! [`classify`] runs the direct-symmetry test on every responder, the
//! cross-symmetry test on the survivors and the multilateration test on the
//! nodes that came out verified. Each stage is exposed on its own so that
//! intermediate state can be inspected.

use crate::geometry::{multilaterate, Hyperbola, Position, SPEED_OF_LIGHT};
use crate::protocol::{NodeId, ObservationSet, ProtocolParams};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Faulty,
    Unverifiable,
    Verified,
}

/// Outcome of a verification round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub faulty: BTreeSet<NodeId>,
    pub unverifiable: BTreeSet<NodeId>,
    pub verified: BTreeSet<NodeId>,
    /// Verified nodes put under multilateration whose hyperbolae had no
    /// usable intersection. They keep their verdict.
    pub ml_unresolved: BTreeSet<NodeId>,
}

impl Classification {
    pub fn verdict(&self, x: NodeId) -> Option<Verdict> {
        if self.faulty.contains(&x) {
            Some(Verdict::Faulty)
        } else if self.unverifiable.contains(&x) {
            Some(Verdict::Unverifiable)
        } else if self.verified.contains(&x) {
            Some(Verdict::Verified)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.faulty.len() + self.unverifiable.len() + self.verified.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The three sets are pairwise disjoint and cover exactly `responders`.
    pub fn partitions(&self, responders: &BTreeSet<NodeId>) -> bool {
        self.faulty.is_disjoint(&self.unverifiable)
            && self.faulty.is_disjoint(&self.verified)
            && self.unverifiable.is_disjoint(&self.verified)
            && self.len() == responders.len()
            && responders.iter().all(|x| self.verdict(*x).is_some())
    }
}

/// Link and mismatch counters of one node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCount {
    pub links: u32,
    pub mismatches: u32,
}

impl LinkCount {
    pub fn verdict(&self, delta: f64) -> Verdict {
        if self.links < 2 {
            return Verdict::Unverifiable;
        }
        match compare_ratio(self.mismatches, self.links, delta) {
            Ordering::Greater => Verdict::Faulty,
            Ordering::Equal => Verdict::Unverifiable,
            Ordering::Less => Verdict::Verified,
        }
    }
}

pub type CrossCounters = BTreeMap<NodeId, LinkCount>;

/// Working state of the multilateration test.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MlState {
    /// Verified nodes that omitted at least one link another verified node reported.
    pub waiting: BTreeSet<NodeId>,
    pub hyperbolae: BTreeMap<NodeId, Vec<Hyperbola>>,
    pub estimates: BTreeMap<NodeId, Position>,
}

/// Exact comparison of `m / l` against `delta`.
///
/// `delta` is a finite positive double, hence `mant * 2^exp` exactly; the
/// comparison is carried out on integers.
pub fn compare_ratio(m: u32, l: u32, delta: f64) -> Ordering {
    assert!(l > 0 && delta.is_finite() && delta > 0.0);
    let (mant, exp) = decompose(delta);
    if exp >= 0 {
        let rhs = (l as u128 * mant as u128)
            .checked_shl(exp as u32)
            .filter(|_| exp < 64);
        return match rhs {
            Some(rhs) => (m as u128).cmp(&rhs),
            None => Ordering::Less,
        };
    }
    let shift = (-exp) as u32;
    if shift > 95 {
        // delta < 2^-42 < 1/l.
        return if m == 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        };
    }
    ((m as u128) << shift).cmp(&(l as u128 * mant as u128))
}

fn decompose(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1 << 52) - 1);
    let (mut mant, mut exp) = if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), raw_exp - 1075)
    };
    let tz = mant.trailing_zeros();
    mant >>= tz;
    exp += tz as i32;
    (mant, exp)
}

fn fails_link_checks(d_ab: f64, d_ba: f64, advertised: f64, params: &ProtocolParams) -> bool {
    (d_ab - d_ba).abs() > params.symmetry_margin()
        || [d_ab, d_ba]
            .iter()
            .any(|d| (advertised - d).abs() > params.position_margin() || *d > params.range_limit())
}

/// Direct-symmetry test: responders whose own ranging disagrees with itself,
/// with the advertised position, or with the proximity range.
pub fn direct_symmetry_test(obs: &ObservationSet, params: &ProtocolParams) -> BTreeSet<NodeId> {
    obs.responders
        .iter()
        .filter(|(&x, rec)| {
            let d_sx = obs.poll_range(x).unwrap_or(f64::NAN);
            let d_xs = obs.reply_range(x).unwrap_or(f64::NAN);
            let advertised = obs.verifier_position.distance(&rec.position);
            !d_sx.is_finite()
                || !d_xs.is_finite()
                || fails_link_checks(d_sx, d_xs, advertised, params)
        })
        .map(|(&x, _)| x)
        .collect()
}

/// Cross-symmetry test over every pair of responders not in `faulty_in`
/// that ranged each other in both directions.
pub fn cross_symmetry_test(
    obs: &ObservationSet,
    faulty_in: &BTreeSet<NodeId>,
    params: &ProtocolParams,
) -> (Classification, CrossCounters) {
    let candidates: Vec<NodeId> = obs
        .responders
        .keys()
        .copied()
        .filter(|x| !faulty_in.contains(x))
        .collect();
    let mut counters: CrossCounters = candidates
        .iter()
        .map(|&x| (x, LinkCount::default()))
        .collect();
    for (i, &x) in candidates.iter().enumerate() {
        for &y in &candidates[i + 1..] {
            let (Some(d_xy), Some(d_yx)) = (obs.cross_range(x, y), obs.cross_range(y, x)) else {
                continue;
            };
            let advertised = obs.responders[&x]
                .position
                .distance(&obs.responders[&y].position);
            let mismatch = fails_link_checks(d_xy, d_yx, advertised, params);
            for z in [x, y] {
                let c = counters.get_mut(&z).expect("candidate");
                c.links += 1;
                c.mismatches += mismatch as u32;
            }
        }
    }
    let mut out = Classification {
        faulty: faulty_in.clone(),
        ..Default::default()
    };
    for (&x, c) in &counters {
        match c.verdict(params.mismatch_threshold) {
            Verdict::Faulty => out.faulty.insert(x),
            Verdict::Unverifiable => out.unverifiable.insert(x),
            Verdict::Verified => out.verified.insert(x),
        };
    }
    (out, counters)
}

/// Builds the waiting set and hyperbolae, then multilaterates every waiting
/// node with at least two hyperbolae.
pub fn multilateration_state(
    obs: &ObservationSet,
    verified: &BTreeSet<NodeId>,
    params: &ProtocolParams,
) -> MlState {
    let mut state = MlState::default();
    let p_s = obs.verifier_position;
    for &x in verified {
        for &y in verified {
            if x == y || !obs.has_cross(x, y) || obs.has_cross(y, x) {
                continue;
            }
            state.waiting.insert(x);
            let t_xs = obs.responders[&x].reply_rx;
            let t_xy = obs.cross[&(x, y)];
            let p_y = obs.responders[&y].position;
            match tdoa_locus(p_s, p_y, t_xs - t_xy, 2.0 * params.eps_r) {
                Some(h) => state.hyperbolae.entry(x).or_default().push(h),
                None => log::debug!("no TDoA locus for {x} through {y}"),
            }
        }
    }
    for (&x, hs) in &state.hyperbolae {
        if hs.len() >= 2 {
            if let Ok(p) = multilaterate(hs) {
                state.estimates.insert(x, p);
            }
        }
    }
    state
}

/// Hyperbola with foci `s` and `y` for a TDoA `t_s - t_y`. A range difference
/// exceeding the focal distance by at most `slack` is clamped onto the ray.
fn tdoa_locus(s: Position, y: Position, tdoa: f64, slack: f64) -> Option<Hyperbola> {
    let focal = s.distance(&y);
    let k = tdoa * SPEED_OF_LIGHT;
    if focal == 0.0 || !k.is_finite() || k.abs() > focal + slack {
        return None;
    }
    Hyperbola::new(s, y, k.clamp(-focal, focal)).ok()
}

/// Multilateration test: demotes verified nodes whose multilaterated position
/// is farther than the margin from the advertised one.
pub fn multilateration_test(
    obs: &ObservationSet,
    classification: &Classification,
    params: &ProtocolParams,
) -> Classification {
    let state = multilateration_state(obs, &classification.verified, params);
    let mut out = classification.clone();
    for x in &state.waiting {
        if state.hyperbolae.get(x).map_or(0, Vec::len) < 2 {
            continue;
        }
        match state.estimates.get(x) {
            Some(p) if p.distance(&obs.responders[x].position) > params.ml_margin() => {
                out.verified.remove(x);
                out.faulty.insert(*x);
            }
            Some(_) => {}
            None => {
                log::debug!("multilateration of {x} found no intersection");
                out.ml_unresolved.insert(*x);
            }
        }
    }
    out
}

/// Runs the three tests in order.
pub fn classify(obs: &ObservationSet, params: &ProtocolParams) -> Classification {
    let faulty = direct_symmetry_test(obs, params);
    let (cs, _) = cross_symmetry_test(obs, &faulty, params);
    multilateration_test(obs, &cs, params)
}
