//! Mobility traces: the text format and synthetic generators.

use crate::geometry::Position;
use crate::protocol::NodeId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::sync::Arc;
use thiserror::Error;

pub const TRACE_MAGIC: &str = "snpd-trace";
pub const TRACE_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: time {time} is not after {previous}")]
    NonMonotone {
        line: usize,
        time: f64,
        previous: f64,
    },
    #[error("line {line}: node {id} outside the declared id space 0..{count}")]
    UnknownNode { line: usize, id: u32, count: u32 },
    #[error("line {line}: node {id} listed twice at the same time or out of order")]
    Unordered { line: usize, id: u32 },
    #[error("invalid synthetic trace spec: {0}")]
    InvalidSpec(String),
}

/// Positions of all nodes present at one instant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub positions: BTreeMap<NodeId, Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityTrace {
    pub step: f64,
    pub node_count: u32,
    pub snapshots: Vec<Snapshot>,
}

impl MobilityTrace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "{TRACE_MAGIC} {TRACE_VERSION} {} {}",
            self.step, self.node_count
        )?;
        for snap in &self.snapshots {
            for (id, p) in &snap.positions {
                writeln!(out, "{} {} {:.3} {:.3}", snap.time, id.0, p.x, p.y)?;
            }
        }
        Ok(())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(
    tok: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, TraceError> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what}")))
}

/// Parse a trace. Lines must be sorted by time, then node id.
pub fn load_trace<R: BufRead>(source: R) -> Result<MobilityTrace, TraceError> {
    let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty trace"))?;
    let header = header?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some(TRACE_MAGIC) || tok.next() != Some(TRACE_VERSION) {
        return Err(parse_err(
            1,
            format!("expected header `{TRACE_MAGIC} {TRACE_VERSION} <step> <count>`"),
        ));
    }
    let step: f64 = field(tok.next(), 1, "step")?;
    let node_count: u32 = field(tok.next(), 1, "node count")?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(parse_err(1, "step must be positive"));
    }
    let mut snapshots: Vec<Snapshot> = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut tok = body.split_whitespace();
        let t: f64 = field(tok.next(), n, "time")?;
        let id: u32 = field(tok.next(), n, "node id")?;
        let x: f64 = field(tok.next(), n, "x")?;
        let y: f64 = field(tok.next(), n, "y")?;
        if tok.next().is_some() {
            return Err(parse_err(n, "trailing fields"));
        }
        if !(t.is_finite() && x.is_finite() && y.is_finite()) {
            return Err(parse_err(n, "non-finite value"));
        }
        if id >= node_count {
            return Err(TraceError::UnknownNode {
                line: n,
                id,
                count: node_count,
            });
        }
        match snapshots.last_mut() {
            Some(s) if s.time == t => {
                if s.positions
                    .keys()
                    .next_back()
                    .is_some_and(|last| last.0 >= id)
                {
                    return Err(TraceError::Unordered { line: n, id });
                }
                s.positions.insert(NodeId(id), Position::new(x, y));
            }
            Some(s) if s.time > t => {
                return Err(TraceError::NonMonotone {
                    line: n,
                    time: t,
                    previous: s.time,
                })
            }
            _ => snapshots.push(Snapshot {
                time: t,
                positions: BTreeMap::from([(NodeId(id), Position::new(x, y))]),
            }),
        }
    }
    Ok(MobilityTrace {
        step,
        node_count,
        snapshots,
    })
}

pub fn parse_trace(text: &str) -> Result<MobilityTrace, TraceError> {
    load_trace(text.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityModel {
    GridRoads,
    RandomWaypoint,
    Static,
}

/// Parameters of a synthetic trace. Lengths in meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub model: MobilityModel,
    pub nodes: u32,
    pub width: f64,
    pub height: f64,
    pub duration: f64,
    pub step: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Distance between parallel roads in the grid-roads model.
    pub road_spacing: f64,
    /// Vehicles per platoon in the grid-roads model.
    pub platoon_size: u32,
    /// Bumper-to-bumper distance inside a platoon.
    pub platoon_gap: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            model: MobilityModel::GridRoads,
            nodes: 300,
            width: 5000.0,
            height: 5000.0,
            duration: 60.0,
            step: 1.0,
            speed_min: 5.0,
            speed_max: 15.0,
            road_spacing: 500.0,
            platoon_size: 1,
            platoon_gap: 15.0,
            seed: 1,
        }
    }
}

impl SynthSpec {
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::InvalidSpec(m.to_string()));
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad("width and height must be positive");
        }
        if !(self.step > 0.0 && self.duration >= 0.0) {
            return bad("step must be positive and duration non-negative");
        }
        if !(self.speed_min >= 0.0 && self.speed_max >= self.speed_min) {
            return bad("need 0 <= speed_min <= speed_max");
        }
        if self.model == MobilityModel::GridRoads {
            if !(self.road_spacing > 0.0 && self.road_spacing <= self.width.min(self.height)) {
                return bad("road_spacing must be positive and fit the area");
            }
            if self.platoon_size == 0 || !(self.platoon_gap > 0.0) {
                return bad("platoon_size and platoon_gap must be positive");
            }
        }
        Ok(())
    }

    pub fn snapshot_count(&self) -> usize {
        (self.duration / self.step).floor() as usize + 1
    }
}

/// Deterministic synthetic trace for `spec`.
pub fn synth_trace(spec: &SynthSpec) -> Result<MobilityTrace, TraceError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let frames: Vec<Vec<Position>> = match spec.model {
        MobilityModel::Static => {
            let ps: Vec<Position> = (0..spec.nodes)
                .map(|_| {
                    Position::new(
                        rng.gen_range(0.0..=spec.width),
                        rng.gen_range(0.0..=spec.height),
                    )
                })
                .collect();
            vec![ps; spec.snapshot_count()]
        }
        MobilityModel::RandomWaypoint => random_waypoint(spec, &mut rng),
        MobilityModel::GridRoads => grid_roads(spec, &mut rng),
    };
    let snapshots = frames
        .into_iter()
        .enumerate()
        .map(|(i, ps)| Snapshot {
            time: i as f64 * spec.step,
            positions: ps
                .into_iter()
                .enumerate()
                .map(|(n, p)| (NodeId(n as u32), p))
                .collect(),
        })
        .collect();
    Ok(MobilityTrace {
        step: spec.step,
        node_count: spec.nodes,
        snapshots,
    })
}

fn random_waypoint(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<Position>> {
    let point = |rng: &mut ChaCha8Rng| {
        Position::new(
            rng.gen_range(0.0..=spec.width),
            rng.gen_range(0.0..=spec.height),
        )
    };
    let mut state: Vec<(Position, Position, f64)> = (0..spec.nodes)
        .map(|_| {
            (
                point(rng),
                point(rng),
                rng.gen_range(spec.speed_min..=spec.speed_max),
            )
        })
        .collect();
    let mut frames = Vec::with_capacity(spec.snapshot_count());
    for _ in 0..spec.snapshot_count() {
        frames.push(state.iter().map(|s| s.0).collect());
        for (pos, target, speed) in state.iter_mut() {
            let mut left = *speed * spec.step;
            while left > 0.0 {
                let d = pos.distance(target);
                if d > left {
                    *pos = pos.lerp(target, left / d);
                    break;
                }
                left -= d;
                *pos = *target;
                *target = point(rng);
                *speed = rng.gen_range(spec.speed_min..=spec.speed_max);
                if *speed == 0.0 {
                    break;
                }
            }
        }
    }
    frames
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Horizontal,
    Vertical,
}

/// A vehicle on the road grid. Members of a platoon share one decision
/// sequence, so each follows the leader's path with a lag.
#[derive(Debug, Clone)]
struct Vehicle {
    axis: Axis,
    /// Index of the road along `axis`.
    road: usize,
    /// Coordinate along the road.
    s: f64,
    dir: f64,
    speed: f64,
    decisions: Arc<Vec<u8>>,
    next: usize,
}

struct Grid {
    spacing: f64,
    width: f64,
    height: f64,
}

impl Grid {
    fn length(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Horizontal => self.width,
            Axis::Vertical => self.height,
        }
    }

    fn roads(&self, axis: Axis) -> usize {
        // Horizontal roads are spread over the height and vice versa.
        let span = match axis {
            Axis::Horizontal => self.height,
            Axis::Vertical => self.width,
        };
        (span / self.spacing).floor() as usize + 1
    }

    fn position(&self, v: &Vehicle) -> Position {
        let offset = v.road as f64 * self.spacing;
        match v.axis {
            Axis::Horizontal => Position::new(v.s, offset),
            Axis::Vertical => Position::new(offset, v.s),
        }
    }

    /// Next intersection coordinate strictly ahead of `s` in direction `dir`,
    /// or the road end.
    fn next_stop(&self, axis: Axis, s: f64, dir: f64) -> f64 {
        let k = s / self.spacing;
        let cand = if dir > 0.0 {
            (k.floor() + 1.0) * self.spacing
        } else {
            (k.ceil() - 1.0) * self.spacing
        };
        cand.clamp(0.0, self.length(axis))
    }

    fn advance(&self, v: &mut Vehicle, mut left: f64) {
        let mut guard = 0;
        while left > 0.0 && guard < 10_000 {
            guard += 1;
            let stop = self.next_stop(v.axis, v.s, v.dir);
            let d = (stop - v.s).abs();
            if d > left || d == 0.0 && left == 0.0 {
                v.s += v.dir * left;
                return;
            }
            left -= d;
            v.s = stop;
            self.decide(v);
        }
    }

    /// At an intersection or road end: straight, left or right.
    fn decide(&self, v: &mut Vehicle) {
        let choice = v.decisions[v.next % v.decisions.len()];
        v.next += 1;
        let at_end = v.s <= 0.0 || v.s >= self.length(v.axis);
        let q = (v.s / self.spacing).round();
        let on_grid =
            (v.s - q * self.spacing).abs() < 1e-6 && (q as usize) < self.roads(other(v.axis));
        if choice == 0 && !at_end || !on_grid {
            if at_end {
                v.dir = -v.dir;
            }
            return;
        }
        let cross_road = (v.s / self.spacing).round() as usize;
        let along = v.road as f64 * self.spacing;
        let new_axis = other(v.axis);
        let mut dir = if choice == 1 { 1.0 } else { -1.0 };
        if along <= 0.0 {
            dir = 1.0;
        } else if along >= self.length(new_axis) {
            dir = -1.0;
        }
        v.axis = new_axis;
        v.road = cross_road;
        v.s = along;
        v.dir = dir;
    }
}

fn other(axis: Axis) -> Axis {
    match axis {
        Axis::Horizontal => Axis::Vertical,
        Axis::Vertical => Axis::Horizontal,
    }
}

fn grid_roads(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<Position>> {
    let grid = Grid {
        spacing: spec.road_spacing,
        width: spec.width,
        height: spec.height,
    };
    let mut vehicles: Vec<Vehicle> = Vec::with_capacity(spec.nodes as usize);
    while vehicles.len() < spec.nodes as usize {
        let axis = if rng.gen_bool(0.5) {
            Axis::Horizontal
        } else {
            Axis::Vertical
        };
        let road = rng.gen_range(0..grid.roads(axis));
        let s = rng.gen_range(0.0..=grid.length(axis));
        let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let speed = rng.gen_range(spec.speed_min..=spec.speed_max);
        let decisions: Vec<u8> = (0..1024).map(|_| rng.gen_range(0..3)).collect();
        let members = (spec.platoon_size as usize).min(spec.nodes as usize - vehicles.len());
        for k in 0..members {
            let lag = k as f64 * spec.platoon_gap;
            let s_k = (s - dir * lag).clamp(0.0, grid.length(axis));
            // Intersections between this member and the leader are passed straight.
            let skipped =
                ((s / grid.spacing).floor() - (s_k / grid.spacing).floor()).abs() as usize;
            let mut seq = vec![0u8; skipped];
            seq.extend_from_slice(&decisions);
            vehicles.push(Vehicle {
                axis,
                road,
                s: s_k,
                dir,
                speed,
                decisions: Arc::new(seq),
                next: 0,
            });
        }
    }
    let mut frames = Vec::with_capacity(spec.snapshot_count());
    for _ in 0..spec.snapshot_count() {
        frames.push(vehicles.iter().map(|v| grid.position(v)).collect());
        for v in vehicles.iter_mut() {
            grid.advance(v, v.speed * spec.step);
        }
    }
    frames
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_two_snapshots() {
        let t = parse_trace("snpd-trace v1 1 2\n0 0 0 0\n0 1 10 0\n1 0 1 0\n1 1 11 0\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(
            t.snapshots[1].positions[&NodeId(1)],
            Position::new(11.0, 0.0)
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            parse_trace("snpd-trace v1 1 2\n1 0 0 0\n0 1 0 0\n"),
            Err(TraceError::NonMonotone { line: 3, .. })
        ));
        assert!(matches!(
            parse_trace("snpd-trace v1 1 2\n0 1 0 0\n0 0 0 0\n"),
            Err(TraceError::Unordered { .. })
        ));
        assert!(matches!(
            parse_trace("snpd-trace v1 1 2\n0 5 0 0\n"),
            Err(TraceError::UnknownNode { .. })
        ));
        assert!(matches!(
            parse_trace("snpd-trace v1 1 2\n0 0 zero 0\n"),
            Err(TraceError::Parse { line: 2, .. })
        ));
        assert!(parse_trace("trace 1 2\n").is_err());
        assert!(parse_trace("").is_err());
    }

    #[test]
    fn write_then_load_round_trips() {
        let spec = SynthSpec {
            nodes: 20,
            duration: 5.0,
            ..Default::default()
        };
        let t = synth_trace(&spec).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = load_trace(buf.as_slice()).unwrap();
        assert_eq!(back.len(), t.len());
        for (a, b) in t.snapshots.iter().zip(&back.snapshots) {
            for (id, p) in &a.positions {
                assert!(p.distance(&b.positions[id]) < 1e-3);
            }
        }
    }

    #[test]
    fn static_snapshots_are_identical() {
        let t = synth_trace(&SynthSpec {
            model: MobilityModel::Static,
            nodes: 10,
            ..Default::default()
        })
        .unwrap();
        assert!(t
            .snapshots
            .windows(2)
            .all(|w| w[0].positions == w[1].positions));
    }

    #[test]
    fn same_seed_same_trace() {
        for model in [MobilityModel::GridRoads, MobilityModel::RandomWaypoint] {
            let spec = SynthSpec {
                model,
                nodes: 50,
                duration: 30.0,
                platoon_size: 3,
                ..Default::default()
            };
            assert_eq!(synth_trace(&spec).unwrap(), synth_trace(&spec).unwrap());
            let other = SynthSpec {
                seed: 2,
                ..spec.clone()
            };
            assert_ne!(synth_trace(&spec).unwrap(), synth_trace(&other).unwrap());
        }
    }

    #[test]
    fn vehicles_stay_on_roads_and_in_area() {
        let spec = SynthSpec {
            nodes: 100,
            duration: 600.0,
            platoon_size: 4,
            ..Default::default()
        };
        let t = synth_trace(&spec).unwrap();
        for snap in &t.snapshots {
            for p in snap.positions.values() {
                assert!(
                    (0.0..=spec.width).contains(&p.x) && (0.0..=spec.height).contains(&p.y),
                    "{p}"
                );
                let on =
                    |c: f64| ((c / spec.road_spacing).round() * spec.road_spacing - c).abs() < 1e-6;
                assert!(on(p.x) || on(p.y), "{p} off road");
            }
        }
    }

    #[test]
    fn vehicles_move_at_their_speed() {
        let spec = SynthSpec {
            nodes: 30,
            duration: 100.0,
            speed_min: 10.0,
            speed_max: 10.0,
            ..Default::default()
        };
        let t = synth_trace(&spec).unwrap();
        for w in t.snapshots.windows(2) {
            for (id, p) in &w[0].positions {
                // Manhattan displacement never exceeds path length.
                let q = w[1].positions[id];
                assert!((p.x - q.x).abs() + (p.y - q.y).abs() <= 10.0 + 1e-6);
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(synth_trace(&SynthSpec {
            width: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(synth_trace(&SynthSpec {
            speed_min: 5.0,
            speed_max: 1.0,
            ..Default::default()
        })
        .is_err());
        assert!(synth_trace(&SynthSpec {
            platoon_size: 0,
            ..Default::default()
        })
        .is_err());
    }
}
