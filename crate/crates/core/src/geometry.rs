//! Planar geometry used by the verifier and by attackers.
//!
//! A [`Hyperbola`] here is always a single branch: the set of points `p` with
//! `d(p, focus_a) - d(p, focus_b) = k` for a signed `k`. Both degenerate cases
//! (perpendicular bisector for `k = 0`, ray for `|k| = d(a, b)`) are covered by
//! the same parametrization.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Residual tolerance for intersection points, meters.
pub const INTERSECTION_TOLERANCE: f64 = 1e-4;

/// Upper bound on bisection steps when refining an intersection.
pub const MAX_ROOT_ITERATIONS: usize = 100;

/// Tolerance applied to `|k| <= d(a, b)` before a locus is declared empty.
const LOCUS_SLACK: f64 = 1e-6;

// Parameter window and sampling density for the branch scan in `intersect`.
const SCAN_LIMIT: f64 = 14.0;
const SCAN_STEPS: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("negative time-of-flight interval ({0} s)")]
    NegativeInterval(f64),
    #[error("hyperbola foci coincide")]
    CoincidentFoci,
    #[error("time difference implies {excess} m more than the focal distance")]
    ImpossibleTdoa { excess: f64 },
    #[error("hyperbola locus is empty (|k| exceeds focal distance)")]
    EmptyLocus,
    #[error("multilateration needs at least two hyperbolae, got {0}")]
    TooFewHyperbolae(usize),
    #[error("no pairwise intersection between hyperbolae")]
    NoSolution,
}

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Position) -> f64 {
        distance(*self, *other)
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Position {
        Position::new(self.x + dx, self.y + dy)
    }

    /// Point `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Position, t: f64) -> Position {
        Position::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

pub fn distance(p: Position, q: Position) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Range implied by a one-way transmission, `(t_rx - t_tx) * c`.
pub fn tof_distance(t_tx: f64, t_rx: f64) -> Result<f64, GeometryError> {
    let dt = t_rx - t_tx;
    if dt < 0.0 {
        return Err(GeometryError::NegativeInterval(dt));
    }
    Ok(dt * SPEED_OF_LIGHT)
}

/// Propagation delay over `meters`.
pub fn flight_time(meters: f64) -> f64 {
    meters / SPEED_OF_LIGHT
}

/// One branch of a hyperbola: points with `d(p, focus_a) - d(p, focus_b) = k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperbola {
    pub focus_a: Position,
    pub focus_b: Position,
    pub k: f64,
}

impl Hyperbola {
    pub fn new(focus_a: Position, focus_b: Position, k: f64) -> Result<Self, GeometryError> {
        let focal = distance(focus_a, focus_b);
        if focal == 0.0 {
            return Err(GeometryError::CoincidentFoci);
        }
        if k.abs() > focal + LOCUS_SLACK {
            return Err(GeometryError::EmptyLocus);
        }
        Ok(Self {
            focus_a,
            focus_b,
            k: k.clamp(-focal, focal),
        })
    }

    pub fn focal_distance(&self) -> f64 {
        distance(self.focus_a, self.focus_b)
    }

    /// Signed residual `d(p, a) - d(p, b) - k`.
    pub fn residual(&self, p: Position) -> f64 {
        distance(p, self.focus_a) - distance(p, self.focus_b) - self.k
    }

    pub fn is_bisector(&self) -> bool {
        self.k == 0.0
    }

    pub fn is_ray(&self) -> bool {
        self.k.abs() >= self.focal_distance()
    }

    fn frame(&self) -> Frame {
        let half_focal = self.focal_distance() / 2.0;
        let centre = self.focus_a.lerp(&self.focus_b, 0.5);
        let ux = (self.focus_b.x - self.focus_a.x) / (2.0 * half_focal);
        let uy = (self.focus_b.y - self.focus_a.y) / (2.0 * half_focal);
        let semi_major = (self.k.abs() / 2.0).min(half_focal);
        let semi_minor = (half_focal * half_focal - semi_major * semi_major)
            .max(0.0)
            .sqrt();
        Frame {
            centre,
            ux,
            uy,
            semi_major,
            semi_minor,
            sign: self.k.signum(),
        }
    }
}

/// Local frame of a hyperbola: `u` points from focus a to focus b.
struct Frame {
    centre: Position,
    ux: f64,
    uy: f64,
    semi_major: f64,
    semi_minor: f64,
    sign: f64,
}

impl Frame {
    fn point(&self, t: f64) -> Position {
        let along = self.sign * self.semi_major * t.cosh();
        let across = self.semi_minor * t.sinh();
        Position::new(
            self.centre.x + along * self.ux - across * self.uy,
            self.centre.y + along * self.uy + across * self.ux,
        )
    }

    /// Inverse of `point` for a point on (or near) the branch.
    fn parameter_of(&self, p: Position) -> f64 {
        let dx = p.x - self.centre.x;
        let dy = p.y - self.centre.y;
        let across = -dx * self.uy + dy * self.ux;
        if self.semi_minor > 0.0 {
            (across / self.semi_minor).asinh()
        } else {
            // Ray: recover |t| from the along-axis coordinate.
            let along = (dx * self.ux + dy * self.uy) * self.sign;
            (along / self.semi_major).max(1.0).acosh()
        }
    }
}

/// Hyperbola with foci `a`, `b` through `p`.
pub fn hyperbola_through_point(
    a: Position,
    b: Position,
    p: Position,
) -> Result<Hyperbola, GeometryError> {
    if distance(a, b) == 0.0 {
        return Err(GeometryError::CoincidentFoci);
    }
    let k = distance(p, a) - distance(p, b);
    Ok(Hyperbola {
        focus_a: a,
        focus_b: b,
        k,
    })
}

/// Locus of emitters whose signal reached `a` `tdoa` seconds after it reached `b`.
pub fn hyperbola_from_tdoa(
    a: Position,
    b: Position,
    tdoa: f64,
) -> Result<Hyperbola, GeometryError> {
    let focal = distance(a, b);
    if focal == 0.0 {
        return Err(GeometryError::CoincidentFoci);
    }
    let k = tdoa * SPEED_OF_LIGHT;
    if k.abs() > focal + LOCUS_SLACK {
        return Err(GeometryError::ImpossibleTdoa {
            excess: k.abs() - focal,
        });
    }
    Ok(Hyperbola {
        focus_a: a,
        focus_b: b,
        k: k.clamp(-focal, focal),
    })
}

/// Point on the branch at parameter `param`; `param = 0` is the vertex.
pub fn sample_point(h: &Hyperbola, param: f64) -> Result<Position, GeometryError> {
    let focal = h.focal_distance();
    if focal == 0.0 {
        return Err(GeometryError::CoincidentFoci);
    }
    if h.k.abs() > focal + LOCUS_SLACK {
        return Err(GeometryError::EmptyLocus);
    }
    Ok(h.frame().point(param))
}

/// Parameter of `p` under [`sample_point`]. For rays the non-negative root is returned.
pub fn parameter_of(h: &Hyperbola, p: Position) -> f64 {
    h.frame().parameter_of(p)
}

/// Intersection points of two branches, found by scanning `h1`'s parameter
/// and bisecting on sign changes of `h2`'s residual.
pub fn intersect(h1: &Hyperbola, h2: &Hyperbola) -> Vec<Position> {
    if h1.focal_distance() == 0.0 || h2.focal_distance() == 0.0 {
        return Vec::new();
    }
    let frame = h1.frame();
    let f = |t: f64| h2.residual(frame.point(t));
    let lower = if h1.is_ray() { 0.0 } else { -SCAN_LIMIT };
    let step = (SCAN_LIMIT - lower) / SCAN_STEPS as f64;

    let mut roots: Vec<Position> = Vec::new();
    let mut t_prev = lower;
    let mut f_prev = f(t_prev);
    for i in 1..=SCAN_STEPS {
        let t = lower + step * i as f64;
        let ft = f(t);
        if f_prev == 0.0 {
            push_unique(&mut roots, frame.point(t_prev));
        } else if f_prev.signum() != ft.signum() && ft != 0.0 {
            let root = bisect(&f, t_prev, t, f_prev);
            let p = frame.point(root);
            if h2.residual(p).abs() <= INTERSECTION_TOLERANCE
                && h1.residual(p).abs() <= INTERSECTION_TOLERANCE
            {
                push_unique(&mut roots, p);
            }
        }
        t_prev = t;
        f_prev = ft;
    }
    if f_prev == 0.0 {
        push_unique(&mut roots, frame.point(t_prev));
    }
    roots
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..MAX_ROOT_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 || (hi - lo) < 1e-15 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn push_unique(points: &mut Vec<Position>, p: Position) {
    if points
        .iter()
        .all(|q| distance(*q, p) > 10.0 * INTERSECTION_TOLERANCE)
    {
        points.push(p);
    }
}

/// Least-squares emitter estimate from a set of hyperbolae.
///
/// Every pair contributes its intersection candidates. From a starting point,
/// each pair keeps the candidate nearest the running estimate and the
/// estimate moves to the mean of the kept points, until the selection stops
/// changing. Every candidate and the centroid of all candidates serve as
/// starting points; the fixed point whose kept points are tightest wins.
pub fn multilaterate(hyperbolae: &[Hyperbola]) -> Result<Position, GeometryError> {
    if hyperbolae.len() < 2 {
        return Err(GeometryError::TooFewHyperbolae(hyperbolae.len()));
    }
    let mut per_pair: Vec<Vec<Position>> = Vec::new();
    for (i, h1) in hyperbolae.iter().enumerate() {
        for h2 in &hyperbolae[i + 1..] {
            let points = intersect(h1, h2);
            if !points.is_empty() {
                per_pair.push(points);
            }
        }
    }
    if per_pair.is_empty() {
        return Err(GeometryError::NoSolution);
    }
    let starts = std::iter::once(centroid(per_pair.iter().flatten().copied()))
        .chain(per_pair.iter().flatten().copied());
    let mut best: Option<(f64, Position)> = None;
    for start in starts {
        let (spread, estimate) = settle(&per_pair, start);
        if best.is_none_or(|(b, _)| spread < b) {
            best = Some((spread, estimate));
        }
    }
    Ok(best.expect("at least one start").1)
}

/// Fixed point of the nearest-candidate selection from `start`, with the sum
/// of squared distances of the kept points to it.
fn settle(per_pair: &[Vec<Position>], start: Position) -> (f64, Position) {
    let mut estimate = start;
    let mut selection: Vec<usize> = vec![usize::MAX; per_pair.len()];
    for _ in 0..32 {
        let next: Vec<usize> = per_pair
            .iter()
            .map(|c| nearest_index(c, estimate))
            .collect();
        estimate = centroid(per_pair.iter().zip(&next).map(|(c, &i)| c[i]));
        if next == selection {
            break;
        }
        selection = next;
    }
    let spread = per_pair
        .iter()
        .zip(&selection)
        .map(|(c, &i)| distance(c[i], estimate).powi(2))
        .sum();
    (spread, estimate)
}

fn nearest_index(points: &[Position], target: Position) -> usize {
    points
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| distance(**a, target).total_cmp(&distance(**b, target)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn centroid(points: impl Iterator<Item = Position>) -> Position {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for p in points {
        sx += p.x;
        sy += p.y;
        n += 1;
    }
    if n == 0 {
        return Position::default();
    }
    Position::new(sx / n as f64, sy / n as f64)
}
