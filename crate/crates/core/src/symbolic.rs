//! Long and short symbolic collision sequences and their richness/poorness
//! classification.
//!
//! A long sequence `b g_1 b g_2 ... g_k b` lists ball-ball collisions `b` and,
//! between consecutive ones, the pair `(g^(1), g^(2))` of group elements
//! transporting each ball's velocity: `v_k(t_{i+1}-) = g_i^(k) v_k(t_i+)`. The
//! element is the product of the side reflections hit in between, later hits
//! on the left. The short sequence merges maximal runs joined by simple pairs
//! (`g^(1) = g^(2)`) into islands `(b, s)`.

use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::dynamics::{EventKind, EventRecord, PhaseState, SingularKind};
use crate::group::{conjugate_axis, GroupElement};
use crate::scalar::Real;
use crate::vec2::Vector2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SymbolicError {
    #[error("segment has {0} ball-ball collisions; at least 2 are needed")]
    TooFewCollisions(usize),
    #[error("a {kind} singularity (event {index}) lies inside the collision window")]
    SingularWindow { kind: SingularKind, index: usize },
    #[error("richness needs at least 3 islands, got {0}")]
    TooShort(usize),
    #[error("junction {junction}: transporting ball {ball} misses the observed velocity by {error:e}")]
    TransportMismatch { junction: usize, ball: u8, error: f64 },
    #[error("cannot parse symbolic sequence: {0}")]
    Parse(String),
}

/// Transport pair `(g^(1), g^(2))` between two consecutive ball-ball collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Junction {
    pub g1: GroupElement,
    pub g2: GroupElement,
}

impl Junction {
    pub fn new(g1: GroupElement, g2: GroupElement) -> Self {
        Junction { g1, g2 }
    }

    pub fn is_simple(&self) -> bool {
        self.g1 == self.g2
    }

    /// `g^(2) (g^(1))^-1`, so that `g^(2) = hat g^(1)`.
    pub fn hat(&self) -> GroupElement {
        self.g2 * self.g1.inverse()
    }

    /// `(g^(2))^-1 g^(1)`, so that `g^(2) bar = g^(1)`.
    pub fn bar(&self) -> GroupElement {
        self.g2.inverse() * self.g1
    }

    /// The same junction traversed backwards in time.
    pub fn reversed(&self) -> Junction {
        Junction::new(self.g1.inverse(), self.g2.inverse())
    }
}

impl fmt::Display for Junction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.g1, self.g2)
    }
}

/// Velocities and positions around one ball-ball collision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionSnapshot<T> {
    pub event_index: usize,
    pub time: T,
    pub q: [Vector2<T>; 2],
    pub v_before: [Vector2<T>; 2],
    pub v_after: [Vector2<T>; 2],
}

/// Long symbolic sequence with the collision data it was read from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongSeq<T> {
    n: u8,
    pub collisions: Vec<CollisionSnapshot<T>>,
    /// `junctions[i]` sits between `collisions[i]` and `collisions[i + 1]`.
    pub junctions: Vec<Junction>,
}

/// Extracts the long sequence of the window between the first and the last
/// ball-ball collision of `events`; `initial` is the state before `events[0]`.
pub fn long_sequence<T: Real>(
    n: u8,
    initial: &PhaseState<T>,
    events: &[EventRecord<T>],
) -> Result<LongSeq<T>, SymbolicError> {
    let bb: Vec<usize> = events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == EventKind::BallBall)
        .map(|(i, _)| i)
        .collect();
    if bb.len() < 2 {
        return Err(SymbolicError::TooFewCollisions(bb.len()));
    }
    let (first, last) = (bb[0], *bb.last().unwrap());
    if let Some(e) = events[first..=last]
        .iter()
        .find(|e| matches!(e.kind, EventKind::Singular(_)))
    {
        let EventKind::Singular(kind) = e.kind else { unreachable!() };
        return Err(SymbolicError::SingularWindow { kind, index: e.index });
    }
    let mut collisions = Vec::with_capacity(bb.len());
    let mut junctions = Vec::with_capacity(bb.len() - 1);
    let id = GroupElement::identity(n);
    let mut acc = [id, id];
    let mut v_prev = if first == 0 {
        [initial.v1, initial.v2]
    } else {
        [events[first - 1].state.v1, events[first - 1].state.v2]
    };
    for e in &events[first..=last] {
        match e.kind {
            EventKind::BallBall => {
                if !collisions.is_empty() {
                    junctions.push(Junction::new(acc[0], acc[1]));
                }
                acc = [id, id];
                collisions.push(CollisionSnapshot {
                    event_index: e.index,
                    time: e.time,
                    q: [e.state.q1, e.state.q2],
                    v_before: v_prev,
                    v_after: [e.state.v1, e.state.v2],
                });
            }
            EventKind::WallHit { ball, reflection, .. } => {
                let k = ball.index();
                acc[k] = reflection * acc[k];
            }
            EventKind::Singular(_) => unreachable!("excluded above"),
        }
        v_prev = [e.state.v1, e.state.v2];
    }
    Ok(LongSeq {
        n,
        collisions,
        junctions,
    })
}

impl<T: Real> LongSeq<T> {
    pub fn order_n(&self) -> u8 {
        self.n
    }

    /// Largest `|g^(k) v_k(t_i+) - v_k(t_{i+1}-)|` over all junctions and balls,
    /// with its location.
    pub fn max_transport_error(&self) -> (f64, Option<(usize, u8)>) {
        let mut worst = (0.0, None);
        for (i, j) in self.junctions.iter().enumerate() {
            for (k, g) in [j.g1, j.g2].into_iter().enumerate() {
                let predicted = g.apply(self.collisions[i].v_after[k]);
                let err = (predicted - self.collisions[i + 1].v_before[k]).norm().as_f64();
                if err > worst.0 {
                    worst = (err, Some((i, k as u8 + 1)));
                }
            }
        }
        worst
    }

    pub fn check_transport(&self, tol: f64) -> Result<(), SymbolicError> {
        match self.max_transport_error() {
            (err, Some((junction, ball))) if err > tol => Err(SymbolicError::TransportMismatch {
                junction,
                ball,
                error: err,
            }),
            _ => Ok(()),
        }
    }

    /// The sequence of the time-reversed segment: collisions in reverse order
    /// with negated, swapped velocities and inverted junction elements.
    pub fn reversed(&self) -> LongSeq<T> {
        let collisions = self
            .collisions
            .iter()
            .rev()
            .map(|c| CollisionSnapshot {
                v_before: [-c.v_after[0], -c.v_after[1]],
                v_after: [-c.v_before[0], -c.v_before[1]],
                ..*c
            })
            .collect();
        LongSeq {
            n: self.n,
            collisions,
            junctions: self.junctions.iter().rev().map(Junction::reversed).collect(),
        }
    }

    /// Sub-sequence of the collisions in `range` and the junctions between them.
    pub fn window(&self, range: Range<usize>) -> LongSeq<T> {
        assert!(range.start < range.end && range.end <= self.collisions.len());
        LongSeq {
            n: self.n,
            collisions: self.collisions[range.clone()].to_vec(),
            junctions: self.junctions[range.start..range.end - 1].to_vec(),
        }
    }

    /// Symbol-only view: every collision an island of its own.
    pub fn symbols(&self) -> ShortSeq {
        ShortSeq {
            n: self.n,
            islands: (0..self.collisions.len())
                .map(|i| Island {
                    collisions: i..i + 1,
                    s: GroupElement::identity(self.n),
                })
                .collect(),
            junctions: self
                .junctions
                .iter()
                .enumerate()
                .map(|(i, j)| ShortJunction {
                    long_index: i,
                    pair: *j,
                })
                .collect(),
        }
    }
}

impl<T> fmt::Display for LongSeq<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("b")?;
        for j in &self.junctions {
            write!(f, " {j} b")?;
        }
        Ok(())
    }
}

/// Maximal run of ball-ball collisions joined by simple junctions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Island {
    /// Indices into the long sequence's collisions.
    pub collisions: Range<usize>,
    /// Product of the joining elements, later ones on the left; identity for
    /// a single collision.
    pub s: GroupElement,
}

impl Island {
    pub fn count(&self) -> usize {
        self.collisions.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ShortJunction {
    /// Position of this junction in the long sequence.
    pub long_index: usize,
    pub pair: Junction,
}

/// Short symbolic sequence `I_0 g_1 I_1 ... g_K I_K` of islands `I` and
/// non-simple junctions. Entry and exit velocities of island `i` are those of
/// the long sequence's collisions `islands[i].collisions.start` and `end - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShortSeq {
    n: u8,
    pub islands: Vec<Island>,
    /// `junctions[i]` sits between `islands[i]` and `islands[i + 1]`.
    pub junctions: Vec<ShortJunction>,
}

pub fn compress_to_short<T: Real>(long: &LongSeq<T>) -> ShortSeq {
    long.symbols().compress()
}

/// Outcome of [`is_rich`]: the first junction of the witnessing pair and the case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Richness {
    No,
    Yes { junction: usize, case: u8 },
}

/// Pattern of a pair of junctions around a middle island with element `s`.
fn rich_case(first: &Junction, s: GroupElement, second: &Junction) -> Option<u8> {
    let (hat, bar) = (first.hat(), second.bar());
    let e = hat.axis()?;
    match bar.axis() {
        Some(e2) if e2 != conjugate_axis(s, e) => Some(1),
        Some(_) => None,
        None => Some(2),
    }
}

impl ShortSeq {
    pub fn order_n(&self) -> u8 {
        self.n
    }

    /// Merges islands joined by simple junctions. Idempotent.
    pub fn compress(&self) -> ShortSeq {
        let mut islands: Vec<Island> = Vec::with_capacity(self.islands.len());
        let mut junctions = Vec::new();
        let mut iter = self.islands.iter();
        let Some(first) = iter.next() else {
            return self.clone();
        };
        let mut current = first.clone();
        for (j, next) in self.junctions.iter().zip(iter) {
            if j.pair.is_simple() {
                current = Island {
                    collisions: current.collisions.start..next.collisions.end,
                    s: next.s * j.pair.g1 * current.s,
                };
            } else {
                islands.push(current);
                junctions.push(*j);
                current = next.clone();
            }
        }
        islands.push(current);
        ShortSeq {
            n: self.n,
            islands,
            junctions,
        }
    }

    /// The time-reversed short sequence: islands and junctions in reverse
    /// order, `s -> s^-1`, junction elements inverted (which swaps hat and bar).
    pub fn reversed(&self) -> ShortSeq {
        let total = self.islands.last().map_or(0, |i| i.collisions.end);
        let long_junctions = total.saturating_sub(1);
        ShortSeq {
            n: self.n,
            islands: self
                .islands
                .iter()
                .rev()
                .map(|i| Island {
                    collisions: total - i.collisions.end..total - i.collisions.start,
                    s: i.s.inverse(),
                })
                .collect(),
            junctions: self
                .junctions
                .iter()
                .rev()
                .map(|j| ShortJunction {
                    long_index: long_junctions - 1 - j.long_index,
                    pair: j.pair.reversed(),
                })
                .collect(),
        }
    }

    /// Parses the compact text form, e.g. `b [R0,e] (b2,s=r1) [R0,r2] b`.
    /// Collision ranges are assigned in order.
    pub fn parse(n: u8, text: &str) -> Result<ShortSeq, SymbolicError> {
        let err = |m: &str| SymbolicError::Parse(format!("{m} in '{text}'"));
        let elem = |t: &str| GroupElement::parse(n, t).ok_or_else(|| err(&format!("bad element '{t}'")));
        let mut islands = Vec::new();
        let mut junctions = Vec::new();
        let mut next_collision = 0;
        for (pos, tok) in text.split_whitespace().enumerate() {
            let expect_island = pos % 2 == 0;
            if expect_island {
                let (count, s) = if tok == "b" {
                    (1, GroupElement::identity(n))
                } else {
                    let inner = tok
                        .strip_prefix("(b")
                        .and_then(|t| t.strip_suffix(')'))
                        .ok_or_else(|| err("expected island"))?;
                    let (c, s) = inner.split_once(",s=").ok_or_else(|| err("expected ',s='"))?;
                    let c: usize = c.parse().map_err(|_| err("bad island count"))?;
                    if c == 0 {
                        return Err(err("empty island"));
                    }
                    (c, elem(s)?)
                };
                islands.push(Island {
                    collisions: next_collision..next_collision + count,
                    s,
                });
                next_collision += count;
            } else {
                let inner = tok
                    .strip_prefix('[')
                    .and_then(|t| t.strip_suffix(']'))
                    .ok_or_else(|| err("expected junction"))?;
                let (a, b) = inner.split_once(',').ok_or_else(|| err("expected ','"))?;
                junctions.push(ShortJunction {
                    long_index: next_collision - 1,
                    pair: Junction::new(elem(a)?, elem(b)?),
                });
            }
        }
        if islands.is_empty() || islands.len() != junctions.len() + 1 {
            return Err(err("must alternate islands and junctions, starting and ending with an island"));
        }
        Ok(ShortSeq {
            n,
            islands,
            junctions,
        })
    }

    pub fn num_collisions(&self) -> usize {
        self.islands.last().map_or(0, |i| i.collisions.end)
    }
}

impl fmt::Display for ShortSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let island = |f: &mut fmt::Formatter<'_>, i: &Island| {
            if i.count() == 1 {
                f.write_str("b")
            } else {
                write!(f, "(b{},s={})", i.count(), i.s)
            }
        };
        for (k, i) in self.islands.iter().enumerate() {
            if k > 0 {
                write!(f, " {} ", self.junctions[k - 1].pair)?;
            }
            island(f, i)?;
        }
        Ok(())
    }
}

/// Scans consecutive junction pairs around each middle island for the two
/// richness patterns. Axis comparisons are exact.
pub fn is_rich(short: &ShortSeq) -> Result<Richness, SymbolicError> {
    if short.islands.len() < 3 {
        return Err(SymbolicError::TooShort(short.islands.len()));
    }
    for i in 0..short.junctions.len() - 1 {
        let s = short.islands[i + 1].s;
        if let Some(case) = rich_case(&short.junctions[i].pair, s, &short.junctions[i + 1].pair) {
            return Ok(Richness::Yes { junction: i, case });
        }
    }
    Ok(Richness::No)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Poorness {
    /// Every junction has `hat g` in the rotation subgroup.
    OPoor,
    /// Every junction pair follows the reflection-return pattern. `witness` is
    /// the reflection whose cylinder the odd islands lift to when the first
    /// collision is lifted to `C_e`.
    RPoor { witness: GroupElement },
    Rich { junction: usize, case: u8 },
    /// Consistent with more than one infinite-orbit class.
    Mixed,
}

pub fn poorness_class<T: Real>(long: &LongSeq<T>) -> Poorness {
    poorness_of(&long.junctions, &compress_to_short(long))
}

/// Classification from the long junction list and its compression.
pub fn poorness_of(long_junctions: &[Junction], short: &ShortSeq) -> Poorness {
    if long_junctions.iter().all(|j| j.hat().is_rotation()) {
        return Poorness::OPoor;
    }
    if let Ok(Richness::Yes { junction, case }) = is_rich(short) {
        return Poorness::Rich { junction, case };
    }
    let pairs = short.junctions.len().saturating_sub(1);
    let reflection_return = (0..pairs).all(|i| {
        let (a, b) = (short.junctions[i].pair, short.junctions[i + 1].pair);
        match (a.hat().axis(), b.bar().axis()) {
            (Some(e), Some(e2)) => e2 == conjugate_axis(short.islands[i + 1].s, e),
            _ => false,
        }
    });
    if pairs > 0 && reflection_return {
        let j = short.junctions[0].pair;
        return Poorness::RPoor {
            witness: j.g1.inverse() * j.g2,
        };
    }
    Poorness::Mixed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{sample_state, simulate, Ball, Budget};
    use crate::polygon::PolygonId;
    use crate::tables::make_table;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn el(n: u8, s: &str) -> GroupElement {
        GroupElement::parse(n, s).unwrap()
    }

    fn rec(index: usize, kind: EventKind) -> EventRecord<f64> {
        let z = Vector2::zero();
        EventRecord {
            index,
            time: index as f64,
            kind,
            state: PhaseState::new(z, z, z, z),
        }
    }

    fn wall(index: usize, ball: Ball, reflection: GroupElement) -> EventRecord<f64> {
        rec(index, EventKind::WallHit { ball, side: 0, reflection })
    }

    #[test]
    fn single_wall_hit_junction() {
        let n = 3;
        let rho = el(n, "R1");
        let z = Vector2::zero();
        let events = vec![
            rec(0, EventKind::BallBall),
            wall(1, Ball::One, rho),
            rec(2, EventKind::BallBall),
        ];
        let long = long_sequence(n, &PhaseState::new(z, z, z, z), &events).unwrap();
        assert_eq!(long.junctions, vec![Junction::new(rho, el(n, "e"))]);
        assert_eq!(long.to_string(), "b [R1,e] b");
    }

    #[test]
    fn later_hits_compose_on_the_left() {
        let n = 4;
        let (a, b) = (el(n, "R0"), el(n, "R1"));
        let z = Vector2::zero();
        let events = vec![
            rec(0, EventKind::BallBall),
            wall(1, Ball::Two, a),
            wall(2, Ball::Two, b),
            rec(3, EventKind::BallBall),
        ];
        let long = long_sequence(n, &PhaseState::new(z, z, z, z), &events).unwrap();
        assert_eq!(long.junctions[0].g2, b * a);
        assert_ne!(b * a, a * b);
    }

    #[test]
    fn window_errors() {
        let z = Vector2::zero();
        let s0 = PhaseState::new(z, z, z, z);
        let one = vec![rec(0, EventKind::BallBall)];
        assert_eq!(long_sequence(2, &s0, &one), Err(SymbolicError::TooFewCollisions(1)));
        let sing = vec![
            rec(0, EventKind::BallBall),
            rec(1, EventKind::Singular(SingularKind::Corner)),
            rec(2, EventKind::BallBall),
        ];
        assert!(matches!(long_sequence(2, &s0, &sing), Err(SymbolicError::SingularWindow { .. })));
    }

    #[test]
    fn hat_and_bar_definitions() {
        let group = crate::group::build_group(PolygonId::Right3060);
        for &g1 in group.elements() {
            for &g2 in group.elements() {
                let j = Junction::new(g1, g2);
                assert_eq!(j.hat() * g1, g2);
                assert_eq!(g2 * j.bar(), g1);
                assert_eq!(j.hat().is_reflection(), j.bar().is_reflection());
                let r = j.reversed();
                assert_eq!(r.hat(), j.bar());
                assert_eq!(r.bar(), j.hat());
            }
        }
    }

    #[test]
    fn compression_examples() {
        let n = 2;
        let long = ShortSeq::parse(n, "b [R0,R0] b").unwrap();
        let short = long.compress();
        assert_eq!(short.to_string(), "(b2,s=R0)");
        assert_eq!(short.islands.len(), 1);

        let long = ShortSeq::parse(n, "b").unwrap();
        assert_eq!(long.compress().islands[0].s, el(n, "e"));

        let long = ShortSeq::parse(n, "b [R0,R0] b [R1,e] b").unwrap();
        let short = long.compress();
        assert_eq!(short.to_string(), "(b2,s=R0) [R1,e] b");
        assert_eq!(short.islands[1].s, el(n, "e"));
    }

    #[test]
    fn island_element_orders_later_on_the_left() {
        let n = 3;
        let long = ShortSeq::parse(n, "b [R0,R0] b [R1,R1] b").unwrap();
        let short = long.compress();
        assert_eq!(short.islands[0].s, el(n, "R1") * el(n, "R0"));
        assert_eq!(short.to_string(), format!("(b3,s={})", el(n, "R1") * el(n, "R0")));
    }

    #[test]
    fn text_round_trip() {
        let text = "b [R0,e] (b2,s=r1) [R0,r2] b";
        let s = ShortSeq::parse(3, text).unwrap();
        assert_eq!(s.to_string(), text);
        assert!(ShortSeq::parse(3, "b [R0,e]").is_err());
        assert!(ShortSeq::parse(3, "b [R7,e] b").is_err());
    }

    #[test]
    fn richness_examples() {
        // square: axis 0 is 0 degrees, axis 1 is 90 degrees
        let case1 = ShortSeq::parse(2, "b [e,R0] b [R1,e] b").unwrap();
        assert_eq!(case1.junctions[0].pair.hat(), el(2, "R0"));
        assert_eq!(case1.junctions[1].pair.bar(), el(2, "R1"));
        assert_eq!(is_rich(&case1), Ok(Richness::Yes { junction: 0, case: 1 }));

        let same_axis = ShortSeq::parse(2, "b [e,R0] b [R0,e] b").unwrap();
        assert_eq!(is_rich(&same_axis), Ok(Richness::No));

        // equilateral: rotation by 120 degrees is r1
        let case2 = ShortSeq::parse(3, "b [e,R0] b [r1,e] b").unwrap();
        assert!(case2.junctions[1].pair.bar().is_rotation());
        assert_eq!(is_rich(&case2), Ok(Richness::Yes { junction: 0, case: 2 }));

        assert_eq!(is_rich(&ShortSeq::parse(3, "b [e,R0] b").unwrap()), Err(SymbolicError::TooShort(2)));
    }

    #[test]
    fn middle_island_element_conjugates_the_axis() {
        // s = R1 maps axis 0 to axis 2 in D3, so bar = R2 is the return pattern
        let n = 3;
        let seq = ShortSeq::parse(n, "b [e,R0] (b2,s=R1) [R2,e] b").unwrap();
        assert_eq!(is_rich(&seq), Ok(Richness::No));
        let seq = ShortSeq::parse(n, "b [e,R0] (b2,s=R1) [R0,e] b").unwrap();
        assert_eq!(is_rich(&seq), Ok(Richness::Yes { junction: 0, case: 1 }));
    }

    #[test]
    fn poorness_examples() {
        let n = 2;
        let all_simple = ShortSeq::parse(n, "b [R0,R0] b [R1,R1] b").unwrap();
        let longj: Vec<Junction> = all_simple.junctions.iter().map(|j| j.pair).collect();
        assert_eq!(poorness_of(&longj, &all_simple.compress()), Poorness::OPoor);

        let r_poor = ShortSeq::parse(n, "b [e,R0] b [R0,e] b [e,R0] b").unwrap();
        let longj: Vec<Junction> = r_poor.junctions.iter().map(|j| j.pair).collect();
        assert_eq!(
            poorness_of(&longj, &r_poor.compress()),
            Poorness::RPoor { witness: el(n, "R0") }
        );

        let rich = ShortSeq::parse(n, "b [e,R0] b [R1,e] b").unwrap();
        let longj: Vec<Junction> = rich.junctions.iter().map(|j| j.pair).collect();
        assert_eq!(poorness_of(&longj, &rich.compress()), Poorness::Rich { junction: 0, case: 1 });

        let lone = ShortSeq::parse(n, "b [e,R0] b").unwrap();
        let longj: Vec<Junction> = lone.junctions.iter().map(|j| j.pair).collect();
        assert_eq!(poorness_of(&longj, &lone.compress()), Poorness::Mixed);
    }

    #[test]
    fn reversal_swaps_hat_and_bar() {
        let s = ShortSeq::parse(3, "b [R0,e] (b2,s=r1) [R0,r2] b").unwrap();
        let r = s.reversed();
        assert_eq!(r.islands[1].s, el(3, "r2"));
        assert_eq!(r.junctions[0].pair.hat(), s.junctions[1].pair.bar());
        assert_eq!(r.junctions[1].pair.bar(), s.junctions[0].pair.hat());
        assert_eq!(r.reversed(), s);
    }

    #[test]
    fn transport_holds_on_random_trajectories() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for p in PolygonId::ALL {
            let t = make_table(p, 0.08).unwrap();
            let s0 = sample_state(&t, &mut rng).unwrap();
            let traj = simulate(&t, s0, Budget::events(1000)).unwrap();
            let long = long_sequence(p.angle_lcm(), &s0, &traj.events).unwrap();
            long.check_transport(1e-10).unwrap();
            long.reversed().check_transport(1e-10).unwrap();
            let short = compress_to_short(&long);
            assert!(short.junctions.iter().all(|j| !j.pair.is_simple()));
            for island in &short.islands {
                if island.count() == 1 {
                    assert!(island.s.is_identity());
                }
            }
            assert_eq!(short.num_collisions(), long.collisions.len());
        }
    }

    fn arb_long(n: u8) -> impl Strategy<Value = ShortSeq> {
        let el = move || (0..2 * n as usize).prop_map(move |i| GroupElement::from_index(n, i));
        // bias toward simple junctions so islands actually form
        let junction = (el(), el(), proptest::bool::weighted(0.4))
            .prop_map(|(a, b, simple)| Junction::new(a, if simple { a } else { b }));
        proptest::collection::vec(junction, 0..40).prop_map(move |js| {
            let text = std::iter::once("b".to_string())
                .chain(js.iter().map(|j| format!("{j} b")))
                .collect::<Vec<_>>()
                .join(" ");
            ShortSeq::parse(n, &text).unwrap()
        })
    }

    proptest! {
        #[test]
        fn compression_is_idempotent(seq in prop_oneof![arb_long(2), arb_long(3), arb_long(4), arb_long(6)]) {
            let once = seq.compress();
            prop_assert_eq!(once.compress(), once.clone());
            prop_assert_eq!(once.num_collisions(), seq.num_collisions());
        }

        #[test]
        fn classification_is_exclusive_and_consistent(seq in prop_oneof![arb_long(2), arb_long(3), arb_long(4), arb_long(6)]) {
            let short = seq.compress();
            let longj: Vec<Junction> = seq.junctions.iter().map(|j| j.pair).collect();
            let class = poorness_of(&longj, &short);
            if let Poorness::Rich { junction, case } = class {
                prop_assert_eq!(is_rich(&short), Ok(Richness::Yes { junction, case }));
            }
            if matches!(is_rich(&short), Ok(Richness::Yes { .. })) && !longj.iter().all(|j| j.hat().is_rotation()) {
                let is_rich_class = matches!(class, Poorness::Rich { .. });
                prop_assert!(is_rich_class);
            }
        }

        #[test]
        fn reversal_is_an_involution(seq in prop_oneof![arb_long(3), arb_long(6)]) {
            let short = seq.compress();
            prop_assert_eq!(short.reversed().reversed(), short.clone());
            prop_assert_eq!(short.reversed().compress(), short.reversed());
        }
    }
}
