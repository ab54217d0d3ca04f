//! Event-driven flow of two equal disks in an eroded polygon.
//!
//! Between events both centers move uniformly. Events are wall hits of either
//! center on a side of `P_r`, ball-ball contacts at distance `R`, and singular
//! events (corner hits, tangential contacts, simultaneous events) at which the
//! flow is undefined and the run halts.

use std::fmt;
use std::io::{self, Write};

use rand::RngExt;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::group::{ElementKind, GroupElement};
use crate::scalar::Real;
use crate::tables::Table;
use crate::vec2::Vector2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("both velocities vanish; no event ever occurs")]
    NoEvent,
    #[error("balls are not in contact: |q1 - q2| = {distance}, R = {contact}")]
    NotInContact { distance: f64, contact: f64 },
    #[error("balls are not approaching: (v1 - v2).(q1 - q2) = {0}")]
    NotApproaching(f64),
    #[error("ball {ball} is not on side {side} (distance {distance})")]
    NotOnSide { ball: Ball, side: usize, distance: f64 },
    #[error("ball {ball} is not moving out through side {side}")]
    NotOutgoing { ball: Ball, side: usize },
    #[error("state violates the phase-space constraints: {0}")]
    InvalidState(String),
    #[error("configuration sampling acceptance below 1e-6 (estimated {acceptance:e})")]
    RejectionOverflow { acceptance: f64 },
    #[error("trajectory halted at a {0} singularity")]
    Halted(SingularKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Ball {
    One,
    Two,
}

impl Ball {
    pub const BOTH: [Ball; 2] = [Ball::One, Ball::Two];

    pub fn index(self) -> usize {
        match self {
            Ball::One => 0,
            Ball::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularKind {
    Corner,
    Tangential,
    Simultaneous,
}

impl fmt::Display for SingularKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SingularKind::Corner => "corner",
            SingularKind::Tangential => "tangential",
            SingularKind::Simultaneous => "simultaneous",
        })
    }
}

/// Phase point: centers, velocities and the flow time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseState<T> {
    pub q1: Vector2<T>,
    pub q2: Vector2<T>,
    pub v1: Vector2<T>,
    pub v2: Vector2<T>,
    pub t: T,
}

impl<T: Real> PhaseState<T> {
    pub fn new(q1: Vector2<T>, q2: Vector2<T>, v1: Vector2<T>, v2: Vector2<T>) -> Self {
        PhaseState {
            q1,
            q2,
            v1,
            v2,
            t: T::zero(),
        }
    }

    pub fn q(&self, ball: Ball) -> Vector2<T> {
        match ball {
            Ball::One => self.q1,
            Ball::Two => self.q2,
        }
    }

    pub fn v(&self, ball: Ball) -> Vector2<T> {
        match ball {
            Ball::One => self.v1,
            Ball::Two => self.v2,
        }
    }

    pub fn q_mut(&mut self, ball: Ball) -> &mut Vector2<T> {
        match ball {
            Ball::One => &mut self.q1,
            Ball::Two => &mut self.q2,
        }
    }

    pub fn v_mut(&mut self, ball: Ball) -> &mut Vector2<T> {
        match ball {
            Ball::One => &mut self.v1,
            Ball::Two => &mut self.v2,
        }
    }

    /// Twice the kinetic energy, `|v1|^2 + |v2|^2`.
    pub fn energy(&self) -> T {
        self.v1.norm_sq() + self.v2.norm_sq()
    }

    /// Free flight for time `dt`.
    pub fn flown(&self, dt: T) -> Self {
        PhaseState {
            q1: self.q1 + self.v1 * dt,
            q2: self.q2 + self.v2 * dt,
            v1: self.v1,
            v2: self.v2,
            t: self.t + dt,
        }
    }

    /// Same positions, negated velocities.
    pub fn reversed(&self) -> Self {
        PhaseState {
            v1: -self.v1,
            v2: -self.v2,
            ..*self
        }
    }

    /// Position and velocity as a point of `R^8`.
    pub fn to_array(&self) -> [T; 8] {
        [
            self.q1.x, self.q1.y, self.q2.x, self.q2.y, self.v1.x, self.v1.y, self.v2.x, self.v2.y,
        ]
    }

    pub fn cast<U: Real>(&self) -> PhaseState<U> {
        PhaseState {
            q1: self.q1.cast(),
            q2: self.q2.cast(),
            v1: self.v1.cast(),
            v2: self.v2.cast(),
            t: U::lit(self.t.as_f64()),
        }
    }

    /// Checks the configuration constraints (not the energy shell).
    pub fn check_constraints(&self, table: &Table<T>) -> Result<(), DynamicsError> {
        let tol = T::constraint_tol();
        for ball in Ball::BOTH {
            for (j, side) in table.sides().iter().enumerate() {
                let d = side.distance(self.q(ball));
                if d < -tol {
                    return Err(DynamicsError::InvalidState(format!(
                        "ball {ball} is {:e} outside side {j}",
                        -d.as_f64()
                    )));
                }
            }
        }
        let contact = table.contact_distance();
        let d = (self.q1 - self.q2).norm();
        if d < contact - tol * contact.max(T::one()) {
            return Err(DynamicsError::InvalidState(format!(
                "balls overlap: |q1 - q2| = {d}, R = {contact}"
            )));
        }
        Ok(())
    }

    /// Checks constraints and the unit-energy shell.
    pub fn validate(&self, table: &Table<T>) -> Result<(), DynamicsError> {
        self.check_constraints(table)?;
        let e = self.energy();
        if !e.is_finite() || (e - T::one()).abs() > T::lit(1e3) * T::epsilon() {
            return Err(DynamicsError::InvalidState(format!("energy {e} is off the unit shell")));
        }
        Ok(())
    }
}

/// What happens at the end of the current free flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PendingEvent {
    Wall { ball: Ball, side: usize },
    BallBall,
    Singular(SingularKind),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NextEvent<T> {
    pub dt: T,
    pub event: PendingEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EventKind {
    WallHit {
        ball: Ball,
        side: usize,
        reflection: GroupElement,
    },
    BallBall,
    Singular(SingularKind),
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::WallHit { .. } => "wall",
            EventKind::BallBall => "ball-ball",
            EventKind::Singular(SingularKind::Corner) => "corner",
            EventKind::Singular(SingularKind::Tangential) => "tangential",
            EventKind::Singular(SingularKind::Simultaneous) => "simultaneous",
        }
    }
}

/// One event with the post-event state. For singular events the state is the
/// phase point at which the flow stops (velocities not updated).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord<T> {
    pub index: usize,
    pub time: T,
    pub kind: EventKind,
    pub state: PhaseState<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate<T> {
    dt: T,
    event: PendingEvent,
}

/// Earliest ball-ball contact time if the centers approach and reach distance `R`,
/// with the relative normal speed at contact.
fn ball_ball_time<T: Real>(s: &PhaseState<T>, contact: T) -> Option<(T, T)> {
    if contact <= T::zero() {
        // point particles meet only on a measure-zero set of lines
        return None;
    }
    let dq = s.q1 - s.q2;
    let dv = s.v1 - s.v2;
    let b = dq.dot(dv);
    if b >= T::zero() {
        return None;
    }
    let a = dv.norm_sq();
    let c = (dq.norm_sq() - contact * contact).max(T::zero());
    let disc = b * b - a * c;
    if disc < T::zero() {
        return None;
    }
    let root = disc.sqrt();
    // smaller root of a t^2 + 2 b t + c in cancellation-free form
    let t = c / (root - b);
    Some((t, root / contact))
}

/// Minimal positive event time, or a singular event if the minimum is degenerate.
pub fn next_event<T: Real>(table: &Table<T>, s: &PhaseState<T>) -> Result<NextEvent<T>, DynamicsError> {
    if s.v1.norm_sq() == T::zero() && s.v2.norm_sq() == T::zero() {
        return Err(DynamicsError::NoEvent);
    }
    let mut best: Option<Candidate<T>> = None;
    let mut second: Option<T> = None;
    let mut consider = |c: Candidate<T>| match best {
        None => best = Some(c),
        Some(b) if c.dt < b.dt => {
            second = Some(b.dt);
            best = Some(c);
        }
        Some(_) => {
            if second.is_none_or(|s2| c.dt < s2) {
                second = Some(c.dt);
            }
        }
    };
    for ball in Ball::BOTH {
        let (q, v) = (s.q(ball), s.v(ball));
        for (j, side) in table.sides().iter().enumerate() {
            let closing = -side.normal.dot(v);
            if closing > T::zero() {
                let h = side.distance(q).max(T::zero());
                consider(Candidate {
                    dt: h / closing,
                    event: PendingEvent::Wall { ball, side: j },
                });
            }
        }
    }
    let mut tangential_contact = false;
    if let Some((dt, normal_speed)) = ball_ball_time(s, table.contact_distance()) {
        tangential_contact = normal_speed < T::contact_tol();
        consider(Candidate {
            dt,
            event: PendingEvent::BallBall,
        });
    }
    let best = best.ok_or(DynamicsError::NoEvent)?;
    let singular = |kind| {
        Ok(NextEvent {
            dt: best.dt,
            event: PendingEvent::Singular(kind),
        })
    };
    match best.event {
        PendingEvent::Wall { ball, side } => {
            let hit = s.q(ball) + s.v(ball) * best.dt;
            let near_vertex = table
                .eroded_vertices()
                .iter()
                .any(|v| (*v - hit).norm() < T::contact_tol());
            if near_vertex {
                return singular(SingularKind::Corner);
            }
            let v = s.v(ball);
            if table.sides()[side].normal.dot(v).abs() < T::contact_tol() * v.norm().max(T::one()) {
                return singular(SingularKind::Tangential);
            }
        }
        PendingEvent::BallBall if tangential_contact => return singular(SingularKind::Tangential),
        _ => {}
    }
    if second.is_some_and(|t2| t2 - best.dt < T::event_tie_tol()) {
        return singular(SingularKind::Simultaneous);
    }
    Ok(NextEvent {
        dt: best.dt,
        event: best.event,
    })
}

/// Elastic equal-mass collision: exchange of the velocity components along the line of centers.
pub fn collide_balls<T: Real>(table: &Table<T>, s: &PhaseState<T>) -> Result<PhaseState<T>, DynamicsError> {
    let contact = table.contact_distance();
    let dq = s.q1 - s.q2;
    let dist = dq.norm();
    if (dist - contact).abs() > T::contact_tol() * contact.max(T::one()) {
        return Err(DynamicsError::NotInContact {
            distance: dist.as_f64(),
            contact: contact.as_f64(),
        });
    }
    let closing = (s.v1 - s.v2).dot(dq);
    if closing >= T::zero() {
        return Err(DynamicsError::NotApproaching(closing.as_f64()));
    }
    // projecting on dq / |dq|^2 conserves energy exactly in exact arithmetic
    // whatever the rounding of |dq|
    let impulse = dq * (closing / dq.norm_sq());
    let mut out = *s;
    out.v1 = s.v1 - impulse;
    out.v2 = s.v2 + impulse;
    let u = dq / dist;
    // put the centers back at exact contact distance about their midpoint
    let mid = (s.q1 + s.q2) * T::half();
    out.q1 = mid + u * (contact * T::half());
    out.q2 = mid - u * (contact * T::half());
    Ok(out)
}

/// Specular reflection of one ball off a side of the eroded polygon.
pub fn reflect_wall<T: Real>(
    table: &Table<T>,
    s: &PhaseState<T>,
    ball: Ball,
    side: usize,
) -> Result<PhaseState<T>, DynamicsError> {
    let sd = &table.sides()[side];
    let q = s.q(ball);
    let d = sd.distance(q);
    if d.abs() > T::contact_tol() {
        return Err(DynamicsError::NotOnSide {
            ball,
            side,
            distance: d.as_f64(),
        });
    }
    let v = s.v(ball);
    let vn = sd.normal.dot(v);
    if vn >= T::zero() {
        return Err(DynamicsError::NotOutgoing { ball, side });
    }
    let reflected = sd.reflection.apply_compensated(v);
    debug_assert!(
        (reflected - (v - sd.normal * (T::two() * vn))).norm() < T::lit(1e3) * T::epsilon(),
        "side element disagrees with the specular law v - 2 (v.n) n"
    );
    let mut out = *s;
    *out.v_mut(ball) = reflected;
    *out.q_mut(ball) = q - sd.normal * d;
    Ok(out)
}

/// Stopping rule for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget<T> {
    pub max_events: Option<usize>,
    pub max_time: Option<T>,
}

impl<T: Real> Budget<T> {
    pub fn events(n: usize) -> Self {
        Budget {
            max_events: Some(n),
            max_time: None,
        }
    }

    pub fn time(t: T) -> Self {
        Budget {
            max_events: None,
            max_time: Some(t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub initial: PhaseState<T>,
    pub events: Vec<EventRecord<T>>,
    /// State at the end of the budget, or at the singular point.
    pub final_state: PhaseState<T>,
    pub halted: Option<SingularKind>,
    /// Largest `| |v|^2 - |v0|^2 |` seen after any event.
    pub energy_drift: T,
}

impl<T: Real> Trajectory<T> {
    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.kind)).count()
    }

    pub fn ball_collisions(&self) -> usize {
        self.count(|k| matches!(k, EventKind::BallBall))
    }
}

/// Streaming integrator owning one trajectory.
#[derive(Debug, Clone)]
pub struct Simulator<'a, T> {
    table: &'a Table<T>,
    state: PhaseState<T>,
    pending: Option<NextEvent<T>>,
    events: usize,
    halted: Option<SingularKind>,
    energy0: T,
    energy_drift: T,
}

impl<'a, T: Real> Simulator<'a, T> {
    pub fn new(table: &'a Table<T>, initial: PhaseState<T>) -> Result<Self, DynamicsError> {
        initial.check_constraints(table)?;
        let e = initial.energy();
        if !e.is_finite() || e == T::zero() {
            return Err(DynamicsError::NoEvent);
        }
        Ok(Simulator {
            table,
            state: initial,
            pending: None,
            events: 0,
            halted: None,
            energy0: e,
            energy_drift: T::zero(),
        })
    }

    pub fn table(&self) -> &'a Table<T> {
        self.table
    }

    pub fn state(&self) -> &PhaseState<T> {
        &self.state
    }

    pub fn time(&self) -> T {
        self.state.t
    }

    pub fn events_processed(&self) -> usize {
        self.events
    }

    pub fn halted(&self) -> Option<SingularKind> {
        self.halted
    }

    pub fn energy_drift(&self) -> T {
        self.energy_drift
    }

    /// The next event from the current state (cached until the state changes).
    pub fn peek(&mut self) -> Result<NextEvent<T>, DynamicsError> {
        if let Some(kind) = self.halted {
            return Err(DynamicsError::Halted(kind));
        }
        if let Some(p) = self.pending {
            return Ok(p);
        }
        let mut p = next_event(self.table, &self.state)?;
        // an event at zero delay right after another one is a simultaneous pair
        if self.events > 0 && p.dt < T::event_tie_tol() && !matches!(p.event, PendingEvent::Singular(_)) {
            p.event = PendingEvent::Singular(SingularKind::Simultaneous);
        }
        self.pending = Some(p);
        Ok(p)
    }

    /// Time of the next event.
    pub fn next_event_time(&mut self) -> Result<T, DynamicsError> {
        Ok(self.state.t + self.peek()?.dt)
    }

    /// Flies to the next event and applies it. A singular event is returned as
    /// a record and halts the simulator.
    pub fn step(&mut self) -> Result<EventRecord<T>, DynamicsError> {
        let p = self.peek()?;
        let at = self.state.flown(p.dt);
        let (state, kind) = match p.event {
            PendingEvent::Wall { ball, side } => (
                reflect_wall(self.table, &at, ball, side)?,
                EventKind::WallHit {
                    ball,
                    side,
                    reflection: self.table.sides()[side].reflection,
                },
            ),
            PendingEvent::BallBall => (collide_balls(self.table, &at)?, EventKind::BallBall),
            PendingEvent::Singular(k) => {
                self.halted = Some(k);
                (at, EventKind::Singular(k))
            }
        };
        self.pending = None;
        self.state = state;
        let drift = (state.energy() - self.energy0).abs();
        if drift > self.energy_drift {
            self.energy_drift = drift;
        }
        let rec = EventRecord {
            index: self.events,
            time: state.t,
            kind,
            state,
        };
        self.events += 1;
        Ok(rec)
    }

    /// Processes every event up to time `t` and flies freely to `t`, passing
    /// each record to `on_event`. Stops early at a singular event.
    pub fn advance_to_with(
        &mut self,
        t: T,
        mut on_event: impl FnMut(&EventRecord<T>),
    ) -> Result<(), DynamicsError> {
        while self.halted.is_none() {
            let te = self.next_event_time()?;
            if te > t {
                let dt = t - self.state.t;
                if dt > T::zero() {
                    self.state = self.state.flown(dt);
                    if let Some(p) = self.pending.as_mut() {
                        p.dt = te - t;
                    }
                }
                return Ok(());
            }
            let rec = self.step()?;
            on_event(&rec);
        }
        Ok(())
    }

    pub fn advance_to(&mut self, t: T) -> Result<Vec<EventRecord<T>>, DynamicsError> {
        let mut out = Vec::new();
        self.advance_to_with(t, |r| out.push(*r))?;
        Ok(out)
    }

    /// Replaces the state, e.g. after reversing velocities mid-flight.
    pub fn reset(&mut self, state: PhaseState<T>) -> Result<(), DynamicsError> {
        state.check_constraints(self.table)?;
        self.state = state;
        self.pending = None;
        self.halted = None;
        Ok(())
    }
}

/// Runs the flow from `initial` until the budget is exhausted or a singular
/// event halts it. The flow is deterministic; randomness enters only through
/// the choice of initial state.
pub fn simulate<T: Real>(
    table: &Table<T>,
    initial: PhaseState<T>,
    budget: Budget<T>,
) -> Result<Trajectory<T>, DynamicsError> {
    let mut sim = Simulator::new(table, initial)?;
    let mut events = Vec::new();
    let max_events = budget.max_events.unwrap_or(usize::MAX);
    loop {
        if events.len() >= max_events || sim.halted().is_some() {
            break;
        }
        if let Some(tmax) = budget.max_time {
            if sim.next_event_time()? > tmax {
                sim.advance_to(tmax)?;
                break;
            }
        }
        events.push(sim.step()?);
    }
    Ok(Trajectory {
        initial,
        final_state: *sim.state(),
        halted: sim.halted(),
        energy_drift: sim.energy_drift(),
        events,
    })
}

/// Round-trip time-reversal test: fly `n_events` events from `s0`, stop in
/// the middle of the next free flight, negate the velocities, fly the same
/// time back and negate again. Returns the largest coordinate deviation from
/// `s0`. Rounding errors grow at the Lyapunov rate along the way, so long
/// prefixes need a wide scalar type.
pub fn reverse_replay_error<T: Real>(
    table: &Table<T>,
    s0: &PhaseState<T>,
    n_events: usize,
) -> Result<f64, DynamicsError> {
    let start = PhaseState { t: T::zero(), ..*s0 };
    let mut sim = Simulator::new(table, start)?;
    for _ in 0..n_events {
        if let EventKind::Singular(k) = sim.step()?.kind {
            return Err(DynamicsError::Halted(k));
        }
    }
    let t_mid = (sim.time() + sim.next_event_time()?) * T::half();
    sim.advance_to(t_mid)?;
    let back = PhaseState {
        t: T::zero(),
        ..sim.state().reversed()
    };
    let mut rev = Simulator::new(table, back)?;
    rev.advance_to(t_mid)?;
    if let Some(k) = rev.halted() {
        return Err(DynamicsError::Halted(k));
    }
    let end = rev.state().reversed();
    Ok(end
        .to_array()
        .iter()
        .zip(start.to_array())
        .map(|(a, b)| (*a - b).abs().as_f64())
        .fold(0.0, f64::max))
}

/// Uniform point of the eroded polygon by triangle-fan sampling.
pub fn sample_position<T: Real, R: rand::Rng + ?Sized>(table: &Table<T>, rng: &mut R) -> Vector2<T> {
    let v = table.eroded_vertices();
    let areas: Vec<T> = (1..v.len() - 1)
        .map(|i| (v[i] - v[0]).cross(v[i + 1] - v[0]) * T::half())
        .collect();
    let total = areas.iter().fold(T::zero(), |a, b| a + *b);
    let mut pick = T::lit(rng.random::<f64>()) * total;
    let mut tri = areas.len() - 1;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            tri = i;
            break;
        }
        pick = pick - *a;
    }
    let (a, b, c) = (v[0], v[tri + 1], v[tri + 2]);
    let (mut s, mut t) = (T::lit(rng.random::<f64>()), T::lit(rng.random::<f64>()));
    if s + t > T::one() {
        s = T::one() - s;
        t = T::one() - t;
    }
    a + (b - a) * s + (c - a) * t
}

/// Uniform point of the unit sphere `S^3`, as two planar velocities.
pub fn sample_velocities<T: Real, R: rand::Rng + ?Sized>(rng: &mut R) -> (Vector2<T>, Vector2<T>) {
    loop {
        let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return (
                Vector2::new(T::lit(g[0] / n), T::lit(g[1] / n)),
                Vector2::new(T::lit(g[2] / n), T::lit(g[3] / n)),
            );
        }
    }
}

/// Number of configuration proposals after which sampling gives up; an
/// acceptance rate of 1e-6 would need about a million.
const MAX_PROPOSALS: usize = 20_000_000;

/// Liouville-distributed phase point: centers uniform on the allowed
/// configurations, velocities uniform on the unit 3-sphere.
pub fn sample_state<T: Real, R: rand::Rng + ?Sized>(
    table: &Table<T>,
    rng: &mut R,
) -> Result<PhaseState<T>, DynamicsError> {
    let contact = table.contact_distance();
    if contact >= table.eroded_diameter() {
        return Err(DynamicsError::RejectionOverflow { acceptance: 0.0 });
    }
    let margin = T::constraint_tol() * T::lit(10.0);
    for _ in 0..MAX_PROPOSALS {
        let q1 = sample_position(table, rng);
        let q2 = sample_position(table, rng);
        if (q1 - q2).norm() > contact + margin {
            let (v1, v2) = sample_velocities(rng);
            return Ok(PhaseState::new(q1, q2, v1, v2));
        }
    }
    Err(DynamicsError::RejectionOverflow {
        acceptance: 1.0 / MAX_PROPOSALS as f64,
    })
}

/// Ball 1 uniform with unit speed, ball 2 at rest at a uniform position. With
/// `R = 0` this is the one-ball (point billiard) control system.
pub fn sample_one_ball_state<T: Real, R: rand::Rng + ?Sized>(
    table: &Table<T>,
    rng: &mut R,
) -> Result<PhaseState<T>, DynamicsError> {
    let mut s = sample_state(table, rng)?;
    let theta = T::lit(rng.random_range(0.0..std::f64::consts::TAU));
    s.v1 = Vector2::from_angle(theta);
    s.v2 = Vector2::zero();
    Ok(s)
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "event_index,time,type,ball,side_id,group_kind,group_index,q1x,q1y,q2x,q2y,v1x,v1y,v2x,v2y";

/// Full-precision float for CSV output (17 significant digits).
pub fn fmt_f<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

fn kind_name(k: ElementKind) -> &'static str {
    match k {
        ElementKind::Rotation => "rotation",
        ElementKind::Reflection => "reflection",
    }
}

pub fn write_trajectory_csv_row<T: Real, W: Write + ?Sized>(w: &mut W, rec: &EventRecord<T>) -> io::Result<()> {
    let (ball, side, gk, gi) = match rec.kind {
        EventKind::WallHit { ball, side, reflection } => (
            ball.to_string(),
            side.to_string(),
            kind_name(reflection.kind()).to_string(),
            reflection.k().to_string(),
        ),
        _ => Default::default(),
    };
    let s = &rec.state;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        rec.index,
        fmt_f(rec.time),
        rec.kind.label(),
        ball,
        side,
        gk,
        gi,
        fmt_f(s.q1.x),
        fmt_f(s.q1.y),
        fmt_f(s.q2.x),
        fmt_f(s.q2.y),
        fmt_f(s.v1.x),
        fmt_f(s.v1.y),
        fmt_f(s.v2.x),
        fmt_f(s.v2.y)
    )
}

pub fn write_trajectory_csv<T: Real, W: Write + ?Sized>(w: &mut W, events: &[EventRecord<T>]) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
    for rec in events {
        write_trajectory_csv_row(w, rec)?;
    }
    Ok(())
}
