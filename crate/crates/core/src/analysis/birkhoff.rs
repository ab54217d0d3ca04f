use serde::Serialize;

use super::mean_and_stderr;
use crate::dynamics::{Ball, EventRecord, PhaseState};

/// Built-in bounded observables on phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    Constant,
    /// Indicator of the center of `ball` lying in the box `[lo, hi]`.
    BoxIndicator { ball: Ball, lo: [f64; 2], hi: [f64; 2] },
    /// Distance `|q1 - q2|`.
    Separation,
    /// Kinetic share `|v1|^2` of ball 1 (total energy is 1).
    KineticShare,
}

impl Observable {
    pub const BUILT_IN: [Observable; 3] = [Observable::Constant, Observable::Separation, Observable::KineticShare];

    pub fn name(&self) -> String {
        match self {
            Observable::Constant => "constant".into(),
            Observable::BoxIndicator { ball, lo, hi } => {
                format!("box{}[{},{}]x[{},{}]", ball.number(), lo[0], hi[0], lo[1], hi[1])
            }
            Observable::Separation => "separation".into(),
            Observable::KineticShare => "kinetic-share".into(),
        }
    }

    pub fn value(&self, s: &PhaseState<f64>) -> f64 {
        match *self {
            Observable::Constant => 1.0,
            Observable::BoxIndicator { ball, lo, hi } => {
                let q = s.q(ball);
                let inside = lo[0] <= q.x && q.x <= hi[0] && lo[1] <= q.y && q.y <= hi[1];
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::Separation => (s.q1 - s.q2).norm(),
            Observable::KineticShare => s.v1.norm_sq(),
        }
    }

    /// Exact integral over the free flight of length `dt` starting at `s`.
    pub fn flight_integral(&self, s: &PhaseState<f64>, dt: f64) -> f64 {
        match *self {
            Observable::Constant => dt,
            Observable::BoxIndicator { ball, lo, hi } => {
                let (q, v) = (s.q(ball), s.v(ball));
                let (mut a, mut b) = (0.0_f64, dt);
                for (x, u, l, h) in [(q.x, v.x, lo[0], hi[0]), (q.y, v.y, lo[1], hi[1])] {
                    if u == 0.0 {
                        if x < l || x > h {
                            return 0.0;
                        }
                    } else {
                        let (t1, t2) = ((l - x) / u, (h - x) / u);
                        a = a.max(t1.min(t2));
                        b = b.min(t1.max(t2));
                    }
                }
                (b - a).max(0.0)
            }
            Observable::Separation => separation_integral(s.q1 - s.q2, s.v1 - s.v2, dt),
            Observable::KineticShare => s.v1.norm_sq() * dt,
        }
    }
}

/// `int_0^dt |a + b t| dt`, in closed form.
fn separation_integral(a: crate::vec2::Vector2<f64>, b: crate::vec2::Vector2<f64>, dt: f64) -> f64 {
    let bb = b.norm_sq();
    if bb == 0.0 {
        return a.norm() * dt;
    }
    // |a + b t| = |b| sqrt(s^2 + k^2) with s = t + a.b/|b|^2
    let s0 = a.dot(b) / bb;
    let k2 = (a.cross(b) / bb).powi(2);
    let antiderivative = |s: f64| {
        let r = (s * s + k2).sqrt();
        if k2 == 0.0 {
            0.5 * s * r
        } else {
            0.5 * (s * r + k2 * (s / k2.sqrt()).asinh())
        }
    };
    bb.sqrt() * (antiderivative(s0 + dt) - antiderivative(s0))
}

/// Free flights of a trajectory: `(state at the start, duration)`.
pub fn flights<'a>(
    initial: &'a PhaseState<f64>,
    events: &'a [EventRecord<f64>],
) -> impl Iterator<Item = (&'a PhaseState<f64>, f64)> + 'a {
    std::iter::once(initial)
        .chain(events.iter().map(|e| &e.state))
        .zip(events.iter().map(|e| e.time))
        .map(|(s, t)| (s, t - s.t))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirkhoffAverage {
    pub observable: String,
    pub average: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    pub total_time: f64,
    /// `(time, running average)` at the end of every batch.
    pub running: Vec<(f64, f64)>,
}

/// Streaming time average with batch means over consecutive groups of
/// `per_batch` flights.
#[derive(Debug, Clone)]
pub struct BirkhoffAccumulator {
    obs: Observable,
    per_batch: usize,
    batches: usize,
    flights: usize,
    integral: f64,
    time: f64,
    batch_integral: f64,
    batch_time: f64,
    batch_means: Vec<f64>,
    running: Vec<(f64, f64)>,
}

impl BirkhoffAccumulator {
    pub fn new(obs: Observable, total_flights: usize, batches: usize) -> Self {
        BirkhoffAccumulator {
            obs,
            per_batch: (total_flights / batches.max(1)).max(1),
            batches,
            flights: 0,
            integral: 0.0,
            time: 0.0,
            batch_integral: 0.0,
            batch_time: 0.0,
            batch_means: Vec::with_capacity(batches),
            running: Vec::with_capacity(batches),
        }
    }

    pub fn push(&mut self, s: &PhaseState<f64>, dt: f64) {
        let x = self.obs.flight_integral(s, dt);
        self.integral += x;
        self.time += dt;
        self.batch_integral += x;
        self.batch_time += dt;
        self.flights += 1;
        if self.flights.is_multiple_of(self.per_batch) && self.batch_means.len() < self.batches {
            self.batch_means.push(self.batch_integral / self.batch_time);
            self.running.push((self.time, self.integral / self.time));
            self.batch_integral = 0.0;
            self.batch_time = 0.0;
        }
    }

    pub fn running_average(&self) -> f64 {
        self.integral / self.time
    }

    pub fn finish(self) -> BirkhoffAverage {
        let (_, stderr) = mean_and_stderr(&self.batch_means);
        BirkhoffAverage {
            observable: self.obs.name(),
            average: self.integral / self.time,
            stderr,
            total_time: self.time,
            running: self.running,
        }
    }
}

/// Time average of `obs` along the flow from `initial` through `events`,
/// with a standard error from `batches` consecutive event batches.
pub fn birkhoff_average(
    initial: &PhaseState<f64>,
    events: &[EventRecord<f64>],
    obs: &Observable,
    batches: usize,
) -> BirkhoffAverage {
    let mut acc = BirkhoffAccumulator::new(*obs, events.len(), batches);
    for (s, dt) in flights(initial, events) {
        acc.push(s, dt);
    }
    acc.finish()
}

/// The same flights traversed backwards: velocities negated, each flight
/// starting where the forward one ended.
pub fn reversed_flights(initial: &PhaseState<f64>, events: &[EventRecord<f64>]) -> Vec<(PhaseState<f64>, f64)> {
    let mut out: Vec<(PhaseState<f64>, f64)> = flights(initial, events)
        .map(|(s, dt)| {
            let mut r = s.flown(dt).reversed();
            r.t = 0.0;
            (r, dt)
        })
        .collect();
    out.reverse();
    out
}

/// Time average over explicit flights.
pub fn flights_average(flights: &[(PhaseState<f64>, f64)], obs: &Observable) -> f64 {
    let int: f64 = flights.iter().map(|(s, dt)| obs.flight_integral(s, *dt)).sum();
    int / flights.iter().map(|f| f.1).sum::<f64>()
}
