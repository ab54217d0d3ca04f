use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{mean_and_stderr, AnalysisError};
use crate::dynamics::{sample_one_ball_state, sample_state, DynamicsError, EventKind, PhaseState, Simulator};
use crate::tables::Table;
use crate::vec2::Vector2;

/// Parameters of the two-trajectory divergence estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovConfig {
    /// Events of the reference trajectory.
    pub n_events: usize,
    /// Reference events between renormalizations.
    pub renorm_every: usize,
    /// Separation restored at every renormalization.
    pub delta0: f64,
    pub batches: usize,
    /// Restarts allowed after singular events before giving up.
    pub max_restarts: usize,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            n_events: 100_000,
            renorm_every: 10,
            delta0: 1e-9,
            batches: 20,
            max_restarts: 100,
        }
    }
}

/// One estimator run on one system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovRun {
    pub system: LyapunovSystem,
    /// Growth rate per unit time.
    pub lambda: f64,
    /// Batch-means standard error of `lambda`.
    pub stderr: f64,
    pub renormalizations: usize,
    pub restarts: usize,
    /// Intervals discarded because the shadow left the reference's event sequence.
    pub divergences: usize,
    pub total_time: f64,
    pub events: usize,
    pub batch_lambdas: Vec<f64>,
    pub delta0: f64,
}

/// Which system the estimator runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LyapunovSystem {
    TwoBalls,
    /// Point billiard in the same eroded polygon with ball 2 at rest.
    OneBall,
}

fn distance(a: &PhaseState<f64>, b: &PhaseState<f64>) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn from_array(x: [f64; 8], t: f64) -> PhaseState<f64> {
    PhaseState {
        q1: Vector2::new(x[0], x[1]),
        q2: Vector2::new(x[2], x[3]),
        v1: Vector2::new(x[4], x[5]),
        v2: Vector2::new(x[6], x[7]),
        t,
    }
}

/// `x + d u` with `u` a unit vector of `R^8` scaled back onto the energy
/// shell of `x` (velocity part rescaled, positions untouched).
fn displaced(x: &PhaseState<f64>, u: [f64; 8], d: f64) -> PhaseState<f64> {
    let a = x.to_array();
    let mut y = from_array(std::array::from_fn(|i| a[i] + d * u[i]), x.t);
    let scale = (x.energy() / y.energy()).sqrt();
    y.v1 = y.v1 * scale;
    y.v2 = y.v2 * scale;
    y
}

/// Random unit direction tangent to the energy shell at `x`. With
/// `one_ball` the resting ball 2 is left unperturbed.
fn tangent_direction(x: &PhaseState<f64>, one_ball: bool, rng: &mut ChaCha8Rng) -> [f64; 8] {
    let a = x.to_array();
    let mut u: [f64; 8] = std::array::from_fn(|_| StandardNormal.sample(rng));
    if one_ball {
        for i in [2, 3, 6, 7] {
            u[i] = 0.0;
        }
    }
    // remove the velocity component along the shell normal (v1, v2)
    let vv: f64 = a[4..].iter().map(|v| v * v).sum();
    let uv: f64 = (4..8).map(|i| u[i] * a[i]).sum();
    for i in 4..8 {
        u[i] -= uv / vv * a[i];
    }
    let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.map(|x| x / n)
}

enum Interval {
    Done { log_growth: f64, dt: f64 },
    Singular,
    /// Shadow took a different event; happens when two events of the
    /// reference are closer in time than the current separation.
    Diverged,
}

/// Advances both simulators by `k` reference events, aligns them at the
/// middle of a common free flight and returns the separation there.
fn run_interval(
    main: &mut Simulator<'_, f64>,
    shadow: &mut Simulator<'_, f64>,
    k: usize,
    delta0: f64,
) -> Result<Interval, AnalysisError> {
    let t0 = main.time();
    let mut kinds = Vec::with_capacity(k);
    for _ in 0..k {
        let e = main.step()?;
        if matches!(e.kind, EventKind::Singular(_)) {
            return Ok(Interval::Singular);
        }
        kinds.push(e.kind);
    }
    for kind in &kinds {
        let e = shadow.step()?;
        if matches!(e.kind, EventKind::Singular(_)) {
            return Ok(Interval::Singular);
        }
        if e.kind != *kind {
            return Ok(Interval::Diverged);
        }
    }
    let lo = main.time().max(shadow.time());
    let hi = main.next_event_time()?.min(shadow.next_event_time()?);
    if lo >= hi {
        return Ok(Interval::Diverged);
    }
    let t = 0.5 * (lo + hi);
    main.advance_to(t)?;
    shadow.advance_to(t)?;
    let d = distance(main.state(), shadow.state());
    let u: [f64; 8] = {
        let (a, b) = (main.state().to_array(), shadow.state().to_array());
        std::array::from_fn(|i| (b[i] - a[i]) / d)
    };
    // Both clocks restart at 0: at large absolute times the rounding of event
    // times alone moves a 1e-9 along-flow offset by percents.
    let x = PhaseState { t: 0.0, ..*main.state() };
    if let Err(e) = main.reset(x) {
        return match e {
            DynamicsError::InvalidState(_) => Ok(Interval::Singular),
            e => Err(e.into()),
        };
    }
    let y = displaced(&x, u, delta0);
    match shadow.reset(y) {
        Ok(()) => {}
        // the renormalized shadow can poke through a wall the reference is grazing
        Err(DynamicsError::InvalidState(_)) => return Ok(Interval::Singular),
        Err(e) => return Err(e.into()),
    }
    Ok(Interval::Done {
        log_growth: (d / delta0).ln(),
        dt: t - t0,
    })
}

/// Two-ball estimate together with the one-ball control in the same polygon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub two_balls: LyapunovRun,
    pub control: LyapunovRun,
}

impl LyapunovReport {
    /// Two-ball exponent clearly positive.
    pub fn positive(&self, sigmas: f64) -> bool {
        self.two_balls.stderr > 0.0 && self.two_balls.lambda > sigmas * self.two_balls.stderr
    }

    /// Control exponent indistinguishable from zero.
    pub fn control_vanishes(&self, sigmas: f64) -> bool {
        self.control.lambda.abs() < sigmas * self.control.stderr
    }
}

pub fn lyapunov_estimate(table: &Table<f64>, seed: u64, cfg: &LyapunovConfig) -> Result<LyapunovReport, AnalysisError> {
    Ok(LyapunovReport {
        two_balls: lyapunov_run(table, LyapunovSystem::TwoBalls, seed, cfg)?,
        control: lyapunov_run(table, LyapunovSystem::OneBall, seed, cfg)?,
    })
}

/// Largest Lyapunov exponent by renormalized two-trajectory divergence,
/// compared at common flow times. A singular event in either trajectory
/// restarts the pair from a new initial state.
pub fn lyapunov_run(
    table: &Table<f64>,
    system: LyapunovSystem,
    seed: u64,
    cfg: &LyapunovConfig,
) -> Result<LyapunovRun, AnalysisError> {
    if !(1e-10..=1e-7).contains(&cfg.delta0) {
        return Err(AnalysisError::InvalidParameter(format!("delta0 = {:e} outside [1e-10, 1e-7]", cfg.delta0)));
    }
    if cfg.renorm_every < 10 {
        return Err(AnalysisError::InvalidParameter(format!(
            "renorm_every = {} must be at least 10",
            cfg.renorm_every
        )));
    }
    if cfg.batches < 10 || cfg.n_events < cfg.batches * cfg.renorm_every {
        return Err(AnalysisError::InvalidParameter(format!(
            "{} batches need at least {} events",
            cfg.batches.max(10),
            cfg.batches.max(10) * cfg.renorm_every
        )));
    }
    let point;
    let table = match system {
        LyapunovSystem::TwoBalls => table,
        LyapunovSystem::OneBall => {
            point = table.point_billiard();
            &point
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut restarts = 0;
    let mut divergences = 0;
    let target = cfg.n_events / cfg.renorm_every;
    'restart: while intervals.len() < target {
        let x0 = match system {
            LyapunovSystem::TwoBalls => sample_state(table, &mut rng)?,
            LyapunovSystem::OneBall => sample_one_ball_state(table, &mut rng)?,
        };
        let y0 = displaced(&x0, tangent_direction(&x0, system == LyapunovSystem::OneBall, &mut rng), cfg.delta0);
        let mut main = Simulator::new(table, x0)?;
        let mut shadow = Simulator::new(table, y0)?;
        while intervals.len() < target {
            match run_interval(&mut main, &mut shadow, cfg.renorm_every, cfg.delta0)? {
                Interval::Done { log_growth, dt } => intervals.push((log_growth, dt)),
                Interval::Diverged => {
                    divergences += 1;
                    // a renormalization interval too long for delta0 diverges every time
                    if divergences > cfg.max_restarts {
                        return Err(AnalysisError::SequenceDivergenceOverflow {
                            renormalization: intervals.len(),
                        });
                    }
                    continue 'restart;
                }
                Interval::Singular => {
                    restarts += 1;
                    if restarts > cfg.max_restarts {
                        return Err(AnalysisError::TooManyRestarts(restarts));
                    }
                    continue 'restart;
                }
            }
        }
    }
    let total_log: f64 = intervals.iter().map(|i| i.0).sum();
    let total_time: f64 = intervals.iter().map(|i| i.1).sum();
    let per = intervals.len() / cfg.batches;
    let batch_lambdas: Vec<f64> = intervals
        .chunks(per)
        .take(cfg.batches)
        .map(|c| c.iter().map(|i| i.0).sum::<f64>() / c.iter().map(|i| i.1).sum::<f64>())
        .collect();
    let (_, stderr) = mean_and_stderr(&batch_lambdas);
    Ok(LyapunovRun {
        system,
        lambda: total_log / total_time,
        stderr,
        renormalizations: intervals.len(),
        restarts,
        divergences,
        total_time,
        events: intervals.len() * cfg.renorm_every,
        batch_lambdas,
        delta0: cfg.delta0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::PolygonId;
    use crate::tables::{make_table_scaled, Scale};

    #[test]
    fn parameter_validation() {
        let t = make_table_scaled(PolygonId::Square, 0.1, Scale::Eroded).unwrap();
        let bad = |c: LyapunovConfig| matches!(lyapunov_run(&t, LyapunovSystem::TwoBalls, 1, &c), Err(AnalysisError::InvalidParameter(_)));
        let base = LyapunovConfig::default();
        assert!(bad(LyapunovConfig { delta0: 1e-3, ..base }));
        assert!(bad(LyapunovConfig { renorm_every: 5, ..base }));
        assert!(bad(LyapunovConfig { batches: 5, ..base }));
    }

    #[test]
    fn shadow_starts_on_the_shell_at_distance_delta() {
        let t = make_table_scaled(PolygonId::EqTriangle, 0.1, Scale::Eroded).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sample_state(&t, &mut rng).unwrap();
        let u = tangent_direction(&x, false, &mut rng);
        let y = displaced(&x, u, 1e-9);
        assert!((y.energy() - 1.0).abs() < 1e-15);
        assert!((distance(&x, &y) / 1e-9 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn two_balls_diverge_and_one_ball_does_not() {
        let t = make_table_scaled(PolygonId::EqTriangle, 0.1, Scale::Eroded).unwrap();
        let cfg = LyapunovConfig {
            n_events: 20_000,
            ..Default::default()
        };
        let r = lyapunov_estimate(&t, 5, &cfg).unwrap();
        assert!(r.positive(5.0), "{:?}", r.two_balls);
        assert!(r.control_vanishes(3.0), "{:?}", r.control);
        assert!(r.control.lambda.abs() < 0.05 * r.two_balls.lambda, "{r:?}");
    }
}
