use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{mean_and_stderr, AnalysisError, BirkhoffAccumulator, BirkhoffAverage, Observable};
use crate::dynamics::{fmt_f, sample_state, EventKind, PhaseState, Simulator};
use crate::tables::Table;

/// Uniform product grid over the eroded polygon's bounding box, applied to
/// `(q1x, q1y, q2x, q2y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigGrid {
    pub bins: usize,
    pub lo: [f64; 2],
    pub width: [f64; 2],
}

impl ConfigGrid {
    pub fn new(table: &Table<f64>, bins: usize) -> Self {
        let v = table.eroded_vertices();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in v {
            lo = [lo[0].min(p.x), lo[1].min(p.y)];
            hi = [hi[0].max(p.x), hi[1].max(p.y)];
        }
        ConfigGrid {
            bins,
            lo,
            width: [(hi[0] - lo[0]) / bins as f64, (hi[1] - lo[1]) / bins as f64],
        }
    }

    pub fn cells(&self) -> usize {
        self.bins.pow(4)
    }

    fn coords(s: &PhaseState<f64>) -> ([f64; 4], [f64; 4]) {
        (
            [s.q1.x, s.q1.y, s.q2.x, s.q2.y],
            [s.v1.x, s.v1.y, s.v2.x, s.v2.y],
        )
    }

    fn axis_index(&self, axis: usize, x: f64) -> usize {
        let w = self.width[axis % 2];
        (((x - self.lo[axis % 2]) / w).floor().max(0.0) as usize).min(self.bins - 1)
    }

    pub fn cell(&self, x: [f64; 4]) -> usize {
        (0..4).fold(0, |acc, a| acc * self.bins + self.axis_index(a, x[a]))
    }

    /// Adds the time the free flight from `s` of length `dt` spends in each
    /// cell; cell boundaries are crossed at exactly computed times.
    pub fn deposit(&self, hist: &mut [f64], s: &PhaseState<f64>, dt: f64, cuts: &mut Vec<f64>) {
        let (x, u) = Self::coords(s);
        cuts.clear();
        cuts.push(0.0);
        for a in 0..4 {
            if u[a] == 0.0 {
                continue;
            }
            let (l, w) = (self.lo[a % 2], self.width[a % 2]);
            let (i0, i1) = (self.axis_index(a, x[a]), self.axis_index(a, x[a] + u[a] * dt));
            let (from, to) = (i0.min(i1), i0.max(i1));
            for j in from + 1..=to {
                let t = (l + j as f64 * w - x[a]) / u[a];
                if t > 0.0 && t < dt {
                    cuts.push(t);
                }
            }
        }
        cuts.push(dt);
        cuts.sort_by(f64::total_cmp);
        for pair in cuts.windows(2) {
            let len = pair[1] - pair[0];
            if len > 0.0 {
                let m = 0.5 * (pair[0] + pair[1]);
                hist[self.cell(std::array::from_fn(|a| x[a] + u[a] * m))] += len;
            }
        }
    }
}

pub const VELOCITY_BINS: usize = 16;

fn direction_bin(v: crate::vec2::Vector2<f64>) -> usize {
    let a = v.y.atan2(v.x).rem_euclid(std::f64::consts::TAU);
    ((a / std::f64::consts::TAU * VELOCITY_BINS as f64) as usize).min(VELOCITY_BINS - 1)
}

/// Total-variation distance between two mass vectors.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn normalized(h: &[f64]) -> Vec<f64> {
    let s: f64 = h.iter().sum();
    h.iter().map(|x| x / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquidistributionConfig {
    pub n_events: usize,
    /// Grid bins per coordinate.
    pub bins: usize,
    /// Liouville samples behind the reference cell masses.
    pub reference_samples: usize,
    pub reference_seed: u64,
    /// Multinomial draws behind the calibration band.
    pub band_draws: usize,
    pub batches: usize,
    /// Prefix checkpoints at `n_events / 2^k`, `k < checkpoints`.
    pub checkpoints: usize,
    pub observables: Vec<Observable>,
}

impl Default for EquidistributionConfig {
    fn default() -> Self {
        EquidistributionConfig {
            n_events: 1_000_000,
            bins: 8,
            reference_samples: 2_000_000,
            reference_seed: 0x5eed,
            band_draws: 400,
            batches: 20,
            checkpoints: 7,
            observables: Observable::BUILT_IN.to_vec(),
        }
    }
}

/// Liouville reference: cell masses and observable means from
/// `sample_state`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiouvilleReference {
    pub samples: usize,
    pub masses: Vec<f64>,
    pub means: Vec<f64>,
}

const REFERENCE_CHUNK: usize = 50_000;

pub fn liouville_reference(
    table: &Table<f64>,
    grid: &ConfigGrid,
    observables: &[Observable],
    samples: usize,
    seed: u64,
) -> Result<LiouvilleReference, AnalysisError> {
    let chunks = samples.div_ceil(REFERENCE_CHUNK);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = REFERENCE_CHUNK.min(samples - c * REFERENCE_CHUNK);
            let mut hist = vec![0.0; grid.cells()];
            let mut sums = vec![0.0; observables.len()];
            for _ in 0..n {
                let s = sample_state(table, &mut rng)?;
                hist[grid.cell(ConfigGrid::coords(&s).0)] += 1.0;
                for (sum, o) in sums.iter_mut().zip(observables) {
                    *sum += o.value(&s);
                }
            }
            Ok((hist, sums))
        })
        .collect::<Result<_, AnalysisError>>()?;
    let mut hist = vec![0.0; grid.cells()];
    let mut sums = vec![0.0; observables.len()];
    for (h, s) in parts {
        hist.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        sums.iter_mut().zip(s).for_each(|(a, b)| *a += b);
    }
    Ok(LiouvilleReference {
        samples,
        masses: hist.iter().map(|x| x / samples as f64).collect(),
        means: sums.iter().map(|x| x / samples as f64).collect(),
    })
}

fn multinomial(n: u64, p: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut left = n;
    let mut rest = 1.0;
    p.iter()
        .map(|&pi| {
            if left == 0 || pi <= 0.0 {
                return 0.0;
            }
            let q = (pi / rest).clamp(0.0, 1.0);
            let k = Binomial::new(left, q).expect("probability in [0, 1]").sample(rng);
            left -= k;
            rest -= pi;
            k as f64 / n as f64
        })
        .collect()
}

/// Quantiles of the TV distance between an `n_eff`-sample empirical
/// distribution and an independent `m`-sample estimate of the same masses.
pub fn tv_band(p: &[f64], n_eff: f64, m: usize, draws: usize, seed: u64) -> (f64, f64, f64) {
    let n = n_eff.round().max(1.0) as u64;
    let mut tvs: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            total_variation(&multinomial(n, p, &mut rng), &multinomial(m as u64, p, &mut rng))
        })
        .collect();
    tvs.sort_by(f64::total_cmp);
    let q = |f: f64| tvs[((f * draws as f64) as usize).min(draws - 1)];
    (q(0.05), q(0.5), q(0.95))
}

/// Effective sample size of histograms whose cross-seed spread per bin is
/// `var`, under multinomial sampling from masses `p`.
pub fn effective_samples(p: &[f64], var: &[f64]) -> f64 {
    let num: f64 = p.iter().map(|x| x * (1.0 - x)).sum();
    num / var.iter().sum::<f64>()
}

/// Per-bin mean and sample variance across histograms.
fn bin_moments(hs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = hs[0].len();
    let n = hs.len() as f64;
    let mean: Vec<f64> = (0..k).map(|b| hs.iter().map(|h| h[b]).sum::<f64>() / n).collect();
    let var = (0..k)
        .map(|b| hs.iter().map(|h| (h[b] - mean[b]).powi(2)).sum::<f64>() / (n - 1.0))
        .collect();
    (mean, var)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub events: usize,
    pub time: f64,
    pub tv: f64,
    pub running: Vec<f64>,
}

/// Everything one seed contributes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub averages: Vec<BirkhoffAverage>,
    #[serde(skip)]
    pub occupancy: Vec<f64>,
    pub velocity: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub tv: f64,
}

/// Runs one seed, streaming flights into the accumulators. `None` when the
/// trajectory halts at a singular event.
pub fn run_seed(
    table: &Table<f64>,
    grid: &ConfigGrid,
    reference: &LiouvilleReference,
    seed: u64,
    cfg: &EquidistributionConfig,
) -> Result<Option<SeedRun>, AnalysisError> {
    let x0 = sample_state(table, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut sim = Simulator::new(table, x0)?;
    let mut accs: Vec<BirkhoffAccumulator> = cfg
        .observables
        .iter()
        .map(|o| BirkhoffAccumulator::new(*o, cfg.n_events, cfg.batches))
        .collect();
    let mut hist = vec![0.0; grid.cells()];
    let mut vel = vec![0.0; VELOCITY_BINS];
    let mut cuts = Vec::new();
    let marks: Vec<usize> = (0..cfg.checkpoints)
        .rev()
        .map(|k| cfg.n_events >> k)
        .filter(|&m| m > 0)
        .collect();
    let mut checkpoints = Vec::with_capacity(marks.len());
    let mut start = x0;
    for i in 1..=cfg.n_events {
        let e = sim.step()?;
        if matches!(e.kind, EventKind::Singular(_)) {
            return Ok(None);
        }
        let dt = e.time - start.t;
        for a in &mut accs {
            a.push(&start, dt);
        }
        grid.deposit(&mut hist, &start, dt, &mut cuts);
        vel[direction_bin(start.v1)] += dt;
        start = e.state;
        if marks.contains(&i) {
            checkpoints.push(Checkpoint {
                events: i,
                time: e.time - x0.t,
                tv: total_variation(&normalized(&hist), &reference.masses),
                running: accs.iter().map(|a| a.running_average()).collect(),
            });
        }
    }
    let occupancy = normalized(&hist);
    Ok(Some(SeedRun {
        seed,
        tv: total_variation(&occupancy, &reference.masses),
        averages: accs.into_iter().map(|a| a.finish()).collect(),
        occupancy,
        velocity: normalized(&vel),
        checkpoints,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSummary {
    pub observable: String,
    pub per_seed: Vec<f64>,
    pub per_seed_stderr: Vec<f64>,
    pub ensemble_mean: f64,
    /// Standard deviation of the per-seed averages.
    pub dispersion: f64,
    pub liouville_mean: f64,
    /// Largest `|average - ensemble mean| / stderr` over seeds.
    pub max_deviation: f64,
}

impl ObservableSummary {
    /// Every seed's average within `k` of its own standard errors of the
    /// ensemble mean.
    pub fn consistent(&self, k: f64) -> bool {
        self.per_seed
            .iter()
            .zip(&self.per_seed_stderr)
            .all(|(a, se)| (a - self.ensemble_mean).abs() <= k * se + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendPoint {
    pub events: usize,
    pub mean_tv: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicityReport {
    pub seeds: Vec<u64>,
    pub halted_seeds: Vec<u64>,
    pub n_events: usize,
    pub observables: Vec<ObservableSummary>,
    /// Pooled occupancy over all cells (sums to 1).
    pub occupancy: Vec<f64>,
    pub reference: LiouvilleReference,
    pub per_seed_tv: Vec<f64>,
    pub effective_samples: f64,
    /// 5%, 50% and 95% quantiles of the calibrated TV distribution.
    pub band: (f64, f64, f64),
    pub trend: Vec<TrendPoint>,
    pub velocity_chi2: f64,
    pub velocity_p_value: f64,
    #[serde(skip)]
    pub runs: Vec<SeedRun>,
}

impl ErgodicityReport {
    pub fn averages_consistent(&self, k: f64) -> bool {
        self.observables.iter().all(|o| o.consistent(k))
    }

    /// Ensemble-mean TV never rises by more than `k` combined standard errors.
    pub fn trend_non_increasing(&self, k: f64) -> bool {
        self.trend.windows(2).all(|w| {
            w[1].mean_tv <= w[0].mean_tv + k * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt()
        })
    }

    /// Every seed's final TV within `factor` times the band's upper edge.
    pub fn tv_within_band(&self, factor: f64) -> bool {
        self.per_seed_tv.iter().all(|tv| *tv <= factor * self.band.2)
    }

    pub fn velocity_uniform(&self, alpha: f64) -> bool {
        self.velocity_p_value > alpha
    }
}

/// Time-weighted occupancy of `(q1, q2)` over the grid for each seed,
/// compared against Liouville cell masses and a multinomial band calibrated
/// by the cross-seed spread. Seeds halting at a singular event are excluded.
pub fn equidistribution_test(
    table: &Table<f64>,
    seeds: &[u64],
    cfg: &EquidistributionConfig,
) -> Result<ErgodicityReport, AnalysisError> {
    if seeds.len() < 5 {
        return Err(AnalysisError::TooFewSeeds { need: 5, got: seeds.len() });
    }
    if cfg.bins < 1 || cfg.n_events < cfg.batches.max(1) || cfg.reference_samples == 0 || cfg.band_draws == 0 {
        return Err(AnalysisError::InvalidParameter(format!("{cfg:?}")));
    }
    let grid = ConfigGrid::new(table, cfg.bins);
    let reference = liouville_reference(table, &grid, &cfg.observables, cfg.reference_samples, cfg.reference_seed)?;
    let outcomes: Vec<(u64, Option<SeedRun>)> = seeds
        .par_iter()
        .map(|&s| run_seed(table, &grid, &reference, s, cfg).map(|r| (s, r)))
        .collect::<Result<_, _>>()?;
    let halted_seeds: Vec<u64> = outcomes.iter().filter(|o| o.1.is_none()).map(|o| o.0).collect();
    let runs: Vec<SeedRun> = outcomes.into_iter().filter_map(|o| o.1).collect();
    if runs.len() < 5 {
        return Err(AnalysisError::TooFewSeeds { need: 5, got: runs.len() });
    }

    let observables = cfg
        .observables
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let per_seed: Vec<f64> = runs.iter().map(|r| r.averages[k].average).collect();
            let per_seed_stderr: Vec<f64> = runs.iter().map(|r| r.averages[k].stderr).collect();
            let (mean, se) = mean_and_stderr(&per_seed);
            let max_deviation = per_seed
                .iter()
                .zip(&per_seed_stderr)
                .map(|(a, s)| if *s > 0.0 { (a - mean).abs() / s } else { 0.0 })
                .fold(0.0, f64::max);
            ObservableSummary {
                observable: o.name(),
                ensemble_mean: mean,
                dispersion: se * (per_seed.len() as f64).sqrt(),
                liouville_mean: reference.means[k],
                max_deviation,
                per_seed,
                per_seed_stderr,
            }
        })
        .collect();

    let occupancies: Vec<Vec<f64>> = runs.iter().map(|r| r.occupancy.clone()).collect();
    let (pooled, var) = bin_moments(&occupancies);
    let n_eff = effective_samples(&reference.masses, &var);
    let band = tv_band(&reference.masses, n_eff, reference.samples, cfg.band_draws, cfg.reference_seed);

    let trend = (0..runs[0].checkpoints.len())
        .map(|c| {
            let tvs: Vec<f64> = runs.iter().map(|r| r.checkpoints[c].tv).collect();
            let (mean_tv, stderr) = mean_and_stderr(&tvs);
            TrendPoint {
                events: runs[0].checkpoints[c].events,
                mean_tv,
                stderr,
            }
        })
        .collect();

    let velocities: Vec<Vec<f64>> = runs.iter().map(|r| r.velocity.clone()).collect();
    let (vmean, vvar) = bin_moments(&velocities);
    let p = 1.0 / VELOCITY_BINS as f64;
    let n_vel = effective_samples(&[p; VELOCITY_BINS], &vvar) * runs.len() as f64;
    let velocity_chi2 = n_vel * vmean.iter().map(|h| (h - p).powi(2) / p).sum::<f64>();
    let velocity_p_value = 1.0
        - ChiSquared::new((VELOCITY_BINS - 1) as f64)
            .expect("positive degrees of freedom")
            .cdf(velocity_chi2);

    Ok(ErgodicityReport {
        seeds: runs.iter().map(|r| r.seed).collect(),
        halted_seeds,
        n_events: cfg.n_events,
        observables,
        occupancy: pooled,
        per_seed_tv: runs.iter().map(|r| r.tv).collect(),
        reference,
        effective_samples: n_eff,
        band,
        trend,
        velocity_chi2,
        velocity_p_value,
        runs,
    })
}

pub const ERGODICITY_CSV_HEADER: &str = "seed,observable,average,stderr";
pub const RUNNING_CSV_HEADER: &str = "seed,events,time,observable,running_average,running_tv";

/// One row per seed per observable.
pub fn write_ergodicity_csv<W: Write + ?Sized>(w: &mut W, report: &ErgodicityReport) -> io::Result<()> {
    writeln!(w, "{ERGODICITY_CSV_HEADER}")?;
    for r in &report.runs {
        for a in &r.averages {
            writeln!(w, "{},{},{},{}", r.seed, a.observable, fmt_f(a.average), fmt_f(a.stderr))?;
        }
    }
    Ok(())
}

/// Running averages and running TV at every prefix checkpoint.
pub fn write_running_csv<W: Write + ?Sized>(w: &mut W, report: &ErgodicityReport) -> io::Result<()> {
    writeln!(w, "{RUNNING_CSV_HEADER}")?;
    for r in &report.runs {
        for c in &r.checkpoints {
            for (a, x) in r.averages.iter().zip(&c.running) {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.seed,
                    c.events,
                    fmt_f(c.time),
                    a.observable,
                    fmt_f(*x),
                    fmt_f(c.tv)
                )?;
            }
        }
    }
    Ok(())
}
