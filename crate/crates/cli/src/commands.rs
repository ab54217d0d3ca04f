//! Subcommand bodies. Each returns whether its verification passed; data
//! rows go to `--out` (or stdout for `simulate`), reports to stdout.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use twoball::analysis::{
    equidistribution_test, lyapunov_estimate, write_ergodicity_csv, write_running_csv, AnalysisError,
    EquidistributionConfig, LyapunovConfig,
};
use twoball::dynamics::{sample_state, simulate, write_trajectory_csv, Budget, DynamicsError};
use twoball::lifting::{cylinder_geometry, lift_check, write_lifted_csv, LiftError, OnsResult};
use twoball::symbolic::{compress_to_short, is_rich, long_sequence, poorness_class, Richness, SymbolicError};
use twoball::sufficiency::{sufficiency_suite, write_sufficiency_csv, SufficiencyError, SuiteConfig, RANK_TOL};
use twoball::tables::{make_table_scaled, Scale, Table, TableError};

use crate::config::{ConfigError, Format, RunConfig};
use crate::Command;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

impl Outcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Passed
        } else {
            Outcome::Failed
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Sufficiency(#[from] SufficiencyError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

const DEFAULT_RADIUS: f64 = 0.1;

fn table(cfg: &RunConfig) -> Result<Table<f64>, CliError> {
    Ok(make_table_scaled(
        cfg.polygon()?,
        cfg.radius.unwrap_or(DEFAULT_RADIUS),
        cfg.scale.unwrap_or(Scale::Container),
    )?)
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn positive(key: &str, v: Option<f64>, default: f64) -> Result<f64, CliError> {
    let x = v.unwrap_or(default);
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(ConfigError::InvalidValue {
            key: key.into(),
            message: format!("{x} is not a positive number"),
        }
        .into())
    }
}

fn with_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn emit(cfg: &RunConfig, out: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => with_file(path, body),
        None => body(out).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn print_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), CliError> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("serializable"))
        .map_err(io_err(Path::new("<stdout>")))
}

fn say(out: &mut dyn Write, text: String) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(io_err(Path::new("<stdout>")))
}

pub fn dispatch(cmd: Command, cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match cmd {
        Command::Simulate => cmd_simulate(cfg, out),
        Command::Sequence => cmd_sequence(cfg, out),
        Command::LiftCheck => cmd_lift_check(cfg, out),
        Command::Suff => cmd_suff(cfg, out),
        Command::Lyapunov => cmd_lyapunov(cfg, out),
        Command::Ergodicity => cmd_ergodicity(cfg, out),
        Command::Ons => cmd_ons(cfg, out),
    }
}

fn initial_state(table: &Table<f64>, cfg: &RunConfig) -> Result<twoball::dynamics::PhaseState<f64>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed(cfg));
    Ok(sample_state(table, &mut rng)?)
}

fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let t = table(cfg)?;
    let s0 = initial_state(&t, cfg)?;
    let budget = match cfg.time {
        Some(time) => Budget::time(positive("time", Some(time), 0.0)?),
        None => Budget::events(cfg.events.unwrap_or(10_000)),
    };
    let traj = simulate(&t, s0, budget)?;
    emit(cfg, out, |w| match cfg.format.unwrap_or_default() {
        Format::Csv => write_trajectory_csv(w, &traj.events),
        Format::Json => {
            let v = json!({
                "polygon": t.polygon().name(),
                "radius": t.radius(),
                "seed": seed(cfg),
                "initial": traj.initial,
                "events": traj.events,
                "halted": traj.halted.map(|k| k.to_string()),
                "energy_drift": traj.energy_drift,
            });
            writeln!(w, "{}", serde_json::to_string_pretty(&v).expect("serializable"))
        }
    })?;
    Ok(Outcome::Passed)
}

fn cmd_sequence(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let t = table(cfg)?;
    let s0 = initial_state(&t, cfg)?;
    let traj = simulate(&t, s0, Budget::events(cfg.events.unwrap_or(1000)))?;
    let long = long_sequence(t.polygon().angle_lcm(), &s0, &traj.events)?;
    let short = compress_to_short(&long);
    let rich = match is_rich(&short) {
        Ok(Richness::Yes { junction, case }) => format!("rich (junction {junction}, case {case})"),
        Ok(Richness::No) => "not rich".to_string(),
        Err(e) => format!("undecided ({e})"),
    };
    let poor = poorness_class(&long);
    emit(cfg, out, |w| match cfg.format.unwrap_or_default() {
        Format::Csv => {
            writeln!(w, "collisions: {}", long.collisions.len())?;
            writeln!(w, "islands: {}", short.islands.len())?;
            writeln!(w, "long: {long}")?;
            writeln!(w, "short: {short}")?;
            writeln!(w, "richness: {rich}")?;
            writeln!(w, "poorness: {poor:?}")
        }
        Format::Json => {
            let v = json!({
                "collisions": long.collisions.len(),
                "islands": short.islands.len(),
                "long": long.to_string(),
                "short": short.to_string(),
                "richness": rich,
                "poorness": poor,
            });
            writeln!(w, "{}", serde_json::to_string_pretty(&v).expect("serializable"))
        }
    })?;
    Ok(Outcome::Passed)
}

fn percent(num: usize, den: usize) -> String {
    if den == 0 {
        return "n/a (no pairs)".into();
    }
    let p = 100.0 * num as f64 / den as f64;
    if num == den {
        "100%".into()
    } else {
        format!("{p:.4}%")
    }
}

fn cmd_lift_check(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let t = table(cfg)?;
    let tol = positive("tol-semiconjugacy", cfg.tol_semiconjugacy, 1e-6)?;
    let c = lift_check(&t, seed(cfg), cfg.events.unwrap_or(10_000))?;
    if let Some(path) = &cfg.out {
        with_file(path, |w| write_lifted_csv(w, &c.lifted))?;
    }
    let r = &c.cylinders;
    if cfg.format == Some(Format::Json) {
        print_json(out, &json!({ "passed": c.passes(tol), "report": c }))?;
    } else {
        let lines = [
            format!("polygon: {}  radius: {}  seed: {}  events: {}", t.polygon(), t.radius(), c.seed, c.events),
            format!("straightness error: {:.3e}", c.max_straightness_error),
            format!(
                "semi-conjugacy: max position {:.3e}, max velocity {:.3e}, label mismatches {} over {} samples",
                c.semiconjugacy.max_position, c.semiconjugacy.max_velocity, c.semiconjugacy.label_mismatches, c.semiconjugacy.samples
            ),
            format!("collisions: {} (search failures {}, label mismatches {})", r.collisions, r.search_failures, r.label_mismatches),
            format!(
                "where-lemma matches: {} ({} of {} pairs)",
                percent(r.predictions - r.prediction_mismatches, r.predictions),
                r.predictions - r.prediction_mismatches,
                r.predictions
            ),
            format!("island constancy: {}", percent(r.island_checks - r.island_mismatches, r.island_checks)),
            format!("reflection sandwiches: {}", percent(r.sandwich_checks - r.sandwich_mismatches, r.sandwich_checks)),
            format!("poor windows: {} (failures {})", c.poor_windows, c.poor_failures),
        ];
        for l in lines {
            say(out, l)?;
        }
    }
    Ok(Outcome::from_bool(c.passes(tol)))
}

fn cmd_suff(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let t = table(cfg)?;
    let suite = SuiteConfig {
        segments_per_class: cfg.segments.unwrap_or(1000),
        delta: positive("tol-fd-delta", cfg.tol_fd_delta, 2e-5)?,
        advance_delta: positive("tol-advance-delta", cfg.tol_advance_delta, 1e-15)?,
        rank_tol: positive("tol-rank", cfg.tol_rank, RANK_TOL)?,
        ..Default::default()
    };
    let conformity = positive("tol-conformity", cfg.tol_conformity, 0.99)?;
    let advance_tol = positive("tol-advance", cfg.tol_advance, 1e-8)?;
    let r = sufficiency_suite(&t, seed(cfg), &suite)?;
    let passed = r.passes(conformity, advance_tol);
    if let Some(path) = &cfg.out {
        with_file(path, |w| write_sufficiency_csv(w, &r.rows))?;
    }
    if cfg.format == Some(Format::Json) {
        print_json(out, &json!({ "passed": passed, "classes": r.classes, "advance_islands": r.advance_islands, "advance_spread": r.advance_spread, "advance_skipped": r.advance_skipped }))?;
    } else {
        say(out, format!("polygon: {}  radius: {}  seed: {}", t.polygon(), t.radius(), seed(cfg)))?;
        for c in &r.classes {
            say(
                out,
                format!(
                    "{}: nullity {} on {}/{} ({:.2}%), flagged {}, unexplained {}; fd null <= {:.2e} delta^2, random >= {:.2e} delta, fd failures {}, skipped {}",
                    c.class.name(),
                    c.expected_nullity,
                    c.conforming,
                    c.segments,
                    100.0 * c.conformity(),
                    c.flagged,
                    c.unexplained(),
                    c.fd_null_max,
                    c.fd_random_min,
                    c.fd_failures,
                    c.fd_skipped
                ),
            )?;
        }
        say(out, format!("island advances: {} islands, max spread {:.3e}, {} segments skipped", r.advance_islands, r.advance_spread, r.advance_skipped))?;
    }
    Ok(Outcome::from_bool(passed))
}

fn cmd_lyapunov(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let t = table(cfg)?;
    let defaults = LyapunovConfig::default();
    let lc = LyapunovConfig {
        n_events: cfg.events.unwrap_or(defaults.n_events),
        renorm_every: cfg.renorm_every.unwrap_or(defaults.renorm_every),
        delta0: cfg.delta0.unwrap_or(defaults.delta0),
        ..defaults
    };
    let k_pos = positive("tol-lyapunov-sigmas", cfg.tol_lyapunov_sigmas, 5.0)?;
    let k_ctl = positive("tol-control-sigmas", cfg.tol_control_sigmas, 3.0)?;
    let r = match lyapunov_estimate(&t, seed(cfg), &lc) {
        Err(AnalysisError::InvalidParameter(m)) => {
            return Err(ConfigError::InvalidValue {
                key: "lyapunov".into(),
                message: m,
            }
            .into())
        }
        other => other?,
    };
    let (pos, ctl) = (r.positive(k_pos), r.control_vanishes(k_ctl));
    if cfg.format == Some(Format::Json) {
        print_json(out, &json!({ "positive": pos, "control_vanishes": ctl, "report": r }))?;
    } else {
        let two = &r.two_balls;
        say(out, format!("polygon: {}  radius: {}  seed: {}", t.polygon(), t.radius(), seed(cfg)))?;
        say(
            out,
            format!(
                "two balls: lambda = {:.6} +- {:.6} ({} renormalizations, {} restarts, {} divergences)",
                two.lambda, two.stderr, two.renormalizations, two.restarts, two.divergences
            ),
        )?;
        say(out, format!("one-ball control: lambda0 = {:.3e} +- {:.3e}", r.control.lambda, r.control.stderr))?;
        say(out, format!("lambda > {k_pos} stderr: {pos}; |lambda0| < {k_ctl} stderr: {ctl}"))?;
    }
    Ok(Outcome::Passed)
}

fn running_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_running.csv"))
}

fn cmd_ergodicity(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let t = table(cfg)?;
    let defaults = EquidistributionConfig::default();
    let ec = EquidistributionConfig {
        n_events: cfg.events.unwrap_or(defaults.n_events),
        bins: cfg.bins.unwrap_or(defaults.bins),
        ..defaults
    };
    let base = seed(cfg);
    let seeds: Vec<u64> = (0..cfg.seeds.unwrap_or(10) as u64).map(|i| base + i).collect();
    let r = match equidistribution_test(&t, &seeds, &ec) {
        Err(e @ (AnalysisError::TooFewSeeds { .. } | AnalysisError::InvalidParameter(_))) => {
            return Err(ConfigError::InvalidValue {
                key: "ergodicity".into(),
                message: e.to_string(),
            }
            .into())
        }
        other => other?,
    };
    let k = positive("tol-consistency", cfg.tol_consistency, 4.0)?;
    let factor = positive("tol-band-factor", cfg.tol_band_factor, 1.5)?;
    let alpha = positive("tol-chi2-alpha", cfg.tol_chi2_alpha, 0.05)?;
    if let Some(path) = &cfg.out {
        with_file(path, |w| write_ergodicity_csv(w, &r))?;
        with_file(&running_path(path), |w| write_running_csv(w, &r))?;
    }
    let checks = json!({
        "averages_consistent": r.averages_consistent(k),
        "trend_non_increasing": r.trend_non_increasing(2.0),
        "tv_within_band": r.tv_within_band(factor),
        "velocity_uniform": r.velocity_uniform(alpha),
    });
    if cfg.format == Some(Format::Json) {
        print_json(out, &json!({ "checks": checks, "report": r }))?;
    } else {
        say(out, format!("polygon: {}  radius: {}  seeds: {:?}  events: {}", t.polygon(), t.radius(), r.seeds, r.n_events))?;
        if !r.halted_seeds.is_empty() {
            say(out, format!("halted seeds (excluded): {:?}", r.halted_seeds))?;
        }
        for o in &r.observables {
            say(
                out,
                format!(
                    "{}: ensemble {:.6} (dispersion {:.2e}), Liouville {:.6}, max |a - mean| / stderr {:.2}",
                    o.observable, o.ensemble_mean, o.dispersion, o.liouville_mean, o.max_deviation
                ),
            )?;
        }
        let tv_max = r.per_seed_tv.iter().cloned().fold(0.0, f64::max);
        say(
            out,
            format!(
                "TV: max per seed {:.4e}, band [{:.4e}, {:.4e}] (n_eff {:.3e})",
                tv_max, r.band.0, r.band.2, r.effective_samples
            ),
        )?;
        let trend: Vec<String> = r.trend.iter().map(|p| format!("{}:{:.4e}", p.events, p.mean_tv)).collect();
        say(out, format!("TV trend: {}", trend.join(" ")))?;
        say(out, format!("velocity direction chi2 {:.3} (p = {:.3})", r.velocity_chi2, r.velocity_p_value))?;
        say(out, format!("checks: {checks}"))?;
    }
    Ok(Outcome::Passed)
}

fn cmd_ons(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let t = table(cfg)?;
    let g = cylinder_geometry(t.group(), t.contact_distance());
    if cfg.format == Some(Format::Json) {
        print_json(out, &json!({ "polygon": t.polygon().name(), "report": g }))?;
    } else {
        let names: Vec<String> = g.rotations.iter().map(|r| r.to_string()).collect();
        say(out, format!("polygon: {}  rotation cylinders: {}", t.polygon(), names.join(" ")))?;
        say(
            out,
            format!(
                "transversality: {} pairs, generator overlaps {}, base overlaps {}",
                g.pairs, g.generator_overlaps, g.base_overlaps
            ),
        )?;
        let dims: Vec<String> = g.reflection_intersections.iter().map(|(r, d)| format!("{r}:{d}")).collect();
        say(out, format!("dim(A_e ∩ A_R): {}", dims.join(" ")))?;
        match &g.ons {
            OnsResult::NoSplit => say(out, "NoSplit".into())?,
            OnsResult::Split { k1, k2, partition } => {
                let fmt = |vs: &[[f64; 4]]| {
                    vs.iter()
                        .map(|v| {
                            // Rounding residue would print as -0.000000.
                            let c = v.map(|x| if x.abs() < 5e-7 { 0.0 } else { x });
                            format!("({:.6}, {:.6}, {:.6}, {:.6})", c[0], c[1], c[2], c[3])
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                let side = |es: &[twoball::group::GroupElement]| es.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",");
                say(out, format!("Split: {{{}}} | {{{}}}", side(&partition.0), side(&partition.1)))?;
                say(out, format!("K1: {}", fmt(k1)))?;
                say(out, format!("K2: {}", fmt(k2)))?;
            }
        }
    }
    Ok(Outcome::from_bool(g.transversal()))
}
