//! Command-line front end: argument parsing, configuration merging and the
//! subcommands. `run` returns the process exit code.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{load_config, ConfigError, Format, RunConfig};
use twoball::polygon::PolygonId;
use twoball::tables::Scale;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "twoball", version, about = "Two hard disks in the integrable polygons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate and write the trajectory (CSV or JSON).
    Simulate,
    /// Long and short collision sequences with richness and poorness.
    Sequence,
    /// Lift to the cylindric billiard and check the lifting invariants.
    LiftCheck,
    /// Sufficiency suite over sampled segments of every class.
    Suff,
    /// Largest Lyapunov exponent with the one-ball control.
    Lyapunov,
    /// Birkhoff averages and configuration equidistribution over seeds.
    Ergodicity,
    /// Transversality and orthogonal splitting of the rotation cylinders.
    Ons,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// square | eq-triangle | right-isoceles | right-30-60
    #[arg(long, global = true, value_parser = clap::value_parser!(PolygonId))]
    pub polygon: Option<PolygonId>,
    /// Disk radius [default: 0.1]
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Length unit: container (container longest side 1) or eroded [default: container]
    #[arg(long, global = true, value_parser = clap::value_parser!(Scale))]
    pub scale: Option<Scale>,
    /// Seed of the initial-state sampler [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Event budget (default depends on the subcommand)
    #[arg(long, global = true)]
    pub events: Option<usize>,
    /// Time budget for `simulate` (overrides --events)
    #[arg(long, global = true)]
    pub time: Option<f64>,
    /// Output file for the data rows
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Flat `key = value` file; flags win over its entries
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Ensemble size for `ergodicity` [default: 10]
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    /// Segments per class for `suff` [default: 1000]
    #[arg(long, global = true)]
    pub segments: Option<usize>,
    /// Events between renormalizations for `lyapunov` [default: 10]
    #[arg(long, global = true)]
    pub renorm_every: Option<usize>,
    /// Initial separation for `lyapunov` [default: 1e-9]
    #[arg(long, global = true)]
    pub delta0: Option<f64>,
    /// Grid bins per coordinate for `ergodicity` [default: 8]
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Semi-conjugacy deviation bound [default: 1e-6]
    #[arg(long, global = true)]
    pub tol_semiconjugacy: Option<f64>,
    /// Relative singular-value threshold for nullities [default: 1e-8]
    #[arg(long, global = true)]
    pub tol_rank: Option<f64>,
    /// Minimum conforming fraction per segment class [default: 0.99]
    #[arg(long, global = true)]
    pub tol_conformity: Option<f64>,
    /// Within-island advance agreement [default: 1e-8]
    #[arg(long, global = true)]
    pub tol_advance: Option<f64>,
    /// Step of the finite-difference neutral oracle [default: 2e-5]
    #[arg(long, global = true)]
    pub tol_fd_delta: Option<f64>,
    /// Step of the advance measurements, replayed in 1024-bit fixed point [default: 1e-15]
    #[arg(long, global = true)]
    pub tol_advance_delta: Option<f64>,
    /// Standard errors by which lambda must exceed 0 [default: 5]
    #[arg(long, global = true)]
    pub tol_lyapunov_sigmas: Option<f64>,
    /// Standard errors within which the control must vanish [default: 3]
    #[arg(long, global = true)]
    pub tol_control_sigmas: Option<f64>,
    /// Standard errors for Birkhoff-average agreement [default: 4]
    #[arg(long, global = true)]
    pub tol_consistency: Option<f64>,
    /// Factor on the TV band's upper edge [default: 1.5]
    #[arg(long, global = true)]
    pub tol_band_factor: Option<f64>,
    /// Significance level of the velocity chi-square [default: 0.05]
    #[arg(long, global = true)]
    pub tol_chi2_alpha: Option<f64>,
}

impl Flags {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            polygon: self.polygon,
            radius: self.radius,
            scale: self.scale,
            seed: self.seed,
            events: self.events,
            time: self.time,
            out: self.out.clone(),
            format: self.format,
            seeds: self.seeds,
            segments: self.segments,
            renorm_every: self.renorm_every,
            delta0: self.delta0,
            bins: self.bins,
            tol_semiconjugacy: self.tol_semiconjugacy,
            tol_rank: self.tol_rank,
            tol_conformity: self.tol_conformity,
            tol_advance: self.tol_advance,
            tol_fd_delta: self.tol_fd_delta,
            tol_advance_delta: self.tol_advance_delta,
            tol_lyapunov_sigmas: self.tol_lyapunov_sigmas,
            tol_control_sigmas: self.tol_control_sigmas,
            tol_consistency: self.tol_consistency,
            tol_band_factor: self.tol_band_factor,
            tol_chi2_alpha: self.tol_chi2_alpha,
        }
    }
}

/// Flags merged over the config file named by `--config`, if any.
pub fn resolve_config(flags: &Flags) -> Result<RunConfig, ConfigError> {
    let base = match &flags.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    Ok(base.merged_with(flags.to_config()))
}

/// Parses `args`, runs the subcommand and returns the exit code. Reports go
/// to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(stdout, "{}", e.render())
            } else {
                write!(stderr, "{}", e.render())
            };
            return code;
        }
    };
    let cfg = match resolve_config(&cli.flags) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID;
        }
    };
    match commands::dispatch(cli.command, &cfg, stdout) {
        Ok(commands::Outcome::Passed) => EXIT_OK,
        Ok(commands::Outcome::Failed) => {
            let _ = writeln!(stderr, "verification failed");
            EXIT_VERIFICATION
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INVALID
        }
    }
}
