//! Run configuration: flags merged over an optional `key = value` file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use twoball::polygon::PolygonId;
use twoball::tables::Scale;

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    ParseError { path: String, line: usize, message: String },
    #[error("{path}:{line}: unknown key '{key}'{}", suggestion.as_ref().map(|s| format!(", did you mean '{s}'?")).unwrap_or_default())]
    UnknownKey {
        path: String,
        line: usize,
        key: String,
        suggestion: Option<String>,
    },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("missing --polygon (one of square, eq-triangle, right-isoceles, right-30-60)")]
    MissingPolygon,
    #[error("invalid value for {key}: {message}")]
    InvalidValue { key: String, message: String },
}

/// Every setting a subcommand may read. `None` means "use the subcommand's
/// default".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub polygon: Option<PolygonId>,
    pub radius: Option<f64>,
    pub scale: Option<Scale>,
    pub seed: Option<u64>,
    pub events: Option<usize>,
    pub time: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seeds: Option<usize>,
    pub segments: Option<usize>,
    pub renorm_every: Option<usize>,
    pub delta0: Option<f64>,
    pub bins: Option<usize>,
    pub tol_semiconjugacy: Option<f64>,
    pub tol_rank: Option<f64>,
    pub tol_conformity: Option<f64>,
    pub tol_advance: Option<f64>,
    pub tol_fd_delta: Option<f64>,
    pub tol_advance_delta: Option<f64>,
    pub tol_lyapunov_sigmas: Option<f64>,
    pub tol_control_sigmas: Option<f64>,
    pub tol_consistency: Option<f64>,
    pub tol_band_factor: Option<f64>,
    pub tol_chi2_alpha: Option<f64>,
}

/// Keys accepted in a config file (flag names without the dashes).
pub const KEYS: [&str; 24] = [
    "polygon",
    "radius",
    "scale",
    "seed",
    "events",
    "time",
    "out",
    "format",
    "seeds",
    "segments",
    "renorm-every",
    "delta0",
    "bins",
    "tol-semiconjugacy",
    "tol-rank",
    "tol-conformity",
    "tol-advance",
    "tol-fd-delta",
    "tol-advance-delta",
    "tol-lyapunov-sigmas",
    "tol-control-sigmas",
    "tol-consistency",
    "tol-band-factor",
    "tol-chi2-alpha",
];

fn nearest_key(key: &str) -> Option<String> {
    KEYS.iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .min()
        .filter(|(d, _)| *d <= 3)
        .map(|(_, k)| k.to_string())
}

fn parse_value<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse '{v}': {e}"))
}

impl RunConfig {
    /// Sets `key` from its text form. `Ok(false)` for an unknown key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "polygon" => self.polygon = Some(parse_value(value)?),
            "radius" => self.radius = Some(parse_value(value)?),
            "scale" => self.scale = Some(parse_value(value)?),
            "seed" => self.seed = Some(parse_value(value)?),
            "events" => self.events = Some(parse_value(value)?),
            "time" => self.time = Some(parse_value(value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = Some(parse_value(value)?),
            "seeds" => self.seeds = Some(parse_value(value)?),
            "segments" => self.segments = Some(parse_value(value)?),
            "renorm-every" => self.renorm_every = Some(parse_value(value)?),
            "delta0" => self.delta0 = Some(parse_value(value)?),
            "bins" => self.bins = Some(parse_value(value)?),
            "tol-semiconjugacy" => self.tol_semiconjugacy = Some(parse_value(value)?),
            "tol-rank" => self.tol_rank = Some(parse_value(value)?),
            "tol-conformity" => self.tol_conformity = Some(parse_value(value)?),
            "tol-advance" => self.tol_advance = Some(parse_value(value)?),
            "tol-fd-delta" => self.tol_fd_delta = Some(parse_value(value)?),
            "tol-advance-delta" => self.tol_advance_delta = Some(parse_value(value)?),
            "tol-lyapunov-sigmas" => self.tol_lyapunov_sigmas = Some(parse_value(value)?),
            "tol-control-sigmas" => self.tol_control_sigmas = Some(parse_value(value)?),
            "tol-consistency" => self.tol_consistency = Some(parse_value(value)?),
            "tol-band-factor" => self.tol_band_factor = Some(parse_value(value)?),
            "tol-chi2-alpha" => self.tol_chi2_alpha = Some(parse_value(value)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Fields set in `over` replace those of `self`.
    pub fn merged_with(self, over: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            polygon,
            radius,
            scale,
            seed,
            events,
            time,
            out,
            format,
            seeds,
            segments,
            renorm_every,
            delta0,
            bins,
            tol_semiconjugacy,
            tol_rank,
            tol_conformity,
            tol_advance,
            tol_fd_delta,
            tol_advance_delta,
            tol_lyapunov_sigmas,
            tol_control_sigmas,
            tol_consistency,
            tol_band_factor,
            tol_chi2_alpha
        )
    }

    pub fn polygon(&self) -> Result<PolygonId, ConfigError> {
        self.polygon.ok_or(ConfigError::MissingPolygon)
    }
}

/// Parses a flat `key = value` file; `#` starts a comment.
pub fn parse_config(path: &str, text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::ParseError {
                path: path.into(),
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        match cfg.set(k, v) {
            Ok(true) => {}
            Ok(false) => {
                return Err(ConfigError::UnknownKey {
                    path: path.into(),
                    line: i + 1,
                    key: k.into(),
                    suggestion: nearest_key(k),
                })
            }
            Err(message) => {
                return Err(ConfigError::ParseError {
                    path: path.into(),
                    line: i + 1,
                    message,
                })
            }
        }
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: name.clone(),
        message: e.to_string(),
    })?;
    parse_config(&name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_blank_lines() {
        let c = parse_config("c", "# run\npolygon = square\n\nradius=0.05  # small\ntol-rank = 1e-9\n").unwrap();
        assert_eq!(c.polygon, Some(PolygonId::Square));
        assert_eq!(c.radius, Some(0.05));
        assert_eq!(c.tol_rank, Some(1e-9));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_config("c", "polygon = square\nradius 0.1\n").unwrap_err();
        assert!(matches!(e, ConfigError::ParseError { line: 2, .. }), "{e}");
        let e = parse_config("c", "seed = -3\n").unwrap_err();
        assert!(matches!(e, ConfigError::ParseError { line: 1, .. }), "{e}");
        let e = parse_config("c", "polygon = hexagon\n").unwrap_err();
        assert!(e.to_string().contains("unknown polygon"), "{e}");
    }

    #[test]
    fn misspelled_key_suggests_nearest() {
        let e = parse_config("c", "\nradus = 0.1\n").unwrap_err();
        assert_eq!(
            e,
            ConfigError::UnknownKey {
                path: "c".into(),
                line: 2,
                key: "radus".into(),
                suggestion: Some("radius".into())
            }
        );
        assert!(e.to_string().contains("did you mean 'radius'"));
        let e = parse_config("c", "zzzzzzzzzzzz = 1\n").unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey { suggestion: None, .. }));
    }

    #[test]
    fn flags_win_over_file() {
        let file = parse_config("c", "polygon = square\nradius = 0.2\n").unwrap();
        let flags = RunConfig {
            polygon: Some(PolygonId::EqTriangle),
            ..Default::default()
        };
        let m = file.merged_with(flags);
        assert_eq!(m.polygon, Some(PolygonId::EqTriangle));
        assert_eq!(m.radius, Some(0.2));
    }

    #[test]
    fn every_key_is_settable() {
        let mut c = RunConfig::default();
        for k in KEYS {
            let v = match k {
                "polygon" => "square",
                "scale" => "eroded",
                "format" => "json",
                "out" => "x.csv",
                _ => "1",
            };
            assert_eq!(c.set(k, v), Ok(true), "{k}");
        }
    }
}
