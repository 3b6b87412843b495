//! Run configuration.
//!
//! Configs are TOML files with one section per concern. Frequencies are
//! ordinary frequencies in GHz and durations are in microseconds; both are
//! converted to rad/s and seconds when a section is resolved.
//!
//! ```toml
//! [run]
//! seed = 7
//!
//! [transmon]
//! ej_over_ec = 45.6
//! ec = 0.29208
//! levels = 4
//!
//! [coupling]
//! g = 0.1
//! omega_r = 7.2475
//!
//! [readout]
//! kappa = 0.005
//! drive = 0.1
//! duration = 0.35
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use qudit_readout::assignment::Method;
use qudit_readout::dispersive::{CouplingSpec, DispersiveModel};
use qudit_readout::readout::{Frame, ReadoutConfig};
use qudit_readout::spectrum::{eigenenergies, fit_ej_ec, Spectrum, TransmonParams, DEFAULT_N_CUT};
use qudit_readout::strategies::{
    StrategyScenario, DEFAULT_GRID_POINTS, DEFAULT_SD_SAMPLES, DEFAULT_SEEDS,
};
use qudit_readout::units::{ghz_to_rad, us_to_s};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Name of the offending field for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TransmonSection {
    pub ej_over_ec: Option<f64>,
    pub ec: Option<f64>,
    pub omega01: Option<f64>,
    pub alpha1: Option<f64>,
    pub n_g: Option<Vec<f64>>,
    pub levels: Option<usize>,
    pub n_cut: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub g: Option<f64>,
    pub omega_r: Option<f64>,
    /// Frequency of a qudit drive at which to report the two-photon factors.
    pub qudit_drive: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSection {
    pub kappa: Option<f64>,
    pub drive: Option<f64>,
    pub phi: Option<f64>,
    pub duration: Option<f64>,
    pub omega_d: Option<f64>,
    pub omega_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AssignmentSection {
    pub sigma: Option<f64>,
    /// Cloud width relative to the circle diameter `Omega / kappa`.
    pub sigma_over_diameter: Option<f64>,
    pub method: Option<String>,
    pub samples: Option<usize>,
    pub centers: Option<PathBuf>,
    pub frame: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InferSection {
    pub matrices: Option<Vec<PathBuf>>,
    pub counts: Option<PathBuf>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub shots: Option<usize>,
    pub seeds: Option<usize>,
    pub kappas: Option<Vec<f64>>,
    pub sigmas: Option<Vec<f64>>,
    /// Cloud widths as `sigma kappa / Omega`.
    pub widths: Option<Vec<f64>>,
    pub grid_points: Option<usize>,
    pub sd_samples: Option<usize>,
    pub mc_samples: Option<usize>,
    pub frame: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CatalogSection {
    pub devices: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub transmon: TransmonSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default)]
    pub readout: ReadoutSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub assignment: AssignmentSection,
    #[serde(default)]
    pub infer: InferSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub catalog: CatalogSection,
}

/// A parsed configuration together with its source text. Relative paths in
/// the file resolve against `base_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub text: String,
    pub base_dir: PathBuf,
}

pub fn load_config(path: &Path) -> ConfigResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = fs::canonicalize(&base).unwrap_or(base);
    parse_config(&text, &base)
}

pub fn parse_config(text: &str, base_dir: &Path) -> ConfigResult<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    Ok(RunConfig {
        raw,
        text: text.to_string(),
        base_dir: base_dir.to_path_buf(),
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn require<T: Copy>(value: Option<T>, field: &str, section: &str) -> ConfigResult<T> {
    value.ok_or_else(|| ConfigError::validation(field, format!("missing from [{section}]")))
}

fn positive(value: f64, field: &str) -> ConfigResult<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::validation(
            field,
            format!("must be positive, got {value}"),
        ))
    }
}

fn finite(value: f64, field: &str) -> ConfigResult<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::validation(
            field,
            format!("must be finite, got {value}"),
        ))
    }
}

pub fn parse_frame(label: &str, field: &str) -> ConfigResult<Frame> {
    match label {
        "drive" => Ok(Frame::Drive),
        "modulation" => Ok(Frame::Modulation),
        other => Err(ConfigError::validation(
            field,
            format!("expected \"drive\" or \"modulation\", got {other:?}"),
        )),
    }
}

/// Method requested for an assignment matrix; `Auto` tries the closed form first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Fixed(Method),
    Auto,
}

impl MethodChoice {
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, MethodChoice::Fixed(Method::Owen))
    }
}

/// Transmon inputs resolved to rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmonSpec {
    pub params: TransmonParams,
    pub levels: usize,
    pub n_g: Vec<f64>,
}

impl RunConfig {
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Master seed, with an explicit override taking precedence.
    pub fn seed(&self, cli: Option<u64>) -> Option<u64> {
        cli.or(self.raw.run.seed)
    }

    pub fn transmon(&self) -> ConfigResult<TransmonSpec> {
        let t = &self.raw.transmon;
        let levels = t.levels.unwrap_or(4);
        if levels < 2 {
            return Err(ConfigError::validation("levels", "need at least 2 levels"));
        }
        let n_cut = t.n_cut.unwrap_or(DEFAULT_N_CUT);
        let params = match (t.ej_over_ec, t.omega01, t.alpha1) {
            (Some(ratio), None, None) => {
                let ec = positive(require(t.ec, "ec", "transmon")?, "ec")?;
                TransmonParams::new(positive(ratio, "ej_over_ec")?).with_ec(ghz_to_rad(ec))
            }
            (None, Some(w), Some(a)) => {
                if t.ec.is_some() {
                    return Err(ConfigError::validation(
                        "ec",
                        "not used when omega01 and alpha1 are given",
                    ));
                }
                positive(w, "omega01")?;
                if !(a < 0.0) {
                    return Err(ConfigError::validation(
                        "alpha1",
                        format!("must be negative, got {a}"),
                    ));
                }
                let fit = fit_ej_ec(ghz_to_rad(w), ghz_to_rad(a))
                    .map_err(|e| ConfigError::validation("alpha1", e.to_string()))?;
                fit.params()
            }
            (None, Some(_), None) => {
                return Err(ConfigError::validation("alpha1", "missing from [transmon]"))
            }
            (None, None, Some(_)) => {
                return Err(ConfigError::validation(
                    "omega01",
                    "missing from [transmon]",
                ))
            }
            (None, None, None) => {
                return Err(ConfigError::validation(
                    "ej_over_ec",
                    "[transmon] needs ej_over_ec and ec, or omega01 and alpha1",
                ))
            }
            _ => {
                return Err(ConfigError::validation(
                    "ej_over_ec",
                    "give either ej_over_ec or (omega01, alpha1), not both",
                ))
            }
        };
        let n_g = t.n_g.clone().unwrap_or_else(|| vec![0.0, 0.5]);
        for &x in &n_g {
            finite(x, "n_g")?;
        }
        Ok(TransmonSpec {
            params: params.with_n_cut(n_cut),
            levels,
            n_g,
        })
    }

    pub fn coupling(&self) -> ConfigResult<CouplingSpec> {
        let c = &self.raw.coupling;
        let g = positive(require(c.g, "g", "coupling")?, "g")?;
        let omega_r = positive(require(c.omega_r, "omega_r", "coupling")?, "omega_r")?;
        CouplingSpec::new(ghz_to_rad(g), ghz_to_rad(omega_r))
            .map_err(|e| ConfigError::validation("g", e.to_string()))
    }

    /// Spectrum with one level beyond the qudit, as the shifts need it.
    pub fn spectrum_for_shifts(&self) -> ConfigResult<(TransmonSpec, Spectrum)> {
        let t = self.transmon()?;
        let s = eigenenergies(&t.params, t.levels + 1)
            .map_err(|e| ConfigError::validation("n_cut", e.to_string()))?;
        Ok((t, s))
    }

    pub fn dispersive(&self) -> ConfigResult<DispersiveModel> {
        let (t, s) = self.spectrum_for_shifts()?;
        let c = self.coupling()?;
        DispersiveModel::new(s.bare_energies(), &c, t.levels)
            .map_err(|e| ConfigError::validation("g", e.to_string()))
    }

    pub fn readout(&self) -> ConfigResult<ReadoutConfig> {
        let r = &self.raw.readout;
        let omega_r = ghz_to_rad(positive(
            require(self.raw.coupling.omega_r, "omega_r", "coupling")?,
            "omega_r",
        )?);
        let kappa = positive(require(r.kappa, "kappa", "readout")?, "kappa")?;
        let drive = positive(require(r.drive, "drive", "readout")?, "drive")?;
        let duration = positive(require(r.duration, "duration", "readout")?, "duration")?;
        let phi = finite(r.phi.unwrap_or(0.0), "phi")?;
        let omega_d = r
            .omega_d
            .map(|w| positive(w, "omega_d"))
            .transpose()?
            .map_or(omega_r, ghz_to_rad);
        let omega_m = r
            .omega_m
            .map(|w| positive(w, "omega_m"))
            .transpose()?
            .map_or(omega_r, ghz_to_rad);
        Ok(ReadoutConfig {
            omega_r,
            kappa: ghz_to_rad(kappa),
            drive: ghz_to_rad(drive),
            phi,
            duration: us_to_s(duration),
            omega_d,
            omega_m,
        })
    }

    /// Drive-frequency grid in rad/s.
    pub fn sweep_grid(&self) -> ConfigResult<Vec<f64>> {
        let s = &self.raw.sweep;
        let start = positive(require(s.start, "start", "sweep")?, "start")?;
        let stop = positive(require(s.stop, "stop", "sweep")?, "stop")?;
        let points = require(s.points, "points", "sweep")?;
        if points < 2 {
            return Err(ConfigError::validation(
                "points",
                "need at least 2 grid points",
            ));
        }
        if !(stop > start) {
            return Err(ConfigError::validation("stop", "must exceed start"));
        }
        Ok(qudit_readout::readout::frequency_grid(
            ghz_to_rad(start),
            ghz_to_rad(stop),
            points,
        ))
    }

    /// Absolute cloud width, or `None` when the section gives none.
    pub fn sigma(&self) -> ConfigResult<Option<f64>> {
        let a = &self.raw.assignment;
        match (a.sigma, a.sigma_over_diameter) {
            (Some(s), None) => Ok(Some(positive(s, "sigma")?)),
            (None, Some(r)) => {
                let cfg = self.readout()?;
                Ok(Some(
                    positive(r, "sigma_over_diameter")? * cfg.circle_diameter(),
                ))
            }
            (None, None) => Ok(None),
            _ => Err(ConfigError::validation(
                "sigma",
                "give sigma or sigma_over_diameter, not both",
            )),
        }
    }

    pub fn method(&self) -> ConfigResult<MethodChoice> {
        match self.raw.assignment.method.as_deref().unwrap_or("auto") {
            "owen" => Ok(MethodChoice::Fixed(Method::Owen)),
            "mc" => Ok(MethodChoice::Fixed(Method::Mc)),
            "auto" => Ok(MethodChoice::Auto),
            other => Err(ConfigError::validation(
                "method",
                format!("expected \"owen\", \"mc\" or \"auto\", got {other:?}"),
            )),
        }
    }

    pub fn assignment_frame(&self) -> ConfigResult<Frame> {
        parse_frame(
            self.raw.assignment.frame.as_deref().unwrap_or("drive"),
            "frame",
        )
    }

    /// Strategy template and the `(kappa, sigma)` pairs to sweep, in rad/s
    /// and phase-space units.
    pub fn strategy(&self, seed: u64) -> ConfigResult<(StrategyScenario, Vec<(f64, f64)>, usize)> {
        let s = &self.raw.strategy;
        let model = self.dispersive()?;
        let readout = self.readout()?;
        let shots = require(s.shots, "shots", "strategy")?;
        if shots == 0 {
            return Err(ConfigError::validation("shots", "must be positive"));
        }
        let kappas: Vec<f64> = match &s.kappas {
            Some(k) if !k.is_empty() => k
                .iter()
                .map(|&x| positive(x, "kappas").map(ghz_to_rad))
                .collect::<ConfigResult<_>>()?,
            Some(_) => return Err(ConfigError::validation("kappas", "empty list")),
            None => vec![readout.kappa],
        };
        let pairs: Vec<(f64, f64)> = match (&s.sigmas, &s.widths) {
            (Some(sig), None) if !sig.is_empty() => {
                for &x in sig {
                    positive(x, "sigmas")?;
                }
                kappas
                    .iter()
                    .flat_map(|&k| sig.iter().map(move |&x| (k, x)))
                    .collect()
            }
            (None, Some(w)) if !w.is_empty() => {
                for &x in w {
                    positive(x, "widths")?;
                }
                kappas
                    .iter()
                    .flat_map(|&k| w.iter().map(move |&x| (k, x * readout.drive / k)))
                    .collect()
            }
            (None, None) => {
                let sigma = self.sigma()?.ok_or_else(|| {
                    ConfigError::validation("sigmas", "[strategy] needs sigmas or widths")
                })?;
                kappas.iter().map(|&k| (k, sigma)).collect()
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::validation(
                    "sigmas",
                    "give sigmas or widths, not both",
                ))
            }
            (Some(_), None) => return Err(ConfigError::validation("sigmas", "empty list")),
            (None, Some(_)) => return Err(ConfigError::validation("widths", "empty list")),
        };
        let mut sc = StrategyScenario::new(model.chi, readout, pairs[0].1, shots, seed);
        sc.frame = parse_frame(s.frame.as_deref().unwrap_or("drive"), "frame")?;
        sc.grid_points = s.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
        sc.sd_samples = s.sd_samples.unwrap_or(DEFAULT_SD_SAMPLES);
        if let Some(n) = s.mc_samples {
            sc.mc_samples = n;
        }
        sc.validate()
            .map_err(|e| ConfigError::validation("strategy", e.to_string()))?;
        let seeds = s.seeds.unwrap_or(DEFAULT_SEEDS);
        if seeds == 0 {
            return Err(ConfigError::validation("seeds", "must be positive"));
        }
        Ok((sc, pairs, seeds))
    }
}
