//! Experiment configuration: TOML schema, presets and validation.
//!
//! A document has five sections: `experiment`, `geometry`, `oscillator`,
//! `sweep` and `output`. Only `experiment.kind` is always required; the
//! figure kinds start from their preset and any key given overrides it.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use losmimo_core::FreqPairing;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<&'static str>),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("unknown preset `{0}` (expected fig2, fig3 or fig4)")]
    UnknownPreset(String),
}

fn bad(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Fig2,
    Fig3,
    Fig4,
    Custom,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::Fig4 => "fig4",
            ExperimentKind::Custom => "custom",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2" => Ok(ExperimentKind::Fig2),
            "fig3" => Ok(ExperimentKind::Fig3),
            "fig4" => Ok(ExperimentKind::Fig4),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }
}

/// Channel estimator run on every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Per-antenna least squares, only where `P >= N`.
    Ls,
    /// Class averaging of the raw samples.
    Toeplitz,
    /// Frequency estimate, derotation, then class averaging.
    Consecutive,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Toeplitz => "toeplitz",
            EstimatorKind::Consecutive => "consecutive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Channel,
    Omega,
}

impl Parameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            Parameter::Channel => "channel",
            Parameter::Omega => "omega",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    Antenna,
    Time,
}

impl From<Pairing> for FreqPairing {
    fn from(p: Pairing) -> Self {
        match p {
            Pairing::Antenna => FreqPairing::Antenna,
            Pairing::Time => FreqPairing::Time,
        }
    }
}

/// How the frequency offset bound attached to omega records is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaCrb {
    /// Whole link, one value per structure class and one shared offset.
    Structured,
    /// Single receive antenna with per-transmitter offsets at the drawn
    /// truth, divided by `M` and averaged over trials.
    PerAntenna,
}

/// Pilot count, either fixed or relative to the array size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PilotCount {
    Fixed(usize),
    Full,
    Half,
}

impl PilotCount {
    pub fn resolve(&self, n: usize) -> usize {
        match self {
            PilotCount::Fixed(p) => *p,
            PilotCount::Full => n,
            PilotCount::Half => n / 2,
        }
    }
}

impl fmt::Display for PilotCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PilotCount::Fixed(p) => write!(f, "{p}"),
            PilotCount::Full => f.write_str("N"),
            PilotCount::Half => f.write_str("N/2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawPilot {
    Count(i64),
    Symbolic(String),
}

impl TryFrom<RawPilot> for PilotCount {
    type Error = ConfigError;

    fn try_from(raw: RawPilot) -> Result<Self, ConfigError> {
        match raw {
            RawPilot::Count(p) if p >= 1 => Ok(PilotCount::Fixed(p as usize)),
            RawPilot::Count(p) => Err(bad("sweep.pilots", format!("pilot count {p} must be at least 1"))),
            RawPilot::Symbolic(s) => match s.trim() {
                "N" => Ok(PilotCount::Full),
                "N/2" => Ok(PilotCount::Half),
                other => Err(bad("sweep.pilots", format!("`{other}` is neither a count, \"N\" nor \"N/2\""))),
            },
        }
    }
}

impl From<PilotCount> for RawPilot {
    fn from(p: PilotCount) -> Self {
        match p {
            PilotCount::Fixed(n) => RawPilot::Count(n as i64),
            other => RawPilot::Symbolic(other.to_string()),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    experiment: Option<RawExperiment>,
    geometry: Option<RawGeometry>,
    oscillator: Option<RawOscillator>,
    sweep: Option<RawSweep>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: Option<ExperimentKind>,
    name: Option<String>,
    trials: Option<i64>,
    seed: Option<u64>,
    estimators: Option<Vec<EstimatorKind>>,
    parameters: Option<Vec<Parameter>>,
    pairing: Option<Pairing>,
    omega_crb: Option<OmegaCrb>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    ny: Option<i64>,
    nx: Option<i64>,
    wavelength: Option<f64>,
    distance: Option<f64>,
    symbol_rate: Option<f64>,
    position_sigmas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOscillator {
    omega_variance: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    snr_db: Option<Vec<f64>>,
    pilots: Option<Vec<RawPilot>>,
    antennas: Option<Vec<i64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: String,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub parameters: Vec<Parameter>,
    pub pairing: Pairing,
    pub omega_crb: OmegaCrb,
    /// Array grid rows (y) and columns (x), used when `antennas` is empty.
    pub ny: usize,
    pub nx: usize,
    pub wavelength: f64,
    pub distance: f64,
    pub symbol_rate: f64,
    /// Position error standard deviations; `0` is the ideal array.
    pub position_sigmas: Vec<f64>,
    pub omega_variance: f64,
    pub snr_db: Vec<f64>,
    pub pilots: Vec<PilotCount>,
    /// ULA sizes to sweep; overrides `ny` and `nx` when non-empty.
    pub antennas: Vec<usize>,
    pub output: Option<PathBuf>,
}

pub const DEFAULT_WAVELENGTH: f64 = 0.005;
pub const DEFAULT_DISTANCE: f64 = 5.0;
pub const DEFAULT_SYMBOL_RATE: f64 = 1e9;
pub const DEFAULT_TRIALS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 20_160_521;

fn figure_snr_grid() -> Vec<f64> {
    (0..=10).map(|k| 3.0 * k as f64).collect()
}

impl ExperimentConfig {
    fn base(kind: ExperimentKind) -> Self {
        Self {
            kind,
            name: kind.as_str().to_string(),
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            estimators: Vec::new(),
            parameters: vec![Parameter::Channel, Parameter::Omega],
            pairing: Pairing::Antenna,
            omega_crb: OmegaCrb::Structured,
            ny: 1,
            nx: 1,
            wavelength: DEFAULT_WAVELENGTH,
            distance: DEFAULT_DISTANCE,
            symbol_rate: DEFAULT_SYMBOL_RATE,
            position_sigmas: vec![0.0],
            omega_variance: 0.0,
            snr_db: Vec::new(),
            pilots: Vec::new(),
            antennas: Vec::new(),
            output: None,
        }
    }

    /// 3x3 URA on both sides, no frequency offset, LS against class
    /// averaging with `P` in {1, 3, 6, 9}.
    pub fn fig2() -> Self {
        Self {
            estimators: vec![EstimatorKind::Ls, EstimatorKind::Toeplitz],
            parameters: vec![Parameter::Channel],
            ny: 3,
            nx: 3,
            snr_db: figure_snr_grid(),
            pilots: [1, 3, 6, 9].into_iter().map(PilotCount::Fixed).collect(),
            ..Self::base(ExperimentKind::Fig2)
        }
    }

    /// 6-element ULA, Gaussian frequency offsets, consecutive estimation
    /// with `P` in {2, 4, 6}.
    pub fn fig3() -> Self {
        Self {
            estimators: vec![EstimatorKind::Consecutive],
            pairing: Pairing::Time,
            ny: 6,
            nx: 1,
            omega_variance: 0.3,
            snr_db: figure_snr_grid(),
            pilots: [2, 4, 6].into_iter().map(PilotCount::Fixed).collect(),
            ..Self::base(ExperimentKind::Fig3)
        }
    }

    /// Frequency estimation at 20 dB over ULA sizes 4..=32, ideal and with
    /// position errors of a twentieth of a wavelength.
    pub fn fig4() -> Self {
        Self {
            estimators: vec![EstimatorKind::Consecutive],
            parameters: vec![Parameter::Omega],
            pairing: Pairing::Time,
            ny: 4,
            nx: 1,
            position_sigmas: vec![0.0, DEFAULT_WAVELENGTH / 20.0],
            omega_variance: 0.3,
            snr_db: vec![20.0],
            pilots: vec![PilotCount::Full, PilotCount::Half],
            antennas: (1..=8).map(|k| 4 * k).collect(),
            ..Self::base(ExperimentKind::Fig4)
        }
    }

    pub fn preset(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Fig2 => Self::fig2(),
            ExperimentKind::Fig3 => Self::fig3(),
            ExperimentKind::Fig4 => Self::fig4(),
            ExperimentKind::Custom => Self::base(kind),
        }
    }

    pub fn preset_named(name: &str) -> Result<Self, ConfigError> {
        Ok(Self::preset(name.parse()?))
    }

    /// Array sizes swept, as `(ny, nx)` grids.
    pub fn grids(&self) -> Vec<(usize, usize)> {
        if self.antennas.is_empty() {
            vec![(self.ny, self.nx)]
        } else {
            self.antennas.iter().map(|&n| (n, 1)).collect()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(bad("experiment.trials", "must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(bad("experiment.estimators", "list is empty"));
        }
        if self.parameters.is_empty() {
            return Err(bad("experiment.parameters", "list is empty"));
        }
        if self.ny == 0 || self.nx == 0 {
            return Err(bad("geometry", "ny and nx must be at least 1"));
        }
        for (key, v) in [
            ("geometry.wavelength", self.wavelength),
            ("geometry.distance", self.distance),
            ("geometry.symbol_rate", self.symbol_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(key, format!("{v} must be positive and finite")));
            }
        }
        if self.position_sigmas.is_empty() || self.position_sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(bad("geometry.position_sigmas", "need non-negative finite values"));
        }
        if !(self.omega_variance >= 0.0 && self.omega_variance.is_finite()) {
            return Err(bad("oscillator.omega_variance", "must be non-negative and finite"));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(bad("sweep.snr_db", "need at least one value, none NaN or -inf"));
        }
        if self.pilots.is_empty() {
            return Err(bad("sweep.pilots", "list is empty"));
        }
        if self.antennas.contains(&0) {
            return Err(bad("sweep.antennas", "sizes must be at least 1"));
        }
        for (ny, nx) in self.grids() {
            let n = ny * nx;
            for pilot in &self.pilots {
                let p = pilot.resolve(n);
                if p == 0 {
                    return Err(bad("sweep.pilots", format!("`{pilot}` gives no pilots for N = {n}")));
                }
                if self.estimators.contains(&EstimatorKind::Consecutive) && p < 2 {
                    return Err(bad("sweep.pilots", format!("consecutive estimation needs P >= 2 (N = {n})")));
                }
            }
            if self.estimators.contains(&EstimatorKind::Consecutive) {
                if self.pairing == Pairing::Antenna && n % 2 == 1 {
                    return Err(bad("experiment.pairing", format!("antenna pairing needs an even array size, got {n}")));
                }
                if n < 2 {
                    return Err(bad("geometry", "frequency estimation needs at least two antennas"));
                }
            }
        }
        Ok(())
    }

    fn to_raw(&self) -> RawDocument {
        RawDocument {
            experiment: Some(RawExperiment {
                kind: Some(self.kind),
                name: Some(self.name.clone()),
                trials: Some(self.trials as i64),
                seed: Some(self.seed),
                estimators: Some(self.estimators.clone()),
                parameters: Some(self.parameters.clone()),
                pairing: Some(self.pairing),
                omega_crb: Some(self.omega_crb),
            }),
            geometry: Some(RawGeometry {
                ny: Some(self.ny as i64),
                nx: Some(self.nx as i64),
                wavelength: Some(self.wavelength),
                distance: Some(self.distance),
                symbol_rate: Some(self.symbol_rate),
                position_sigmas: Some(self.position_sigmas.clone()),
            }),
            oscillator: Some(RawOscillator {
                omega_variance: Some(self.omega_variance),
            }),
            sweep: Some(RawSweep {
                snr_db: Some(self.snr_db.clone()),
                pilots: Some(self.pilots.iter().map(|&p| p.into()).collect()),
                antennas: Some(self.antennas.iter().map(|&n| n as i64).collect()),
            }),
            output: Some(RawOutput {
                path: self.output.clone(),
            }),
        }
    }

    /// TOML document that parses back to this configuration.
    pub fn render(&self) -> String {
        toml::to_string(&self.to_raw()).expect("config serializes")
    }
}

fn count(key: &'static str, v: i64) -> Result<usize, ConfigError> {
    usize::try_from(v).map_err(|_| bad(key, format!("{v} is negative")))
}

/// Parses and validates a TOML experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawDocument = toml::from_str(text)?;
    let exp = raw.experiment.unwrap_or_default();
    let geo = raw.geometry.unwrap_or_default();
    let osc = raw.oscillator.unwrap_or_default();
    let sweep = raw.sweep.unwrap_or_default();
    let out = raw.output.unwrap_or_default();

    let Some(kind) = exp.kind else {
        return Err(ConfigError::Missing(vec!["experiment.kind"]));
    };
    if kind == ExperimentKind::Custom {
        let mut missing = Vec::new();
        if exp.estimators.is_none() {
            missing.push("experiment.estimators");
        }
        if sweep.snr_db.is_none() {
            missing.push("sweep.snr_db");
        }
        if sweep.pilots.is_none() {
            missing.push("sweep.pilots");
        }
        if geo.ny.is_none() && sweep.antennas.is_none() {
            missing.push("geometry.ny");
        }
        if !missing.is_empty() {
            return Err(ConfigError::Missing(missing));
        }
    }

    let mut cfg = ExperimentConfig::preset(kind);
    if let Some(v) = exp.name {
        cfg.name = v;
    }
    if let Some(v) = exp.trials {
        cfg.trials = count("experiment.trials", v)?;
    }
    if let Some(v) = exp.seed {
        cfg.seed = v;
    }
    if let Some(v) = exp.estimators {
        cfg.estimators = v;
    }
    if let Some(v) = exp.parameters {
        cfg.parameters = v;
    }
    if let Some(v) = exp.pairing {
        cfg.pairing = v;
    }
    if let Some(v) = exp.omega_crb {
        cfg.omega_crb = v;
    }
    if let Some(v) = geo.ny {
        cfg.ny = count("geometry.ny", v)?;
    }
    if let Some(v) = geo.nx {
        cfg.nx = count("geometry.nx", v)?;
    }
    if let Some(v) = geo.wavelength {
        cfg.wavelength = v;
    }
    if let Some(v) = geo.distance {
        cfg.distance = v;
    }
    if let Some(v) = geo.symbol_rate {
        cfg.symbol_rate = v;
    }
    if let Some(v) = geo.position_sigmas {
        cfg.position_sigmas = v;
    }
    if let Some(v) = osc.omega_variance {
        cfg.omega_variance = v;
    }
    if let Some(v) = sweep.snr_db {
        cfg.snr_db = v;
    }
    if let Some(v) = sweep.pilots {
        cfg.pilots = v.into_iter().map(PilotCount::try_from).collect::<Result<_, _>>()?;
    }
    if let Some(v) = sweep.antennas {
        cfg.antennas = v.into_iter().map(|n| count("sweep.antennas", n)).collect::<Result<_, _>>()?;
    }
    if out.path.is_some() {
        cfg.output = out.path;
    }
    cfg.validate()?;
    Ok(cfg)
}
