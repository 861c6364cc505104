//! Run configuration: JSON file, `key=value` overrides, defaults and
//! validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use usdpns_core::analysis::{Scenario, SweepGrid};
use usdpns_core::attack::{AttackSettings, UsdCeiling, UsdPerformance};
use usdpns_core::channel::{
    loss_db_from_eta, ChannelParams, GainModel, DEFAULT_DARK_COUNT, DEFAULT_DETECTOR_EFFICIENCY, DEFAULT_MISALIGNMENT,
};
use usdpns_core::source::SourceConfig;

/// Overall loss used when neither `channel.loss_db` nor `channel.eta` is set.
pub const DEFAULT_LOSS_DB: f64 = 38.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{origin}: line {line}, column {column}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("override `{0}` must have the form key=value")]
    Override(String),
}

impl ConfigError {
    fn field(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Field {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub mu: f64,
    pub nu: f64,
    pub theta_s: f64,
    pub theta_d: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            mu: 0.5,
            nu: 0.1,
            theta_s: 0.0,
            theta_d: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Overall loss in dB, detector included.
    pub loss_db: Option<f64>,
    /// Overall efficiency, detector included.
    pub eta: Option<f64>,
    pub y0: f64,
    pub e_d: f64,
    /// Only used to report the fibre share of the loss.
    pub detector_efficiency: f64,
    /// Whether `y0` is added to the modelled gains.
    pub background_in_gain: bool,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            loss_db: None,
            eta: None,
            y0: DEFAULT_DARK_COUNT,
            e_d: DEFAULT_MISALIGNMENT,
            detector_efficiency: DEFAULT_DETECTOR_EFFICIENCY,
            background_in_gain: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdealUsd {
    Optimal,
    LinearOptics,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UsdSection {
    pub q_mu: Option<f64>,
    pub q_nu: Option<f64>,
    pub xi_mu: Option<f64>,
    pub xi_nu: Option<f64>,
    /// Perfect discrimination at the optimal or linear-optics ceiling.
    pub ideal: Option<IdealUsd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub n_trunc: usize,
    pub enforce_errors: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let a = AttackSettings::default();
        Self {
            n_trunc: a.n_trunc,
            enforce_errors: a.enforce_errors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub start_db: f64,
    pub end_db: f64,
    pub step_db: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            start_db: 0.0,
            end_db: 60.0,
            step_db: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_pulses: u64,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_pulses: 1_000_000,
            seed: 1,
        }
    }
}

/// Configuration as written by the user.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub source: SourceSection,
    pub channel: ChannelSection,
    pub usd: UsdSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub mc: McSection,
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub channel: ChannelParams,
    pub detector_efficiency: f64,
    pub usd: UsdPerformance,
    pub attack: AttackSettings,
    pub sweep: SweepSection,
    pub mc: McSection,
}

impl RunConfig {
    pub fn loss_db(&self) -> f64 {
        self.channel.loss_db()
    }

    /// Loss attributable to the fibre once the detector's share is removed.
    pub fn fiber_loss_db(&self) -> f64 {
        self.loss_db() - loss_db_from_eta(self.detector_efficiency)
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            source: self.source,
            usd: self.usd,
            channel: self.channel,
            attack: self.attack,
        }
    }

    pub fn grid(&self) -> Result<SweepGrid, ConfigError> {
        SweepGrid::new(self.sweep.start_db, self.sweep.end_db, self.sweep.step_db).map_err(|_| {
            ConfigError::field(
                "sweep",
                format!(
                    "empty or invalid range: start_db {} must be below end_db {} with step_db {} > 0",
                    self.sweep.start_db, self.sweep.end_db, self.sweep.step_db
                ),
            )
        })
    }
}

/// Reads `path` (if any), applies `overrides` and validates the result.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let (mut value, origin) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.display().to_string(),
                source,
            })?;
            (parse_json(&text, &p.display().to_string())?, p.display().to_string())
        }
        None => (Value::Object(Map::new()), "<defaults>".to_string()),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let raw = from_value(value, &origin)?;
    validate(&raw)
}

/// Parses configuration text; convenient for tests and embedding.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut value = parse_json(text, "<inline>")?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    validate(&from_value(value, "<inline>")?)
}

fn parse_json(text: &str, origin: &str) -> Result<Value, ConfigError> {
    if text.trim().is_empty() {
        return Ok(Value::Object(Map::new()));
    }
    serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn from_value(value: Value, origin: &str) -> Result<RawConfig, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { origin.to_string() } else { path };
        ConfigError::Field {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

/// Sets a dotted path such as `source.mu=0.3`. The value is read as JSON
/// when possible and as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .filter(|(k, _)| !k.trim().is_empty())
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(ConfigError::field(&parts[..i].join("."), "is not a section"));
        };
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), value);
            return Ok(());
        }
        node = map
            .entry((*part).to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn finite(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::field(path, format!("must be finite (got {v})")))
    }
}

fn probability(path: &str, v: f64) -> Result<f64, ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError::field(path, format!("must lie in [0, 1] (got {v})")))
    }
}

pub fn validate(raw: &RawConfig) -> Result<RunConfig, ConfigError> {
    let s = &raw.source;
    if !(finite("source.mu", s.mu)? > 0.0) {
        return Err(ConfigError::field("source.mu", format!("must be positive (got {})", s.mu)));
    }
    if !(finite("source.nu", s.nu)? >= 0.0) {
        return Err(ConfigError::field("source.nu", format!("must be nonnegative (got {})", s.nu)));
    }
    if s.mu <= s.nu {
        return Err(ConfigError::field(
            "source.mu",
            format!("must exceed source.nu (got mu = {}, nu = {})", s.mu, s.nu),
        ));
    }
    finite("source.theta_s", s.theta_s)?;
    finite("source.theta_d", s.theta_d)?;
    let source = SourceConfig::new(s.mu, s.nu, s.theta_s, s.theta_d)
        .map_err(|e| ConfigError::field("source", e.to_string()))?;

    let c = &raw.channel;
    let eta = match (c.loss_db, c.eta) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::field("channel", "set either loss_db or eta, not both"));
        }
        (Some(loss), None) => {
            if !(finite("channel.loss_db", loss)? >= 0.0) {
                return Err(ConfigError::field("channel.loss_db", format!("must be nonnegative (got {loss})")));
            }
            10f64.powf(-loss / 10.0)
        }
        (None, Some(eta)) => {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(ConfigError::field("channel.eta", format!("must lie in (0, 1] (got {eta})")));
            }
            eta
        }
        (None, None) => 10f64.powf(-DEFAULT_LOSS_DB / 10.0),
    };
    if !(0.0..1.0).contains(&c.y0) {
        return Err(ConfigError::field("channel.y0", format!("must lie in [0, 1) (got {})", c.y0)));
    }
    if !(0.0..=0.5).contains(&c.e_d) {
        return Err(ConfigError::field("channel.e_d", format!("must lie in [0, 0.5] (got {})", c.e_d)));
    }
    if !(c.detector_efficiency > 0.0 && c.detector_efficiency <= 1.0) {
        return Err(ConfigError::field(
            "channel.detector_efficiency",
            format!("must lie in (0, 1] (got {})", c.detector_efficiency),
        ));
    }
    let gain_model = if c.background_in_gain {
        GainModel::WithBackground
    } else {
        GainModel::SignalOnly
    };
    let channel = ChannelParams::new(eta, c.y0, c.e_d)
        .map_err(|e| ConfigError::field("channel", e.to_string()))?
        .with_gain_model(gain_model);

    let u = &raw.usd;
    let usd = match u.ideal {
        Some(ideal) => {
            if u.q_mu.is_some() || u.q_nu.is_some() || u.xi_mu.is_some() || u.xi_nu.is_some() {
                return Err(ConfigError::field("usd.ideal", "cannot be combined with explicit q/xi values"));
            }
            let ceiling = match ideal {
                IdealUsd::Optimal => UsdCeiling::Optimal,
                IdealUsd::LinearOptics => UsdCeiling::LinearOptics,
            };
            UsdPerformance::at_ceiling(&source, ceiling)
        }
        None => {
            let m = UsdPerformance::experimental();
            UsdPerformance::new(
                probability("usd.q_mu", u.q_mu.unwrap_or(m.q_mu()))?,
                probability("usd.q_nu", u.q_nu.unwrap_or(m.q_nu()))?,
                probability("usd.xi_mu", u.xi_mu.unwrap_or(m.xi_mu()))?,
                probability("usd.xi_nu", u.xi_nu.unwrap_or(m.xi_nu()))?,
            )
            .map_err(|e| ConfigError::field("usd", e.to_string()))?
        }
    };

    if raw.solver.n_trunc == 0 {
        return Err(ConfigError::field("solver.n_trunc", "must be at least 1"));
    }
    if raw.mc.n_pulses == 0 {
        return Err(ConfigError::field("mc.n_pulses", "must be at least 1"));
    }
    for (path, v) in [
        ("sweep.start_db", raw.sweep.start_db),
        ("sweep.end_db", raw.sweep.end_db),
        ("sweep.step_db", raw.sweep.step_db),
    ] {
        finite(path, v)?;
    }

    Ok(RunConfig {
        source,
        channel,
        detector_efficiency: c.detector_efficiency,
        usd,
        attack: AttackSettings {
            n_trunc: raw.solver.n_trunc,
            enforce_errors: raw.solver.enforce_errors,
        },
        sweep: raw.sweep.clone(),
        mc: raw.mc.clone(),
    })
}
