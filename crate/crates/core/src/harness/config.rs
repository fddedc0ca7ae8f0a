//! Experiment configuration: one JSON document, optionally patched by
//! `COOPCR_*` environment variables and `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::HarnessError;
use crate::baselines::{FtmRule, SolveOptions};
use crate::model::ScenarioConfig;

/// Prefix of environment overrides. `COOPCR_SCENARIO__NUM_SUBCARRIERS=32`
/// sets `scenario.num_subcarriers`; a double underscore separates path
/// segments and names are lowercased.
pub const ENV_PREFIX: &str = "COOPCR_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// Transmit SNR in dB; sets the peak power to `10^(snr/10)`.
    SnrDb,
    /// PU rate requirement in bits per OFDM symbol.
    RateRequirement,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::SnrDb => "snr_db",
            SweepVar::RateRequirement => "rate_requirement",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "snr_db" => Some(SweepVar::SnrDb),
            "rate_requirement" => Some(SweepVar::RateRequirement),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
    /// Fixed SNR while sweeping the rate requirement. `None` keeps
    /// `scenario.peak_power`.
    pub snr_db: Option<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            variable: SweepVar::SnrDb,
            values: (0..8).map(|i| 2.0 * i as f64).collect(),
            snr_db: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    Ftm,
    Noncoop,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Ftm, Scheme::Noncoop];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Ftm => "ftm",
            Scheme::Noncoop => "noncoop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// `rng_seed` is ignored; each realization derives its own seed from
    /// `seed`.
    pub scenario: ScenarioConfig,
    pub solver: SolveOptions,
    pub ftm: FtmRule,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    pub realizations: usize,
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub parallel: usize,
    /// Fill `mean_seconds`. Off by default because wall times make the CSV
    /// differ between runs.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            solver: SolveOptions::default(),
            ftm: FtmRule::default(),
            sweep: Sweep::default(),
            schemes: Scheme::ALL.to_vec(),
            realizations: 100,
            seed: 0,
            parallel: 0,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path`, then applies environment overrides and `overrides`
    /// (later ones win).
    pub fn load(
        path: &Path,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[String],
    ) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text, env, overrides)
    }

    pub fn from_json(
        text: &str,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[String],
    ) -> Result<Self, HarnessError> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config is not valid JSON: {e}")))?;
        if !doc.is_object() {
            return Err(HarnessError::Config("config must be a JSON object".into()));
        }
        let schema = serde_json::to_value(Self::default()).expect("default config serializes");
        check_keys(&doc, &schema, "")?;

        let mut patches: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_lowercase().replace("__", "."), v)))
            .collect();
        patches.sort();
        for raw in overrides {
            let (k, v) = raw
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("override `{raw}` is not of the form key=value")))?;
            patches.push((k.trim().to_string(), v.to_string()));
        }
        for (key, raw) in &patches {
            set_path(&mut doc, &schema, key, parse_scalar(raw))?;
        }

        let cfg: Self = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            HarnessError::Config(format!("invalid value for `{path}`: {}", e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schemes.is_empty() {
            return Err(HarnessError::Config("`schemes` must list at least one scheme".into()));
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return Err(HarnessError::Config("`schemes` lists a scheme twice".into()));
        }
        if let Some(v) = self.sweep.values.iter().find(|v| !v.is_finite()) {
            return Err(HarnessError::Config(format!("`sweep.values` contains {v}")));
        }
        if let Some(s) = self.sweep.snr_db {
            if !s.is_finite() {
                return Err(HarnessError::Config("`sweep.snr_db` must be finite".into()));
            }
        }
        for &v in &self.sweep.values {
            self.scenario_at(v)
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Scenario at one sweep point.
    pub fn scenario_at(&self, value: f64) -> ScenarioConfig {
        let mut s = self.scenario.clone();
        match self.sweep.variable {
            SweepVar::SnrDb => s.peak_power = snr_to_power(value),
            SweepVar::RateRequirement => {
                s.pu_rate_requirement = value;
                if let Some(db) = self.sweep.snr_db {
                    s.peak_power = snr_to_power(db);
                }
            }
        }
        s
    }
}

/// Peak power per user over unit noise at the reference gain.
pub fn snr_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Rejects keys of `doc` that the schema does not have. Recurses only
/// where both sides are objects.
fn check_keys(doc: &Value, schema: &Value, prefix: &str) -> Result<(), HarnessError> {
    if let (Value::Object(d), Value::Object(s)) = (doc, schema) {
        for (k, v) in d {
            let path = join(prefix, k);
            match s.get(k) {
                Some(sv) => check_keys(v, sv, &path)?,
                None => return Err(HarnessError::UnknownKey(path)),
            }
        }
    }
    Ok(())
}

fn set_path(doc: &mut Value, schema: &Value, key: &str, value: Value) -> Result<(), HarnessError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::UnknownKey(key.to_string()));
    }
    let mut s = schema;
    for p in &parts {
        s = match s {
            Value::Object(m) => m.get(*p).ok_or_else(|| HarnessError::UnknownKey(key.to_string()))?,
            _ => return Err(HarnessError::UnknownKey(key.to_string())),
        };
    }
    let mut node = doc;
    for (i, p) in parts.iter().enumerate() {
        let map = match node {
            Value::Object(m) => m,
            other => {
                *other = Value::Object(Map::new());
                other.as_object_mut().unwrap()
            }
        };
        if i + 1 == parts.len() {
            map.insert(p.to_string(), value);
            return Ok(());
        }
        node = map.entry(p.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!()
}
