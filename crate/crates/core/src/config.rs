//! Effective run configuration: scenario defaults, then a flat JSON config
//! file, then command-line flags. Keys are the flag names without dashes.

use crate::evolve::RunConfig;
use crate::exec::Execution;
use crate::model::{validate_params, ModelError, ModelParams, RawParams};
use crate::nonlocal::{NonlocalMethod, NAIVE_MAX_POINTS};
use crate::reconstruct::DEFAULT_EPS_SING;
use crate::scenario::{ScenarioError, ScenarioPreset};
use crate::transform::InitialData;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Every key a config file may contain.
pub const KEYS: [&str; 13] = [
    "scenario",
    "lambda",
    "L",
    "N",
    "dt",
    "T",
    "snapshot-every",
    "check-every",
    "epsilon-sing",
    "output-dir",
    "oracle",
    "compensated-sum",
    "input",
];

pub const DEFAULT_OUTPUT_DIR: &str = "charflow-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown option '{0}'; valid options are --{list} (and --config on the command line)", list = KEYS.join(", --"))]
    UnknownFlag(String),
    #[error("conflicting options: {0}")]
    ConflictingOptions(String),
    #[error("no scenario given; pass --scenario <{list}> or set \"scenario\" in the config file", list = ScenarioPreset::names().join("|"))]
    MissingScenario,
    #[error("invalid value for {key}: {message}")]
    InvalidValue { key: &'static str, message: String },
    #[error("{0}; fix the value and rerun")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path} is not a flat JSON object of options: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Partially specified options, from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// Kept real so that non-integer values are reported as such.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(rename = "snapshot-every", default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    #[serde(rename = "check-every", default, skip_serializing_if = "Option::is_none")]
    pub check_every: Option<usize>,
    #[serde(rename = "epsilon-sing", default, skip_serializing_if = "Option::is_none")]
    pub epsilon_sing: Option<f64>,
    #[serde(rename = "output-dir", default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
    #[serde(rename = "compensated-sum", default, skip_serializing_if = "Option::is_none")]
    pub compensated_sum: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

impl ConfigOverrides {
    /// Read a flat JSON object whose keys are option names.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let parse = |message: String| ConfigError::Parse {
            path: PathBuf::new(),
            message,
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| parse(e.to_string()))?;
        let object = value.as_object().ok_or_else(|| parse("expected a JSON object".into()))?;
        if let Some(key) = object.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownFlag(key.clone()));
        }
        let mut object = object.clone();
        // `null` means "not set", as written for an absent input file.
        object.retain(|_, v| !v.is_null());
        serde_json::from_value(serde_json::Value::Object(object)).map_err(|e| parse(e.to_string()))
    }

    /// `self` with every field set in `over` replaced.
    pub fn overlay(self, over: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            scenario: over.scenario.or(self.scenario),
            lambda: over.lambda.or(self.lambda),
            half_width: over.half_width.or(self.half_width),
            n_points: over.n_points.or(self.n_points),
            dt: over.dt.or(self.dt),
            t_end: over.t_end.or(self.t_end),
            snapshot_every: over.snapshot_every.or(self.snapshot_every),
            check_every: over.check_every.or(self.check_every),
            epsilon_sing: over.epsilon_sing.or(self.epsilon_sing),
            output_dir: over.output_dir.or(self.output_dir),
            oracle: over.oracle.or(self.oracle),
            compensated_sum: over.compensated_sum.or(self.compensated_sum),
            input: over.input.or(self.input),
        }
    }

    /// Fill the gaps from the scenario defaults and validate.
    pub fn resolve(self) -> Result<EffectiveConfig, ConfigError> {
        let scenario: ScenarioPreset = self.scenario.as_deref().ok_or(ConfigError::MissingScenario)?.parse()?;
        let d = scenario.defaults();
        let params = validate_params(RawParams {
            lambda: self.lambda.unwrap_or(f64::from(d.lambda)),
            domain_half_width: self.half_width.unwrap_or(d.half_width),
            n_points: self.n_points.unwrap_or(d.n_points),
        })?;
        let cfg = EffectiveConfig {
            scenario,
            lambda: params.lambda(),
            half_width: params.domain_half_width(),
            n_points: params.n_points(),
            dt: self.dt.unwrap_or(d.dt),
            t_end: self.t_end.unwrap_or(d.t_end),
            snapshot_every: self.snapshot_every.unwrap_or(d.snapshot_every),
            check_every: self.check_every.unwrap_or(d.check_every),
            epsilon_sing: self.epsilon_sing.unwrap_or(DEFAULT_EPS_SING),
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            oracle: self.oracle.unwrap_or(false),
            compensated_sum: self.compensated_sum.unwrap_or(false),
            input: self.input,
        };
        cfg.check()?;
        Ok(cfg)
    }
}

/// The complete configuration of one run, echoed as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveConfig {
    pub scenario: ScenarioPreset,
    pub lambda: u32,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub n_points: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(rename = "snapshot-every")]
    pub snapshot_every: usize,
    #[serde(rename = "check-every")]
    pub check_every: usize,
    #[serde(rename = "epsilon-sing")]
    pub epsilon_sing: f64,
    #[serde(rename = "output-dir")]
    pub output_dir: PathBuf,
    pub oracle: bool,
    #[serde(rename = "compensated-sum")]
    pub compensated_sum: bool,
    pub input: Option<PathBuf>,
}

impl EffectiveConfig {
    /// Defaults of `scenario` with nothing overridden.
    pub fn for_scenario(scenario: ScenarioPreset) -> Result<Self, ConfigError> {
        ConfigOverrides {
            scenario: Some(scenario.name().to_string()),
            ..Default::default()
        }
        .resolve()
    }

    fn check(&self) -> Result<(), ConfigError> {
        let invalid = |key, message: &str| {
            Err(ConfigError::InvalidValue {
                key,
                message: message.to_string(),
            })
        };
        if self.oracle && self.compensated_sum {
            return Err(ConfigError::ConflictingOptions(
                "--oracle selects the O(N²) reference sums, which have no compensated variant; drop one of them".into(),
            ));
        }
        if self.oracle && self.n_points > NAIVE_MAX_POINTS {
            return Err(ConfigError::ConflictingOptions(format!(
                "--oracle is limited to N <= {NAIVE_MAX_POINTS}, got N = {}; lower --N or drop --oracle",
                self.n_points
            )));
        }
        match (self.scenario, &self.input) {
            (ScenarioPreset::TabulatedFile, None) => return Err(ScenarioError::MissingInput.into()),
            (s, Some(_)) if s != ScenarioPreset::TabulatedFile => {
                return Err(ConfigError::ConflictingOptions(format!(
                    "--input only applies to --scenario tabulated_file, not {s}; drop --input"
                )))
            }
            _ => {}
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid("dt", "must be positive");
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return invalid("T", "must be positive");
        }
        if self.snapshot_every == 0 {
            return invalid("snapshot-every", "must be at least 1");
        }
        if self.check_every == 0 {
            return invalid("check-every", "must be at least 1");
        }
        if !(self.epsilon_sing > 0.0 && self.epsilon_sing < 1.0) {
            return invalid("epsilon-sing", "must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams::new(self.lambda, self.half_width, self.n_points).expect("validated on resolve")
    }

    pub fn method(&self) -> NonlocalMethod {
        match (self.oracle, self.compensated_sum) {
            (true, _) => NonlocalMethod::Naive,
            (false, true) => NonlocalMethod::FastCompensated,
            (false, false) => NonlocalMethod::Fast,
        }
    }

    pub fn run_config(&self, execution: Execution) -> RunConfig {
        RunConfig {
            dt: self.dt,
            t_end: self.t_end,
            snapshot_every: self.snapshot_every,
            check_every: self.check_every,
            method: self.method(),
            execution,
            ..RunConfig::default()
        }
    }

    pub fn initial_data(&self) -> Result<InitialData, ConfigError> {
        Ok(self.scenario.initial_data(self.input.as_deref())?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(scenario: &str) -> ConfigOverrides {
        ConfigOverrides {
            scenario: Some(scenario.into()),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_come_from_the_scenario() {
        let c = with("peakon").resolve().unwrap();
        assert_eq!((c.lambda, c.n_points, c.half_width), (0, 4096, 40.0));
        assert_eq!(c.model_params().k(), 2);
        assert_eq!(c.method(), NonlocalMethod::Fast);
        assert_eq!(c.output_dir, PathBuf::from(DEFAULT_OUTPUT_DIR));
    }

    #[test]
    fn documented_flag_combinations() {
        let c = ConfigOverrides {
            lambda: Some(0.0),
            n_points: Some(4096),
            t_end: Some(5.0),
            ..with("peakon")
        }
        .resolve()
        .unwrap();
        assert_eq!((c.model_params().k(), c.t_end), (2, 5.0));
        let c = ConfigOverrides {
            lambda: Some(1.0),
            ..with("antipeakon_collision")
        }
        .resolve()
        .unwrap();
        assert_eq!(c.model_params().k(), 4);
        let data = c.initial_data().unwrap();
        assert_eq!(data.value(-2.0), -data.value(2.0));
        assert!((data.value(-2.0) - (1.0 - (-4.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn later_layers_win() {
        let file = ConfigOverrides::from_json(r#"{"scenario": "peakon", "N": 1024, "T": 2.0}"#).unwrap();
        let flags = ConfigOverrides {
            n_points: Some(512),
            lambda: Some(1.0),
            ..Default::default()
        };
        let c = file.overlay(flags).resolve().unwrap();
        assert_eq!((c.n_points, c.t_end, c.lambda), (512, 2.0, 1));
        assert_eq!(c.model_params().k(), 4);
    }

    #[test]
    fn config_json_round_trips() {
        let c = ConfigOverrides {
            dt: Some(5e-4),
            compensated_sum: Some(true),
            ..with("antipeakon_collision")
        }
        .resolve()
        .unwrap();
        let back = ConfigOverrides::from_json(&c.to_json()).unwrap().resolve().unwrap();
        assert_eq!(back, c);
        assert_eq!(back.method(), NonlocalMethod::FastCompensated);
    }

    #[test]
    fn structured_errors() {
        assert!(matches!(
            ConfigOverrides::default().resolve(),
            Err(ConfigError::MissingScenario)
        ));
        assert!(matches!(
            ConfigOverrides::from_json(r#"{"scenario": "peakon", "speed": 3}"#),
            Err(ConfigError::UnknownFlag(k)) if k == "speed"
        ));
        let negative = ConfigOverrides {
            lambda: Some(-2.0),
            ..with("peakon")
        };
        assert!(matches!(
            negative.resolve(),
            Err(ConfigError::Model(ModelError::NegativeLambda(_)))
        ));
        let fractional = ConfigOverrides {
            lambda: Some(0.5),
            ..with("peakon")
        };
        assert!(matches!(
            fractional.resolve(),
            Err(ConfigError::Model(ModelError::NonIntegerLambda(_)))
        ));
        let both = ConfigOverrides {
            oracle: Some(true),
            compensated_sum: Some(true),
            ..with("peakon")
        };
        assert!(matches!(both.resolve(), Err(ConfigError::ConflictingOptions(_))));
        let stray_input = ConfigOverrides {
            input: Some("u0.csv".into()),
            ..with("peakon")
        };
        assert!(matches!(stray_input.resolve(), Err(ConfigError::ConflictingOptions(_))));
        assert!(matches!(
            with("tabulated_file").resolve(),
            Err(ConfigError::Scenario(ScenarioError::MissingInput))
        ));
        assert!(matches!(
            ConfigOverrides::from_json("[1, 2]"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn every_key_is_written() {
        let c = EffectiveConfig::for_scenario(ScenarioPreset::Zero).unwrap();
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected = KEYS.to_vec();
        keys.sort_unstable();
        expected.sort_unstable();
        assert_eq!(keys, expected);
    }
}
