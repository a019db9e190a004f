//! JSON scenario files.
//!
//! ```json
//! {
//!   "physical_params": {"m1": 0.5, "m2": 0.4, "l1": 0.4, "l2": 0.3, "lc1": 0.2,
//!                       "lc2": 0.15, "J1": 0.0067, "J2": 0.003, "g": 9.8},
//!   "topology": {"adjacency": [[0, 0], [1, 0]], "leader_links": [1, 0]},
//!   "gains": {"ko1": 3, "ko2": 5, "kc1": 5, "kc2": 6, "kc3": 3},
//!   "kappa": 2,
//!   "sign_mode": {"kind": "boundary_layer", "epsilon": 0.01},
//!   "integrator": {"dt": 0.001, "t_end": 30, "decimation": 10},
//!   "leader": {"kind": "transformed", "zbar0": 1},
//!   "init": {"x_range": 3, "z_range": 3, "seed": 1},
//!   "x_source": "reconstructed"
//! }
//! ```
//!
//! Unknown keys are rejected. `kappa`, `sign_mode`, `leader`, `x_source`,
//! `integrator.decimation` and the `init` ranges have defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::SignMode;
use crate::dynamics::{ManipulatorParams, ParamError, PhysicalParams};
use crate::engine::{EngineError, InitialConditions, ScenarioConfig, XSource};
use crate::leader::{LeaderKind, LeaderModel};
use crate::network::{GainSet, NetworkError, Topology};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("at `{key}`: {message}")]
    Parse { key: String, message: String },
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub adjacency: Vec<Vec<u8>>,
    pub leader_links: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSpec {
    pub ko1: f64,
    pub ko2: f64,
    pub kc1: f64,
    pub kc2: f64,
    pub kc3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSpec {
    #[serde(default)]
    pub kind: LeaderKind,
    #[serde(default = "default_zbar0")]
    pub zbar0: f64,
}

impl Default for LeaderSpec {
    fn default() -> Self {
        LeaderSpec {
            kind: LeaderKind::Transformed,
            zbar0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(default = "default_range")]
    pub x_range: f64,
    #[serde(default = "default_range")]
    pub z_range: f64,
    pub seed: u64,
}

fn default_decimation() -> usize {
    10
}

fn default_zbar0() -> f64 {
    1.0
}

fn default_range() -> f64 {
    3.0
}

fn default_kappa() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub physical_params: PhysicalParams,
    pub topology: TopologySpec,
    pub gains: GainSpec,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub sign_mode: SignMode,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub leader: LeaderSpec,
    pub init: InitSpec,
    #[serde(default)]
    pub x_source: XSource,
}

impl ConfigFile {
    /// The four-follower reproduction scenario.
    pub fn reference() -> Self {
        let g = GainSet::REFERENCE;
        ConfigFile {
            physical_params: PhysicalParams::REFERENCE,
            topology: TopologySpec {
                adjacency: vec![
                    vec![0, 0, 1, 0],
                    vec![1, 0, 0, 0],
                    vec![0, 0, 0, 1],
                    vec![0, 1, 0, 0],
                ],
                leader_links: vec![1, 0, 0, 0],
            },
            gains: GainSpec {
                ko1: g.ko1,
                ko2: g.ko2,
                kc1: g.kc1,
                kc2: g.kc2,
                kc3: g.kc3,
            },
            kappa: g.kappa,
            sign_mode: SignMode::default(),
            integrator: IntegratorSpec {
                dt: 1e-3,
                t_end: 30.0,
                decimation: 10,
            },
            leader: LeaderSpec::default(),
            init: InitSpec {
                x_range: 3.0,
                z_range: 3.0,
                seed: 1,
            },
            x_source: XSource::Reconstructed,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::Parse {
                key: if key.is_empty() { ".".into() } else { key },
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn topology(&self) -> Result<Topology, ConfigError> {
        Topology::new(
            self.topology.adjacency.clone(),
            self.topology.leader_links.clone(),
        )
        .map_err(|e| invalid(topology_key(&e), e))
    }

    pub fn params(&self) -> Result<ManipulatorParams, ConfigError> {
        ManipulatorParams::from_physical(&self.physical_params).map_err(|e| {
            let key = match &e {
                ParamError::NonPositivePhysical { name, .. } => format!("physical_params.{name}"),
                _ => "physical_params".into(),
            };
            invalid(key, e)
        })
    }

    pub fn gain_set(&self) -> GainSet {
        GainSet {
            ko1: self.gains.ko1,
            ko2: self.gains.ko2,
            kc1: self.gains.kc1,
            kc2: self.gains.kc2,
            kc3: self.gains.kc3,
            kappa: self.kappa,
            zbar0: self.leader.zbar0,
        }
    }

    /// Re-checks every numeric constraint the simulation relies on.
    pub fn check(&self) -> Result<(), ConfigError> {
        self.to_scenario(None).map(|_| ())
    }

    pub fn to_scenario(&self, seed: Option<u64>) -> Result<ScenarioConfig, ConfigError> {
        let params = self.params()?;
        let topology = self.topology()?;
        let gains = self.gain_set();
        gains.validate().map_err(|e| match &e {
            NetworkError::NonPositiveGain { name, .. } if *name == "zbar0" => {
                invalid("leader.zbar0", e)
            }
            NetworkError::NonPositiveGain { name, .. } => invalid(format!("gains.{name}"), e),
            _ => invalid("kappa", e),
        })?;
        let n = topology.len();
        let scenario = ScenarioConfig {
            params: vec![params; n],
            leader: LeaderModel::new(self.leader.kind, params, self.leader.zbar0),
            topology,
            gains,
            sign_mode: self.sign_mode,
            dt: self.integrator.dt,
            t_end: self.integrator.t_end,
            decimation: self.integrator.decimation,
            init: InitialConditions::Random {
                x_range: self.init.x_range,
                z_range: self.init.z_range,
                seed: seed.unwrap_or(self.init.seed),
            },
            x_source: self.x_source,
        };
        scenario.validate().map_err(|e| {
            let key = match &e {
                EngineError::BadStep(_) => "integrator.dt",
                EngineError::BadHorizon { .. } => "integrator.t_end",
                EngineError::BadDecimation => "integrator.decimation",
                EngineError::BadEpsilon(_) => "sign_mode.epsilon",
                EngineError::BadRange { name, .. } => {
                    return invalid(format!("init.{name}"), &e);
                }
                _ => ".",
            };
            invalid(key, e)
        })?;
        Ok(scenario)
    }
}

fn topology_key(e: &NetworkError) -> String {
    match e {
        NetworkError::LeaderLinksLength { .. } => "topology.leader_links".into(),
        NetworkError::NotBinary { what, index, .. } => format!("topology.{what}[{index}]"),
        _ => "topology.adjacency".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_json() -> String {
        ConfigFile::reference().to_json_string()
    }

    #[test]
    fn round_trip_is_idempotent() {
        let once = ConfigFile::from_json_str(&reference_json()).unwrap();
        let text = once.to_json_string();
        let twice = ConfigFile::from_json_str(&text).unwrap();
        assert_eq!(once, twice);
        assert_eq!(text, twice.to_json_string());
    }

    #[test]
    fn reference_matches_engine_reference() {
        let a = ConfigFile::reference().to_scenario(None).unwrap();
        let b = ScenarioConfig::reference(1);
        assert_eq!(a, b);
    }

    #[test]
    fn defaults_fill_in() {
        let text = r#"{
            "physical_params": {"m1": 0.5, "m2": 0.4, "l1": 0.4, "l2": 0.3, "lc1": 0.2,
                                "lc2": 0.15, "J1": 0.0067, "J2": 0.003, "g": 9.8},
            "topology": {"adjacency": [[0]], "leader_links": [1]},
            "gains": {"ko1": 3, "ko2": 5, "kc1": 5, "kc2": 6, "kc3": 3},
            "integrator": {"dt": 0.001, "t_end": 1},
            "init": {"seed": 9}
        }"#;
        let c = ConfigFile::from_json_str(text).unwrap();
        assert_eq!(c.kappa, 2.0);
        assert_eq!(c.integrator.decimation, 10);
        assert_eq!(c.sign_mode, SignMode::BoundaryLayer { epsilon: 0.01 });
        assert_eq!(c.leader, LeaderSpec::default());
        assert_eq!(c.init.x_range, 3.0);
    }

    fn error_key(text: &str) -> String {
        match ConfigFile::from_json_str(text).unwrap_err() {
            ConfigError::Parse { key, .. } | ConfigError::Invalid { key, .. } => key,
            e => panic!("{e}"),
        }
    }

    fn mutate(f: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(&reference_json()).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(
            error_key(&mutate(|v| v["integrator"]["dt"] = "fast".into())),
            "integrator.dt"
        );
        assert_eq!(
            error_key(&mutate(|v| v["integrator"]["dt"] = 0.0.into())),
            "integrator.dt"
        );
        let unknown = error_key(&mutate(|v| v["gains"]["kc4"] = 1.0.into()));
        assert_eq!(unknown, "gains.kc4");
        let msg = ConfigFile::from_json_str(&mutate(|v| v["extra"] = 1.into()))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("extra"), "{msg}");
        assert_eq!(
            error_key(&mutate(|v| v["gains"]["kc2"] = (-1.0).into())),
            "gains.kc2"
        );
        assert_eq!(error_key(&mutate(|v| v["kappa"] = 0.5.into())), "kappa");
        assert_eq!(
            error_key(&mutate(|v| v["physical_params"]["m2"] = 0.0.into())),
            "physical_params.m2"
        );
        assert_eq!(
            error_key(&mutate(
                |v| v["topology"]["leader_links"] = serde_json::json!([1, 0])
            )),
            "topology.leader_links"
        );
        assert_eq!(
            error_key(&mutate(|v| v["topology"]["adjacency"][0][2] = 2.into())),
            "topology.adjacency[0][2]"
        );
        assert_eq!(
            error_key(&mutate(|v| v["sign_mode"]["epsilon"] = 0.0.into())),
            "sign_mode.epsilon"
        );
        assert!(matches!(
            ConfigFile::from_json_str("{ not json"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn missing_spanning_tree_is_not_a_parse_error() {
        let text = mutate(|v| v["topology"]["leader_links"] = serde_json::json!([0, 0, 0, 0]));
        assert!(ConfigFile::from_json_str(&text).is_ok());
    }
}
