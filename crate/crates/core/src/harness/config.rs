//! Experiment configuration: one versioned JSON document, optionally
//! overridden from the command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::{build_network, NetworkSpec};
use crate::env::{EpisodeConfig, StaticSchedule};
use crate::error::{Error, Result};
use crate::ppo::TrainConfig;
use crate::radio::{GridConfig, RadioParams};
use crate::swarm::{roster, UavSpec};

pub const CONFIG_VERSION: u32 = 1;

/// Homogeneous-per-type roster: UAV `i` gets `speeds[i % speeds.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub count: usize,
    /// Device speeds in units of `speed_unit` multiplications per second.
    pub speeds: Vec<f64>,
    pub speed_unit: f64,
    /// Memory budget per frame, bytes.
    pub memory: u64,
    /// Compute budget per frame, multiplications.
    pub compute: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            count: 5,
            speeds: vec![560.0, 512.0, 256.0],
            speed_unit: 1e6,
            memory: 1 << 30,
            compute: 1 << 50,
        }
    }
}

impl SwarmConfig {
    pub fn build(&self) -> Result<Vec<UavSpec>> {
        if self.speeds.is_empty() {
            return Err(Error::config("swarm.speeds must list at least one device speed"));
        }
        if !(self.speed_unit.is_finite() && self.speed_unit > 0.0) {
            return Err(Error::config("swarm.speed_unit must be positive"));
        }
        let speeds: Vec<f64> = self.speeds.iter().map(|s| s * self.speed_unit).collect();
        let swarm = roster(self.count, &speeds, self.memory, self.compute);
        for u in &swarm {
            u.validate()?;
        }
        Ok(swarm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub scenario: String,
    /// Built-in network name; ignored when `network_file` is set.
    pub network: String,
    pub network_file: Option<PathBuf>,
    pub swarm: SwarmConfig,
    pub grid: GridConfig,
    pub radio: RadioParams,
    /// Mean requests per frame.
    pub request_rate: f64,
    /// Frames replayed during evaluation.
    pub frames: usize,
    /// Requests per frame during training.
    pub frame_length: usize,
    pub qos_factor: f64,
    /// Penalty multiplier; derived from the worst single allocation when absent.
    pub penalty_scale: Option<f64>,
    pub hot_cell_demand: u32,
    pub adjacent_moves_only: bool,
    pub train: TrainConfig,
    pub train_steps: usize,
    /// Evaluate with the most likely action instead of sampling.
    pub eval_greedy: bool,
    /// Frozen trajectory for allocation-only training.
    pub static_schedule: Option<StaticSchedule>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            scenario: "default".into(),
            network: "LeNet".into(),
            network_file: None,
            swarm: SwarmConfig::default(),
            grid: GridConfig::default(),
            radio: RadioParams::default(),
            request_rate: 5.0,
            frames: 20,
            frame_length: 1,
            qos_factor: 1.0,
            penalty_scale: None,
            hot_cell_demand: 1,
            adjacent_moves_only: false,
            train: TrainConfig::default(),
            train_steps: 500_000,
            eval_greedy: false,
            static_schedule: None,
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub network: Option<String>,
    pub uavs: Option<usize>,
    pub qos_factor: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(n) = &o.network {
            self.network = n.clone();
            self.network_file = None;
        }
        if let Some(u) = o.uavs {
            self.swarm.count = u;
        }
        if let Some(sf) = o.qos_factor {
            self.qos_factor = sf;
        }
    }

    pub fn load_network(&self) -> Result<NetworkSpec> {
        match &self.network_file {
            Some(p) => NetworkSpec::from_json_file(p).map_err(|e| match e {
                Error::Io(io) => Error::config(format!("cannot read network file {}: {io}", p.display())),
                other => other,
            }),
            None => build_network(&self.network),
        }
    }

    /// Checks everything that can be checked before a run starts.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !(self.request_rate.is_finite() && self.request_rate > 0.0) {
            return Err(Error::config("request_rate must be positive"));
        }
        if let Some(p) = self.penalty_scale {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::config("penalty_scale must be finite and >= 0"));
            }
        }
        self.train.validate()?;
        self.episode_config()?.validate()
    }

    pub fn episode_config(&self) -> Result<EpisodeConfig> {
        let mut cfg = EpisodeConfig::new(self.load_network()?, self.swarm.build()?, self.grid.clone());
        cfg.radio = self.radio.clone();
        cfg.qos_factor = self.qos_factor;
        cfg.frame_length = self.frame_length;
        cfg.hot_cell_demand = self.hot_cell_demand;
        cfg.adjacent_moves_only = self.adjacent_moves_only;
        cfg.penalty_scale = match self.penalty_scale {
            Some(p) => p,
            None => cfg.auto_penalty_scale(),
        };
        Ok(cfg)
    }

    pub fn shared_episode_config(&self) -> Result<Arc<EpisodeConfig>> {
        Ok(Arc::new(self.episode_config()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_json_str(r#"{"version": 1, "colour": "red"}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = ExperimentConfig::from_json_str(r#"{"grid": {"sides": 4}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg = ExperimentConfig::from_json_str(r#"{"swarm": {"count": 3}, "grid": {"side": 4, "hot_cells": [5, 10]}}"#).unwrap();
        assert_eq!(cfg.swarm.count, 3);
        assert_eq!(cfg.swarm.speeds, vec![560.0, 512.0, 256.0]);
        assert_eq!(cfg.grid.cell_size, 20.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides {
            seed: Some(9),
            network: Some("AlexNet".into()),
            uavs: Some(4),
            qos_factor: Some(0.0),
            output_dir: None,
        });
        assert_eq!((cfg.seed, cfg.swarm.count, cfg.qos_factor), (9, 4, 0.0));
        assert_eq!(cfg.load_network().unwrap().num_layers(), 8);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for bad in [
            r#"{"version": 2}"#,
            r#"{"request_rate": 0}"#,
            r#"{"network": "ResNet"}"#,
            r#"{"swarm": {"count": 2}}"#,
            r#"{"swarm": {"count": 26}}"#,
        ] {
            let cfg = ExperimentConfig::from_json_str(bad).unwrap();
            let err = cfg.validate().unwrap_err();
            assert!(matches!(err.exit_code(), 2 | 3), "{bad}: {err}");
        }
    }
}
