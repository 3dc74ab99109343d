//! Run configuration: one JSON document covering every tunable, with
//! compiled-in defaults, file overrides, and command-line overrides layered
//! in that order. Unknown keys are rejected and parse failures report the
//! offending field path.

use std::path::Path;

use drht_core::model::{DomainTransferParams, NetworkSpec};
use drht_core::optim::{LrPhase, PhaseSchedule};
use drht_core::scene::{DatasetConfig, ExposureSimulator};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub s_max: f64,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self {
            alpha: 0.03,
            gamma: 0.45,
            delta: 1.0 / 255.0,
            s_max: 64.0,
        }
    }
}

impl TransferSection {
    pub fn to_params<E: drht_core::Scalar>(&self) -> DomainTransferParams<E> {
        DomainTransferParams {
            alpha: E::from_f64(self.alpha),
            gamma: E::from_f64(self.gamma),
            delta: E::from_f64(self.delta),
            s_max: E::from_f64(self.s_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub seed: u64,
    pub scenes: usize,
    pub scene_width: usize,
    pub scene_height: usize,
    pub patch_width: usize,
    pub patch_height: usize,
    pub ev_min: f64,
    pub ev_max: f64,
    pub contrast_min: f64,
    pub contrast_max: f64,
    pub crf_gamma: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            seed: 7,
            scenes: 8,
            scene_width: 64,
            scene_height: 64,
            patch_width: 64,
            patch_height: 64,
            ev_min: -6.0,
            ev_max: 3.0,
            contrast_min: 0.8,
            contrast_max: 1.2,
            crf_gamma: 1.0 / 2.2,
        }
    }
}

impl DataSection {
    pub fn simulator(&self) -> ExposureSimulator {
        ExposureSimulator {
            crf_gamma: self.crf_gamma,
            ev_min: self.ev_min,
            ev_max: self.ev_max,
            contrast_min: self.contrast_min,
            contrast_max: self.contrast_max,
        }
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            scenes: self.scenes,
            scene_width: self.scene_width,
            scene_height: self.scene_height,
            patch_width: self.patch_width,
            patch_height: self.patch_height,
            seed: self.seed,
            sim: self.simulator(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub seed: u64,
    pub init_sigma: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Balance weight of the HDR term in the joint loss (0 = finetune mode).
    pub epsilon: f64,
    /// Network preset: "desk", "tiny" or "micro".
    pub network: String,
    pub pretrain_phases: Vec<LrPhase>,
    pub joint_phases: Vec<LrPhase>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            seed: 42,
            init_sigma: 0.02,
            batch_size: 4,
            clip_norm: 5.0,
            epsilon: 1.0,
            network: "desk".into(),
            pretrain_phases: vec![
                LrPhase {
                    lr: 1e-2,
                    steps: 300,
                },
                LrPhase {
                    lr: 5e-5,
                    steps: 100,
                },
            ],
            joint_phases: vec![
                LrPhase {
                    lr: 1e-2,
                    steps: 700,
                },
                LrPhase {
                    lr: 5e-5,
                    steps: 100,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub transfer: TransferSection,
    pub data: DataSection,
    pub train: TrainSection,
}

impl TrainConfig {
    pub fn network_spec(&self) -> Result<NetworkSpec> {
        Ok(NetworkSpec::by_name(&self.train.network)?)
    }

    pub fn pretrain_schedule(&self) -> PhaseSchedule {
        PhaseSchedule {
            phases: self.train.pretrain_phases.clone(),
        }
    }

    pub fn joint_schedule(&self) -> PhaseSchedule {
        PhaseSchedule {
            phases: self.train.joint_phases.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let transfer: DomainTransferParams<f64> = self.transfer.to_params();
        transfer.validate()?;
        self.data.simulator().validate()?;
        self.network_spec()?;
        if self.train.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be at least 1".into()));
        }
        if self.train.clip_norm <= 0.0 {
            return Err(Error::Invalid("clip_norm must be positive".into()));
        }
        if self.train.epsilon < 0.0 {
            return Err(Error::Invalid("epsilon must be non-negative".into()));
        }
        if self.train.init_sigma < 0.0 {
            return Err(Error::Invalid("init_sigma must be non-negative".into()));
        }
        for phase in self
            .train
            .pretrain_phases
            .iter()
            .chain(self.train.joint_phases.iter())
        {
            if phase.lr <= 0.0 {
                return Err(Error::Invalid("learning rates must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Parse a config JSON with field-path diagnostics; unknown keys fail.
pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut deserializer = serde_json::Deserializer::from_str(text);
    let cfg: TrainConfig =
        serde_path_to_error::deserialize(&mut deserializer).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Built-in defaults, optionally overlaid with a config file.
pub fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| Error::io("read config", p, e))?;
            parse_config(&text)
        }
    }
}

/// Command-line overrides; each set field wins over the file and defaults.
#[derive(Debug, Default, Clone)]
pub struct ConfigOverrides {
    pub scenes: Option<usize>,
    pub data_seed: Option<u64>,
    pub train_seed: Option<u64>,
    pub batch_size: Option<usize>,
    pub network: Option<String>,
    pub epsilon: Option<f64>,
}

pub fn apply_overrides(cfg: &mut TrainConfig, o: &ConfigOverrides) -> Result<()> {
    if let Some(v) = o.scenes {
        cfg.data.scenes = v;
    }
    if let Some(v) = o.data_seed {
        cfg.data.seed = v;
    }
    if let Some(v) = o.train_seed {
        cfg.train.seed = v;
    }
    if let Some(v) = o.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = &o.network {
        cfg.train.network = v.clone();
    }
    if let Some(v) = o.epsilon {
        cfg.train.epsilon = v;
    }
    cfg.validate()
}
