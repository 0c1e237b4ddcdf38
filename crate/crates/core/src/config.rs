//! Experiment configuration: one TOML file with a section per subsystem.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use resloco_control::{GaitParams, WbcGains};
use resloco_learn::TrainConfig;
use resloco_sim::RobotModel;

use crate::episode::Variant;
use crate::policy::{ObservationScales, RewardParams};
use crate::randomization::RandomizationConfig;
use crate::CoreError;

/// Loop rates, filtering, commands and action bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    /// Control period Δt_sim [s].
    pub period: f64,
    /// Physics step [s].
    pub physics_dt: f64,
    /// Control period of the MBC baseline [s].
    pub mbc_period: f64,
    /// Cutoff of the Base state filter [Hz]; 0 disables it.
    pub filter_cutoff_hz: f64,
    /// Residual torque bound as a fraction of the joint limit.
    pub residual_fraction: f64,
    /// Direct-torque (OR) bound as a fraction of the joint limit.
    pub direct_fraction: f64,
    /// Velocity commands are drawn from U(−command_range, command_range).
    pub command_range: f64,
    /// Commands are resampled this often [s].
    pub command_interval: f64,
    /// Length of an evaluation episode [s].
    pub eval_duration: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            period: 0.005,
            physics_dt: 0.001,
            mbc_period: 0.001,
            filter_cutoff_hz: 20.0,
            residual_fraction: 0.5,
            direct_fraction: 1.0,
            command_range: 0.3,
            command_interval: 2.0,
            eval_duration: 5.0,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        let ratio = |a: f64, b: f64| {
            let r = a / b;
            r >= 1.0 - 1e-9 && (r - r.round()).abs() < 1e-9
        };
        if !(self.physics_dt > 0.0 && ratio(self.period, self.physics_dt) && ratio(self.period, self.mbc_period)) {
            return Err(CoreError::Config(
                "control: period must be a multiple of physics_dt and of mbc_period".into(),
            ));
        }
        if !(self.residual_fraction > 0.0 && self.direct_fraction > 0.0 && self.filter_cutoff_hz >= 0.0) {
            return Err(CoreError::Config("control: bounds must be positive".into()));
        }
        if !(self.command_range >= 0.0 && self.command_interval > 0.0 && self.eval_duration > 0.0) {
            return Err(CoreError::Config("control: invalid command schedule".into()));
        }
        Ok(())
    }
}

/// Evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub variants: Vec<Variant>,
    pub betas: Vec<f64>,
    /// Evaluation episodes per (variant, β) cell.
    pub trials: usize,
    /// Evaluation seeds are `seed + trial`.
    pub seed: u64,
    /// Level used for `compare` and for training.
    pub beta: f64,
    /// Wall-clock budget for a full comparison [s] (reported, not enforced).
    pub budget_s: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            betas: vec![0.1, 0.3, 0.5, 0.7],
            trials: 10,
            seed: 1000,
            beta: 1.0,
            budget_s: 1800.0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.trials == 0 {
            return Err(CoreError::Config("experiment: trials must be at least 1".into()));
        }
        if self.betas.iter().chain([&self.beta]).any(|b| !(0.0..=1.0).contains(b)) {
            return Err(CoreError::Config("experiment: beta values must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub model: RobotModel,
    pub gait: GaitParams,
    pub gains: WbcGains,
    pub control: ControlConfig,
    pub randomization: RandomizationConfig,
    pub reward: RewardParams,
    pub observation: ObservationScales,
    pub train: TrainConfig,
    pub experiment: ExperimentSpec,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self, CoreError> {
        let cfg: Self = toml::from_str(s).map_err(|e| CoreError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CoreError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.model.validate().map_err(|e| CoreError::Config(e.to_string()))?;
        self.gait.validate().map_err(|e| CoreError::Config(e.to_string()))?;
        self.control.validate()?;
        self.randomization.validate()?;
        self.train.validate().map_err(|e| CoreError::Config(e.to_string()))?;
        self.experiment.validate()?;
        if self.reward.termination_threshold <= 0.0 {
            return Err(CoreError::Config("reward: termination threshold must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the serialized configuration.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_toml().as_bytes()).into()
    }
}
