//! Experiment configuration files.
//!
//! One JSON schema serves every subcommand; each command validates the
//! sections it needs and ignores none — unknown fields are rejected so a
//! typo surfaces as a field-level error instead of a silently defaulted run.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use qpnn_core::distinguishability::JitterConvention;
use qpnn_core::trainer::{TaskKind, TrainConfig, TrainNonlinearity};

use crate::CliError;

/// Top-level experiment description.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// "cnot", "bsa", or "linear_cnot".
    pub task: Option<TaskName>,
    #[serde(rename = "N")]
    pub modes: Option<usize>,
    #[serde(rename = "L")]
    pub layers: Option<usize>,
    pub nonlinearity: Option<TrainNonlinearity>,
    /// Visibility sweep points (a single value for training).
    pub visibility: Option<Vec<f64>>,
    /// Pulse duration in ns.
    pub sigma_p: Option<f64>,
    /// Detector jitter sweep points in ns.
    pub sigma_j: Option<Vec<f64>>,
    pub jitter_convention: Option<JitterConvention>,
    /// Monte-Carlo samples per jitter point.
    pub samples: Option<usize>,
    pub budget: Option<BudgetSection>,
    pub grid: Option<GridSection>,
    pub train: Option<TrainSection>,
    /// Filter-scan threshold fractions.
    pub fractions: Option<Vec<f64>>,
    /// Path to a trained model (best_model.json from `train`).
    pub model: Option<PathBuf>,
    /// Idle buffer bins between layers.
    pub buffer: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Cnot,
    Bsa,
    LinearCnot,
}

/// Loss budget selection and optional calibration target.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    /// "nominal" or "lossless".
    pub preset: BudgetPreset,
    /// Repetition period in ns.
    pub tau_b: f64,
    /// Fixed dB-space scale factor applied to every component.
    pub scale: Option<f64>,
    /// Aggregate loss to calibrate the scale factor against.
    pub target_alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetPreset {
    Nominal,
    Lossless,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Spectral grid size.
    #[serde(rename = "M")]
    pub size: usize,
    /// Finer grid for final evaluations (defaults to 4×M).
    #[serde(rename = "eval_M")]
    pub eval_size: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Reads and parses a config, reporting the offending field on failure.
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let cfg = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Ok((cfg, text))
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p.unwrap_or(1.0)
    }

    /// The single visibility a training run assumes.
    pub fn scalar_visibility(&self) -> Result<f64, CliError> {
        match self.visibility.as_deref() {
            None => Ok(1.0),
            Some([v]) => Ok(*v),
            Some(list) => Err(CliError::Validation(format!(
                "training takes one visibility, got {} sweep points",
                list.len()
            ))),
        }
    }

    /// Assembles the trainer configuration, with CLI seed override.
    pub fn train_config(&self, seed_override: Option<u64>) -> Result<TrainConfig, CliError> {
        let train = self
            .train
            .as_ref()
            .ok_or_else(|| CliError::Validation("config needs a \"train\" section".into()))?;
        let task = match self.task {
            Some(TaskName::Cnot) | None => TaskKind::Cnot,
            Some(TaskName::Bsa) => TaskKind::Bsa,
            Some(TaskName::LinearCnot) => {
                return Err(CliError::Validation(
                    "the fixed linear CNOT has no trainable parameters".into(),
                ))
            }
        };
        let nonlinearity = self.nonlinearity.clone().unwrap_or(match task {
            TaskKind::Cnot => TrainNonlinearity::Kerr { phase: std::f64::consts::PI },
            TaskKind::Bsa => TrainNonlinearity::Emitter,
        });
        let grid_size = self.grid.as_ref().map(|g| g.size).unwrap_or(128);
        let eval_grid_size = self
            .grid
            .as_ref()
            .and_then(|g| g.eval_size)
            .unwrap_or(4 * grid_size);
        Ok(TrainConfig {
            task,
            modes: self.modes.unwrap_or(4),
            layers: self.layers.unwrap_or(2),
            nonlinearity,
            visibility: self.scalar_visibility()?,
            epochs: train.epochs,
            trials: train.trials,
            seed: seed_override.unwrap_or(train.seed),
            grid_size,
            eval_grid_size,
            sigma_p: self.sigma_p(),
            buffer: self.buffer.unwrap_or(1),
        })
    }
}

/// A trained model bundle, self-contained for later evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestModel {
    pub train: TrainConfig,
    pub record: qpnn_core::trainer::TrainRecord,
}

impl BestModel {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}
