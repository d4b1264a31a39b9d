use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Valence,
    Arousal,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Valence => "valence",
            Task::Arousal => "arousal",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valence" => Ok(Task::Valence),
            "arousal" => Ok(Task::Arousal),
            other => Err(Error::Config(format!("unknown task {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMetric {
    Mse,
    Pcc,
}

/// Training configuration; every field has a default so a config file
/// only needs the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub clip_seconds: usize,
    /// Clips per valence context window.
    pub window: usize,
    /// Arousal smoothing decay.
    pub beta: f64,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Fraction of movies held out for validation. Zero trains on every
    /// movie and selects epochs by training loss.
    pub validation_fraction: f64,
    pub ranking_metric: RankMetric,
    pub seed: u64,
    /// Per-direction LSTM width of each modality encoder.
    pub hidden: usize,
    /// Width of the clip embedding (first fusion layer).
    pub embed: usize,
    /// Per-direction LSTM width of the valence context model.
    pub context_hidden: usize,
    /// Modalities to use; all modalities of the data when absent.
    pub modalities: Option<Vec<String>>,
    /// Overrides `max_epochs` for the context model when set.
    pub context_epochs: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::Valence,
            clip_seconds: 10,
            window: 4,
            beta: 0.99,
            optimizer: AdamConfig::default(),
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            validation_fraction: 0.2,
            ranking_metric: RankMetric::Mse,
            seed: 0,
            hidden: 64,
            embed: 128,
            context_hidden: 64,
            modalities: None,
            context_epochs: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        let positive = [
            ("clip_seconds", self.clip_seconds),
            ("window", self.window),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("hidden", self.hidden),
            ("embed", self.embed),
            ("context_hidden", self.context_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn context_epochs(&self) -> usize {
        self.context_epochs.unwrap_or(self.max_epochs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_best_reported_settings() {
        let c = TrainConfig::default();
        assert_eq!(c.window, 4);
        assert_eq!(c.beta, 0.99);
        assert_eq!(c.clip_seconds, 10);
        assert_eq!(c.ranking_metric, RankMetric::Mse);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = TrainConfig::from_json(r#"{"task": "arousal", "beta": 0.9, "optimizer": {"learning_rate": 0.01, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8}}"#).unwrap();
        assert_eq!(c.task, Task::Arousal);
        assert_eq!(c.beta, 0.9);
        assert_eq!(c.optimizer.learning_rate, 0.01);
        assert_eq!(c.window, 4);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            TrainConfig::from_json(r#"{"windw": 3}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(TrainConfig::from_json(r#"{"beta": 1.0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"window": 0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"validation_fraction": 1.0}"#).is_err());
    }
}
