use serde::{Deserialize, Serialize};

use super::adam::AdamHyper;
use crate::error::{ensure, Result};

/// Optimizer, regularization, seeding and early-stopping settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub head_dropout: f64,
    pub recurrent_dropout: f64,
    /// Weight of the imputation-likelihood regularizer (GRU-IMP only).
    pub imp_lambda: f64,
    pub seed: u64,
    pub batch_norm: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 300,
            patience: 10,
            head_dropout: 0.5,
            recurrent_dropout: 0.3,
            imp_lambda: 0.1,
            seed: 0,
            batch_norm: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.learning_rate > 0.0, Config, "learning_rate must be positive");
        ensure!(
            (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2),
            Config,
            "Adam betas must lie in [0, 1)"
        );
        ensure!(self.epsilon > 0.0, Config, "epsilon must be positive");
        ensure!(self.batch_size >= 1, Config, "batch_size must be at least 1");
        ensure!(self.max_epochs >= 1, Config, "max_epochs must be at least 1");
        ensure!(self.patience >= 1, Config, "patience must be at least 1");
        ensure!(
            (0.0..1.0).contains(&self.head_dropout) && (0.0..1.0).contains(&self.recurrent_dropout),
            Config,
            "dropout rates must lie in [0, 1)"
        );
        ensure!(self.imp_lambda >= 0.0, Config, "imp_lambda must be non-negative");
        Ok(())
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_partial_files() {
        let cfg = TrainConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(TrainConfig::from_json(&text).unwrap(), cfg);
        let partial = TrainConfig::from_json(r#"{"patience": 3, "seed": 9}"#).unwrap();
        assert_eq!(partial.patience, 3);
        assert_eq!(partial.batch_size, 32);
        assert!(TrainConfig::from_json(r#"{"patience": 0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"head_dropout": 1.0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }
}
