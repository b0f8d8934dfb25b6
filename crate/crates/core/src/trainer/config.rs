use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mscmlp::FusionDropout;
use crate::numkernel::{check_rate, AdamWConfig};
use crate::pooling::{PoolMethod, PoolingConfig};

/// Every hyperparameter of a run. Flat so that each field maps onto one
/// command-line flag of the same name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Subjects per optimizer step.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    /// Stop as soon as the inference-mode training MSE falls below this.
    pub target_train_mse: Option<f64>,
    pub k_folds: usize,
    pub seed: u64,
    pub head_count: usize,
    pub hidden_dim: usize,
    /// Number of shared basis vectors `C`.
    pub basis_count: usize,
    pub shared_dim: usize,
    pub video_pool: PoolMethod,
    pub audio_pool: PoolMethod,
    pub dropout_temporal: f64,
    pub dropout_text: f64,
    pub dropout_adapter: f64,
    pub dropout_head: f64,
    pub clamp_at_inference: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamWConfig::default();
        let drop = FusionDropout::default();
        let pool = PoolingConfig::default();
        TrainConfig {
            learning_rate: adam.learning_rate,
            batch_size: 64,
            max_epochs: 100,
            early_stop_patience: 10,
            target_train_mse: None,
            k_folds: 5,
            seed: 0,
            head_count: 32,
            hidden_dim: 256,
            basis_count: 768,
            shared_dim: 768,
            video_pool: pool.video,
            audio_pool: pool.audio,
            dropout_temporal: drop.temporal,
            dropout_text: drop.text,
            dropout_adapter: drop.adapter,
            dropout_head: 0.2,
            clamp_at_inference: true,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            weight_decay: adam.weight_decay,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("dropout_temporal", self.dropout_temporal),
            ("dropout_text", self.dropout_text),
            ("dropout_adapter", self.dropout_adapter),
            ("dropout_head", self.dropout_head),
        ] {
            check_rate(rate).map_err(|_| Error::Config(format!("{name} = {rate} outside [0, 1)")))?;
        }
        let positive = [
            ("batch_size", self.batch_size),
            ("head_count", self.head_count),
            ("hidden_dim", self.hidden_dim),
            ("basis_count", self.basis_count),
            ("shared_dim", self.shared_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be finite and >= 0", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("eps must be > 0 and weight_decay >= 0".into()));
        }
        Ok(())
    }

    pub fn validate_kfold(&self) -> Result<()> {
        self.validate()?;
        if self.k_folds < 2 {
            return Err(Error::Config(format!("k_folds = {} but K-fold needs at least 2", self.k_folds)));
        }
        Ok(())
    }

    pub fn pooling(&self) -> PoolingConfig {
        PoolingConfig {
            video: self.video_pool,
            audio: self.audio_pool,
        }
    }

    pub fn fusion_dropout(&self) -> FusionDropout {
        FusionDropout {
            temporal: self.dropout_temporal,
            text: self.dropout_text,
            adapter: self.dropout_adapter,
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    /// All dropout rates set to zero.
    pub fn without_dropout(mut self) -> Self {
        self.dropout_temporal = 0.0;
        self.dropout_text = 0.0;
        self.dropout_adapter = 0.0;
        self.dropout_head = 0.0;
        self
    }
}
