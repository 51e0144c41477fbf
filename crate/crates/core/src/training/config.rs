use super::kl::KlDirection;
use crate::error::{Error, Result};

/// Optimisation settings shared by the three training phases.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Contrastive temperature.
    pub temperature: f64,
    pub batch_size: usize,
    /// Sampled negative relations per positive.
    pub negatives: usize,
    pub lr_encoder: f64,
    pub lr_other: f64,
    pub pretrain_epochs: usize,
    pub retrieval_epochs: usize,
    pub reasoning_epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub kl_direction: KlDirection,
}

impl Default for TrainConfig {
    /// Desk-scale defaults for the bag-of-tokens encoder and small `d`.
    fn default() -> Self {
        Self {
            temperature: 0.05,
            batch_size: 16,
            negatives: 1,
            lr_encoder: 0.01,
            lr_other: 0.01,
            pretrain_epochs: 40,
            retrieval_epochs: 30,
            reasoning_epochs: 30,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            kl_direction: KlDirection::TargetFirst,
        }
    }
}

impl TrainConfig {
    /// Settings used with a 768-dim pretrained language model: temperature
    /// 0.05, batch 40, learning rate 1e-5 for the encoder and 5e-4 elsewhere.
    pub fn large_encoder() -> Self {
        Self { batch_size: 40, lr_encoder: 1e-5, lr_other: 5e-4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!("batch size must be at least 2, got {}", self.batch_size)));
        }
        for (name, v) in [("lr_encoder", self.lr_encoder), ("lr_other", self.lr_other)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}
