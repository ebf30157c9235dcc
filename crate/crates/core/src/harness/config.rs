use crate::data::synthetic::SMOKE;
use crate::error::{Error, Result};

/// Optimisation schedule. Defaults follow the reference protocol: batch 32,
/// 300 epochs, Adam at 0.01, ×0.8 on a 20-epoch val-loss plateau, stop after
/// 60 epochs without a val-accuracy gain.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub initial_lr: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Random horizontal and vertical flips, each with probability 0.5.
    pub augment: bool,
    /// Label whose miss rate is reported.
    pub target_label: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 300,
            initial_lr: 0.01,
            plateau_patience: 20,
            plateau_factor: 0.8,
            early_stop_patience: 60,
            seed: 7,
            augment: true,
            target_label: SMOKE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::InvalidLr(self.initial_lr));
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return bad("patiences must be at least 1".into());
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!(
                "plateau_factor must lie in (0, 1), got {}",
                self.plateau_factor
            ));
        }
        Ok(())
    }
}
