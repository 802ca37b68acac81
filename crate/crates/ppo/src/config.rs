use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// PPO hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub total_steps: usize,
    /// Transitions collected per update (rounded up to whole episodes).
    pub n_steps: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    /// Weight of the squared value error.
    pub value_coef: f64,
    /// Weight of the entropy bonus.
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    pub normalize_advantages: bool,
    /// Rewards are `-cost / reward_scale`.
    pub reward_scale: f64,
    pub max_grad_norm: Option<f64>,
    /// Evaluate and checkpoint every this many updates; 0 only at the end.
    pub eval_every: usize,
    pub eval_sequences: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            total_steps: 300_000,
            n_steps: 1024,
            batch_size: 128,
            gamma: 0.999,
            gae_lambda: 0.96,
            clip_eps: 0.2,
            value_coef: 1.0,
            entropy_coef: 0.01,
            learning_rate: 1e-5,
            epochs_per_update: 4,
            normalize_advantages: true,
            reward_scale: 1000.0,
            max_grad_norm: Some(0.5),
            eval_every: 0,
            eval_sequences: 20,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if self.n_steps == 0 || self.batch_size == 0 || self.total_steps == 0 {
            return bad("step counts must be positive");
        }
        if !(self.reward_scale > 0.0) {
            return bad("reward_scale must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PpoConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(PpoConfig { gamma: 0.0, ..Default::default() }.validate().is_err());
        assert!(PpoConfig { gae_lambda: 1.5, ..Default::default() }.validate().is_err());
        assert!(PpoConfig { clip_eps: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: PpoConfig = serde_json::from_str(r#"{"total_steps": 64, "n_steps": 64}"#).unwrap();
        assert_eq!(c.total_steps, 64);
        assert_eq!(c.batch_size, 128);
    }
}
