//! PPO training of the pickup-offering policy: rollouts on the simulation
//! environment, generalized advantage estimation, the clipped surrogate
//! objective and Adam updates.

pub mod adam;
pub mod config;
pub mod gae;
pub mod loss;
pub mod policy;
pub mod train;

pub use adam::{clip_grad_norm, Adam, AdamConfig};
pub use config::PpoConfig;
pub use gae::{compute_gae, compute_gae_bootstrapped, normalize};
pub use loss::{entropy, log_softmax, sample_loss, LossWeights, SampleLoss, SampleTargets};
pub use policy::{act_greedy, action_to_offer, offer_to_action, sample_action, LearnedPolicy};
pub use train::{evaluate_greedy, evaluation_seeds, train, CheckpointRecord, ProgressRecord, Rollout, TrainOutcome, TrainSetup, Trainer, Transition};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("policy entropy collapsed to {entropy:.2e} nats at step {step}")]
    Diverged { step: usize, entropy: f64 },
    #[error(transparent)]
    Core(#[from] dpo_core::Error),
    #[error(transparent)]
    Neural(#[from] dpo_neural::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
