//! Benchmark harness for pickup-point offering policies: the shared-sequence
//! testing protocol, summary metrics, parameter sweeps and the perfect
//! information bound.

pub mod benchmark;
pub mod metrics;
pub mod pi_cache;
pub mod policy_spec;
pub mod seeds;
pub mod stats;
pub mod sweep;
pub mod train_config;

pub use benchmark::{run_benchmark, run_benchmark_detailed, BenchmarkConfig, BenchmarkRun, PolicyRun};
pub use metrics::{emission_reduction, EpisodeOutcome, MetricsRecord};
pub use pi_cache::PiCache;
pub use policy_spec::PolicySpec;
pub use seeds::derive_seed;
pub use stats::{paired_t_test_less, PairedTest};
pub use sweep::{run_sweep, workers_from_env, SweepConfig, SweepOutput};
pub use train_config::TrainConfig;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),
    #[error("checkpoint not found: {}", .0.display())]
    MissingCheckpoint(PathBuf),
    #[error(transparent)]
    Core(#[from] dpo_core::Error),
    #[error(transparent)]
    Neural(#[from] dpo_neural::Error),
    #[error(transparent)]
    Ppo(#[from] dpo_ppo::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
