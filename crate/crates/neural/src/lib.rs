//! Actor-critic networks for the pickup-offering policy.
//!
//! Two encoders are provided: a two-layer multi-head graph-attention network
//! over the state graph, and a fully connected network over a fixed-size
//! grid encoding. Gradients come from a small reverse-mode tape.

pub mod encode;
pub mod model;
pub mod params;
pub mod tape;

pub use encode::{flat_encode, grid_cell, Encoded, GraphInput, NODE_FEATURES};
pub use model::{argmax, gat_layer, uniform_weights, ActorCritic, Architecture, FlatConfig, Forward, GatConfig, HeadParams, ModelSpec};
pub use params::{Checkpoint, ManifestEntry, ParameterStore};
pub use tape::{softmax_in_place, Edges, ParamRef, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
