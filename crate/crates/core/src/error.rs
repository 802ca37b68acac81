use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("region radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("pickup point index {index} out of range for {count} pickup points")]
    PickupOutOfRange { index: usize, count: usize },
    #[error("state has no pending order to decide on")]
    NoPendingOrder,
    #[error("choice outcome {outcome} is inconsistent with offer {offer}")]
    InconsistentOutcome { offer: String, outcome: String },
    #[error("exact TSP supports at most {threshold} points, got {len}")]
    TooManyPoints { len: usize, threshold: usize },
    #[error("routing failed in epoch {epoch}: {source}")]
    Routing {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("unsupported instance schema version {0}")]
    SchemaVersion(u32),
    #[error("malformed instance file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
