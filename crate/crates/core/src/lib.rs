//! Simulation core for differentiated pickup-point offering in last-mile
//! delivery.
//!
//! Orders arrive over a capture period; for each one a policy either offers a
//! single pickup point next to home delivery or offers home delivery only.
//! Customers choose stochastically, pickup customers may drive to collect,
//! and at the cutoff a truck tour is routed over every location that must be
//! visited. The objective is the total CO2 of truck and customer travel.

pub mod choice;
pub mod env;
pub mod error;
pub mod geometry;
pub mod instance;
pub mod policies;
pub mod routing;
mod scalar;

pub use choice::{ChoiceModel, ChoiceOutcome, ChoiceParams, Offer, Regime};
pub use env::{EnvConfig, Episode, EpisodeTrace, GraphState};
pub use error::{Error, Result};
pub use geometry::{distance, Location};
pub use instance::{generate_instance, Instance};
pub use policies::Policy;
pub use routing::{Tour, TspSolver};
pub use scalar::Scalar;

pub type Location32 = Location<f32>;
pub type Location64 = Location<f64>;
pub type ChoiceParams32 = ChoiceParams<f32>;
pub type ChoiceParams64 = ChoiceParams<f64>;
pub type Tour64 = Tour<f64>;
