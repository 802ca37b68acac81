//! Offering policies. A policy sees the graph state and returns one offer for
//! the pending order.

mod perfect_info;
mod unrestricted;

pub use perfect_info::{perfect_information_solve, PerfectInfoConfig, PerfectInfoSolution, PerfectInfoSolver};
pub use unrestricted::{unrestricted_choice, unrestricted_probabilities};

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::choice::Offer;
use crate::env::GraphState;
use crate::geometry::distance;
use crate::instance::Instance;

/// How the environment presents options to a customer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offering {
    /// The policy picks one pickup point (or none).
    Single,
    /// The customer picks freely among all pickup points and home.
    Unrestricted,
}

pub trait Policy {
    fn name(&self) -> String;

    fn decide(&mut self, state: &GraphState, instance: &Instance) -> Offer;

    /// Clears per-episode memory.
    fn reset(&mut self) {}

    fn offering(&self) -> Offering {
        Offering::Single
    }
}

/// Nearest pickup point among `candidates` to the pending order; ties go to
/// the lowest index.
pub fn nearest_among(state: &GraphState, instance: &Instance, candidates: impl IntoIterator<Item = usize>) -> Offer {
    let Some(order) = state.pending_location() else {
        return Offer::HomeOnly;
    };
    let mut best: Option<(f64, usize)> = None;
    for i in candidates {
        let d = distance(order, instance.pickup_points[i]);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map_or(Offer::HomeOnly, |(_, i)| Offer::PickupPoint(i))
}

pub fn home_policy(_state: &GraphState) -> Offer {
    Offer::HomeOnly
}

pub fn nearest_policy(state: &GraphState, instance: &Instance) -> Offer {
    nearest_among(state, instance, 0..instance.num_pickups())
}

/// Nearest overall before `threshold * T`; afterwards nearest among pickup
/// points already chosen by earlier customers, or home-only if none was.
pub fn dynamic_nearest_policy(state: &GraphState, instance: &Instance, threshold: f64) -> Offer {
    let t = state.pending_arrival_time().unwrap_or(state.clock);
    if t < threshold * state.horizon {
        nearest_policy(state, instance)
    } else {
        nearest_among(state, instance, state.selected_pickups())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HomePolicy;

impl Policy for HomePolicy {
    fn name(&self) -> String {
        "home".into()
    }

    fn decide(&mut self, state: &GraphState, _instance: &Instance) -> Offer {
        home_policy(state)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NearestPolicy;

impl Policy for NearestPolicy {
    fn name(&self) -> String {
        "nearest".into()
    }

    fn decide(&mut self, state: &GraphState, instance: &Instance) -> Offer {
        nearest_policy(state, instance)
    }
}

/// Which pickup points remain eligible after the initial phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Restriction {
    /// Pickup points chosen by at least one earlier customer.
    #[default]
    Chosen,
    /// Pickup points offered during the initial phase.
    Offered,
}

pub const DEFAULT_DYNAMIC_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct DynamicNearestPolicy {
    threshold: f64,
    restriction: Restriction,
    offered: BTreeSet<usize>,
}

impl DynamicNearestPolicy {
    /// `threshold` is the fraction of the capture period with unrestricted
    /// nearest offers; it must lie in `(0, 1]`.
    pub fn new(threshold: f64, restriction: Restriction) -> Option<Self> {
        (threshold > 0.0 && threshold <= 1.0).then(|| Self { threshold, restriction, offered: BTreeSet::new() })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Default for DynamicNearestPolicy {
    fn default() -> Self {
        Self::new(DEFAULT_DYNAMIC_THRESHOLD, Restriction::Chosen).expect("valid default threshold")
    }
}

impl Policy for DynamicNearestPolicy {
    fn name(&self) -> String {
        "dynamic_nearest".into()
    }

    fn decide(&mut self, state: &GraphState, instance: &Instance) -> Offer {
        match self.restriction {
            Restriction::Chosen => dynamic_nearest_policy(state, instance, self.threshold),
            Restriction::Offered => {
                let t = state.pending_arrival_time().unwrap_or(state.clock);
                if t < self.threshold * state.horizon {
                    let offer = nearest_policy(state, instance);
                    if let Offer::PickupPoint(i) = offer {
                        self.offered.insert(i);
                    }
                    offer
                } else {
                    nearest_among(state, instance, self.offered.iter().copied())
                }
            }
        }
    }

    fn reset(&mut self) {
        self.offered.clear();
    }
}

/// Marker policy: the environment lets customers choose freely.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnrestrictedPolicy;

impl Policy for UnrestrictedPolicy {
    fn name(&self) -> String {
        "unrestricted".into()
    }

    fn decide(&mut self, _state: &GraphState, _instance: &Instance) -> Offer {
        Offer::HomeOnly
    }

    fn offering(&self) -> Offering {
        Offering::Unrestricted
    }
}

/// Offers each of the `|M| + 1` options with equal probability.
#[derive(Debug, Clone)]
pub struct UniformRandomPolicy {
    rng: ChaCha8Rng,
}

impl UniformRandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Policy for UniformRandomPolicy {
    fn name(&self) -> String {
        "uniform_random".into()
    }

    fn decide(&mut self, _state: &GraphState, instance: &Instance) -> Offer {
        let k = self.rng.random_range(0..=instance.num_pickups());
        if k == instance.num_pickups() {
            Offer::HomeOnly
        } else {
            Offer::PickupPoint(k)
        }
    }
}

/// Replays a fixed offer sequence, then offers home only.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    offers: Vec<Offer>,
    next: usize,
}

impl ScriptedPolicy {
    pub fn new(offers: Vec<Offer>) -> Self {
        Self { offers, next: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn decide(&mut self, _state: &GraphState, _instance: &Instance) -> Offer {
        let offer = self.offers.get(self.next).copied().unwrap_or(Offer::HomeOnly);
        self.next += 1;
        offer
    }

    fn reset(&mut self) {
        self.next = 0;
    }
}
