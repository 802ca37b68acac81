//! Sequential decision environment: Poisson order arrivals, one offer per
//! order, stochastic customer choice, and truck routing at the cutoff.

mod episode;
mod state;
mod trace;

pub use episode::{run_episode, run_episode_on, truck_route, Episode, RngBundle, StepResult};
pub use state::{GraphState, Node, NodeFeature, NodeId, NodeKind, ServedCustomer, DEPOT};
pub use trace::{EpochRecord, EpisodeSummary, EpisodeTrace, OfferRecord};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::geometry::Location;
use crate::instance::Instance;
use crate::routing::TspSolver;

/// Capture-period length and arrival process. Times are in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Cutoff time `T`.
    pub horizon: f64,
    /// Length of one rate period.
    pub period: f64,
    /// Expected orders per period.
    pub rate: f64,
    pub tsp: TspSolver,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { horizon: 8.0, period: 0.25, rate: 1.0, tsp: TspSolver::default() }
    }
}

impl EnvConfig {
    pub fn expected_orders(&self) -> f64 {
        self.rate * self.horizon / self.period
    }

    /// Same horizon and period with the rate set to give `mean` orders.
    pub fn with_expected_orders(mut self, mean: f64) -> Self {
        self.rate = mean * self.period / self.horizon;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time: f64,
    pub location: Location,
}

/// Arrival times of a homogeneous Poisson process on `[0, horizon)`.
pub fn sample_arrival_times<R: Rng + ?Sized>(horizon: f64, rate: f64, period: f64, rng: &mut R) -> Vec<f64> {
    let intensity = rate / period;
    if !(horizon > 0.0) || !(intensity > 0.0) {
        return Vec::new();
    }
    let gap = Exp::new(intensity).expect("positive intensity");
    let mut times = Vec::new();
    let mut t = gap.sample(rng);
    while t < horizon {
        times.push(t);
        t += gap.sample(rng);
    }
    times
}

/// Arrival times followed by one customer location per arrival.
pub fn sample_arrivals<R: Rng + ?Sized>(instance: &Instance, config: &EnvConfig, rng: &mut R) -> Vec<Arrival> {
    let times = sample_arrival_times(config.horizon, config.rate, config.period, rng);
    times
        .into_iter()
        .map(|time| Arrival { time, location: instance.sample_customer_location(rng) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn about_thirty_two_orders_per_day() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let total: usize = (0..n).map(|_| sample_arrival_times(8.0, 1.0, 0.25, &mut rng).len()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 32.0).abs() <= 1.0, "{mean}");
        assert_eq!(EnvConfig::default().expected_orders(), 32.0);
    }

    #[test]
    fn times_sorted_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let t = sample_arrival_times(8.0, 1.0, 0.25, &mut rng);
            assert!(t.windows(2).all(|w| w[0] <= w[1]));
            assert!(t.iter().all(|x| (0.0..8.0).contains(x)));
        }
    }

    #[test]
    fn zero_horizon_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_arrival_times(0.0, 1.0, 0.25, &mut rng).is_empty());
        let inst = crate::generate_instance(4.0, 3, 1).unwrap();
        let cfg = EnvConfig::default();
        let a = sample_arrivals(&inst, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_arrivals(&inst, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn rate_for_expected_orders() {
        let cfg = EnvConfig::default().with_expected_orders(6.0);
        assert!((cfg.expected_orders() - 6.0).abs() < 1e-12);
    }
}
