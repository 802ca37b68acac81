use dpo_core::env::EpisodeSummary;
use dpo_core::Regime;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One row of benchmark output. Emissions are grams of CO2 per episode,
/// distances are metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub policy: String,
    pub num_pickups: usize,
    pub radius_km: f64,
    pub regime: Regime,
    pub instances: usize,
    pub sequences: usize,
    pub choice_sims: usize,
    pub episodes: usize,
    pub total_mean_g: f64,
    /// Standard deviation over all episodes.
    pub total_std_g: f64,
    /// Standard deviation of the per-instance means.
    pub total_std_instances_g: f64,
    pub truck_mean_g: f64,
    pub truck_std_g: f64,
    pub customer_mean_g: f64,
    pub customer_std_g: f64,
    pub visited_pickups_mean: f64,
    pub pickup_share_pct: f64,
    /// Mean distance from order to offered pickup point; empty when no
    /// pickup point was offered.
    pub offer_distance_m: Option<f64>,
    pub emission_reduction_pct: Option<f64>,
    /// Digest of every arrival sequence consumed, shared by all policies of
    /// one benchmark.
    pub sequence_hash: String,
}

/// Relative saving of `policy_total` against the home-delivery baseline, in
/// percent.
pub fn emission_reduction(policy_total: f64, home_total: f64) -> Result<f64> {
    if !(home_total > 0.0 && home_total.is_finite()) {
        return Err(Error::Config(format!("home emission must be positive, got {home_total}")));
    }
    Ok((home_total - policy_total) / home_total * 100.0)
}

/// One simulated episode, tagged with its position in the protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub instance: usize,
    pub sequence: usize,
    pub sim: usize,
    pub summary: EpisodeSummary,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Fields of a record computed from episodes; identity fields are filled in
/// by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub episodes: usize,
    pub total_mean: f64,
    pub total_std: f64,
    pub total_std_instances: f64,
    pub truck_mean: f64,
    pub truck_std: f64,
    pub customer_mean: f64,
    pub customer_std: f64,
    pub visited_pickups_mean: f64,
    pub pickup_share_pct: f64,
    pub offer_distance_m: Option<f64>,
}

/// Aggregates episodes ordered by instance.
pub fn aggregate(outcomes: &[EpisodeOutcome]) -> Aggregate {
    let col = |f: fn(&EpisodeSummary) -> f64| outcomes.iter().map(|o| f(&o.summary)).collect::<Vec<f64>>();
    let total = col(|s| s.total_emission);
    let truck = col(|s| s.truck_emission);
    let customer = col(|s| s.customer_emission);
    let visited = col(|s| s.visited_pickups as f64);

    let mut per_instance = Vec::new();
    for chunk in outcomes.chunk_by(|a, b| a.instance == b.instance) {
        per_instance.push(mean(&chunk.iter().map(|o| o.summary.total_emission).collect::<Vec<_>>()));
    }

    let orders: usize = outcomes.iter().map(|o| o.summary.orders).sum();
    let pickup_orders: usize = outcomes.iter().map(|o| o.summary.pickup_orders).sum();
    let offers: usize = outcomes.iter().map(|o| o.summary.pickup_offers).sum();
    let offered_km: f64 = outcomes.iter().map(|o| o.summary.offered_distance_sum).sum();

    Aggregate {
        episodes: outcomes.len(),
        total_mean: mean(&total),
        total_std: std_dev(&total),
        total_std_instances: std_dev(&per_instance),
        truck_mean: mean(&truck),
        truck_std: std_dev(&truck),
        customer_mean: mean(&customer),
        customer_std: std_dev(&customer),
        visited_pickups_mean: mean(&visited),
        pickup_share_pct: if orders == 0 { 0.0 } else { 100.0 * pickup_orders as f64 / orders as f64 },
        offer_distance_m: (offers > 0).then(|| 1000.0 * offered_km / offers as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_examples() {
        assert_eq!(emission_reduction(500.0, 500.0).unwrap(), 0.0);
        assert_eq!(emission_reduction(0.0, 500.0).unwrap(), 100.0);
        assert!((emission_reduction(7553.0, 8386.0).unwrap() - 9.93).abs() < 0.005);
        assert!(emission_reduction(1.0, 0.0).is_err());
        assert!(emission_reduction(1.0, f64::NAN).is_err());
    }

    #[test]
    fn std_of_constant_is_zero() {
        assert_eq!(std_dev(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(std_dev(&[1.0]), 0.0);
        assert!((std_dev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
