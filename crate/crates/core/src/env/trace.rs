//! Episode records and their line-delimited export.
//!
//! Export format: one JSON object per line. Epoch lines carry, in order,
//! `record` (= "epoch"), `epoch`, `arrival_time`, `x_km`, `y_km`, `offer`
//! ("pickup:<i>", "home" or "unrestricted"), `offered_distance_km`,
//! `choice` ("pickup:<i>" or "home"), `customer_emission_g`. The final line
//! has `record` (= "summary"), `orders`, `pickup_orders`, `must_visit`,
//! `visited_pickups`, `tour`, `tour_length_km`, `tour_exact`,
//! `truck_emission_g`, `customer_emission_g`, `total_emission_g`.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::choice::{ChoiceOutcome, Offer};
use crate::geometry::Location;
use crate::routing::Tour;

use super::NodeId;

/// What the customer was shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfferRecord {
    Offered(Offer),
    /// Free choice among every pickup point and home.
    Unrestricted,
}

impl OfferRecord {
    pub fn offered_pickup(&self) -> Option<usize> {
        match self {
            OfferRecord::Offered(Offer::PickupPoint(i)) => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for OfferRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OfferRecord::Offered(o) => o.fmt(f),
            OfferRecord::Unrestricted => f.write_str("unrestricted"),
        }
    }
}

impl Serialize for OfferRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub arrival_time: f64,
    pub location: Location,
    pub offer: OfferRecord,
    /// Distance to the offered pickup point, if one was offered.
    pub offered_distance: Option<f64>,
    pub outcome: ChoiceOutcome,
    pub customer_emission: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub epochs: Vec<EpochRecord>,
    pub must_visit: Vec<NodeId>,
    /// Pickup indices the truck visits.
    pub visited_pickups: Vec<usize>,
    pub tour: Tour,
    pub truck_emission: f64,
    pub customer_emission: f64,
    pub total_emission: f64,
}

/// Aggregates of one trace used by the benchmark harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub orders: usize,
    pub pickup_orders: usize,
    pub visited_pickups: usize,
    pub pickup_offers: usize,
    pub offered_distance_sum: f64,
    pub truck_emission: f64,
    pub customer_emission: f64,
    pub total_emission: f64,
}

impl EpisodeTrace {
    pub fn summary(&self) -> EpisodeSummary {
        let offered: Vec<f64> = self.epochs.iter().filter_map(|e| e.offered_distance).collect();
        EpisodeSummary {
            orders: self.epochs.len(),
            pickup_orders: self.epochs.iter().filter(|e| e.outcome.chose_pickup()).count(),
            visited_pickups: self.visited_pickups.len(),
            pickup_offers: offered.len(),
            offered_distance_sum: offered.iter().sum(),
            truck_emission: self.truck_emission,
            customer_emission: self.customer_emission,
            total_emission: self.total_emission,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let line = EpochLine {
                record: "epoch",
                epoch: e.epoch,
                arrival_time: e.arrival_time,
                x_km: e.location.x,
                y_km: e.location.y,
                offer: e.offer,
                offered_distance_km: e.offered_distance,
                choice: e.outcome.to_string(),
                customer_emission_g: e.customer_emission,
            };
            out.push_str(&serde_json::to_string(&line).expect("epoch line serializes"));
            out.push('\n');
        }
        let s = self.summary();
        let line = SummaryLine {
            record: "summary",
            orders: s.orders,
            pickup_orders: s.pickup_orders,
            must_visit: &self.must_visit,
            visited_pickups: &self.visited_pickups,
            tour: &self.tour.visit_order,
            tour_length_km: self.tour.length,
            tour_exact: self.tour.exact,
            truck_emission_g: self.truck_emission,
            customer_emission_g: self.customer_emission,
            total_emission_g: self.total_emission,
        };
        out.push_str(&serde_json::to_string(&line).expect("summary line serializes"));
        out.push('\n');
        out
    }
}

#[derive(Serialize)]
struct EpochLine {
    record: &'static str,
    epoch: usize,
    arrival_time: f64,
    x_km: f64,
    y_km: f64,
    offer: OfferRecord,
    offered_distance_km: Option<f64>,
    choice: String,
    customer_emission_g: f64,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    record: &'static str,
    orders: usize,
    pickup_orders: usize,
    must_visit: &'a [NodeId],
    visited_pickups: &'a [usize],
    tour: &'a [usize],
    tour_length_km: f64,
    tour_exact: bool,
    truck_emission_g: f64,
    customer_emission_g: f64,
    total_emission_g: f64,
}
