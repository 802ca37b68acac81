#![allow(dead_code)]

use dpo_core::env::{GraphState, ServedCustomer};
use dpo_core::{Instance, Location};

pub fn instance(pickups: &[(f64, f64)]) -> Instance {
    Instance {
        region_radius: 2.0,
        depot: Location::new(-2.4, 0.3),
        pickup_points: pickups.iter().map(|&(x, y)| Location::new(x, y)).collect(),
        zone_centers: [Location::new(1.0, 0.0), Location::new(-1.0, 0.0)],
        seed: 0,
    }
}

/// Depot, two pickups, one home-delivery customer and the pending order.
pub fn five_node_state() -> (Instance, GraphState) {
    let inst = instance(&[(0.7, -0.4), (-0.9, 1.1)]);
    let served = [ServedCustomer { location: Location::new(1.2, 0.8), pickup: None }];
    let s = GraphState::from_customers(&inst, 8.0, &served, Some((3.1, Location::new(-0.3, -1.2)))).unwrap();
    (inst, s)
}

/// Larger state with both home and pickup customers.
pub fn mixed_state(order: &[usize]) -> (Instance, GraphState) {
    let inst = instance(&[(0.7, -0.4), (-0.9, 1.1), (1.5, 1.5)]);
    let customers = [
        ServedCustomer { location: Location::new(1.2, 0.8), pickup: None },
        ServedCustomer { location: Location::new(0.4, -0.1), pickup: Some(0) },
        ServedCustomer { location: Location::new(-1.5, -1.5), pickup: None },
        ServedCustomer { location: Location::new(-0.5, 1.4), pickup: Some(1) },
    ];
    let served: Vec<_> = order.iter().map(|&k| customers[k]).collect();
    let s = GraphState::from_customers(&inst, 8.0, &served, Some((5.5, Location::new(0.2, 0.9)))).unwrap();
    (inst, s)
}

/// Relative error with a floor on the denominator.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}
