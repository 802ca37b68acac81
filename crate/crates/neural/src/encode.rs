//! Network inputs built from an environment state.

use std::sync::Arc;

use dpo_core::env::GraphState;
use dpo_core::instance::normalize_features;
use dpo_core::{Location, Scalar};

use crate::tape::Edges;

/// Normalized x, normalized y, normalized arrival time, pickup flag,
/// must-visit flag.
pub const NODE_FEATURES: usize = 5;

/// Graph view of a state: node features, in-neighbour edges and the nodes
/// whose scores form the action logits (pickups by index, new order last).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput<T = f64> {
    pub features: Vec<T>,
    pub edges: Arc<Edges>,
    pub readout: Vec<usize>,
}

impl<T: Scalar> GraphInput<T> {
    pub fn num_nodes(&self) -> usize {
        self.edges.num_nodes()
    }

    /// Panics if the state has no pending order.
    pub fn from_state(state: &GraphState) -> Self {
        let pending = state.pending_order().expect("state has a pending order");
        let mut features = Vec::with_capacity(state.nodes().len() * NODE_FEATURES);
        for node in state.nodes() {
            let f = node.feature;
            let n = normalize_features(f.location, f.arrival_time, state.region_radius, state.horizon);
            features.extend(n.values.iter().map(|&v| T::lit(v)));
            features.push(if f.is_pickup { T::one() } else { T::zero() });
            features.push(if f.must_visit { T::one() } else { T::zero() });
        }
        let edges = Arc::new(Edges::from_neighbors(&state.in_neighbors()));
        let readout = (0..state.num_pickups()).map(|m| state.pickup_node(m)).chain([pending]).collect();
        Self { features, edges, readout }
    }
}

/// Grid cell `(j, j')` of a location on a `g x g` grid over `[-L, L)^2`.
/// Points outside the square are assigned to the nearest edge cell.
pub fn grid_cell(loc: Location, radius: f64, g: usize) -> (usize, usize) {
    let index = |v: f64| {
        let k = ((v + radius) / (2.0 * radius) * g as f64).floor();
        k.clamp(0.0, (g - 1) as f64) as usize
    };
    (index(loc.x), index(loc.y))
}

/// Fixed-length state vector: `t / T`, the new order's occupancy grid and
/// the must-visit occupancy grid, each flattened row-major over `(j, j')`.
pub fn flat_encode<T: Scalar>(state: &GraphState, grid_g: usize) -> Vec<T> {
    let (radius, g) = (state.region_radius, grid_g);
    let mut out = vec![T::zero(); 1 + 2 * g * g];
    if let Some(t) = state.pending_arrival_time() {
        out[0] = T::lit(t / state.horizon);
    }
    if let Some(loc) = state.pending_location() {
        let (j, k) = grid_cell(loc, radius, g);
        out[1 + j * g + k] = T::one();
    }
    for loc in state.must_visit_locations() {
        let (j, k) = grid_cell(loc, radius, g);
        out[1 + g * g + j * g + k] = T::one();
    }
    out
}

/// Network input for either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoded<T = f64> {
    Graph(GraphInput<T>),
    Flat(Vec<T>),
}
