//! Graph representation of the decision state.
//!
//! Node ids are stable: `0` is the depot, `1..=|M|` are the pickup points in
//! instance order, and customers follow in arrival order.
//!
//! Arc rules, applied to the current node set:
//! * self-loops on every pickup point, on the pending order and on every
//!   home-delivery customer;
//! * an arc from every must-visit node to every pickup point and to the
//!   pending order (excluding self pairs);
//! * an arc from each pickup customer to the pickup point it chose.
//!
//! The incremental transition in [`GraphState::apply_decision`] maintains
//! exactly this set; [`GraphState::rebuild_arcs`] recomputes it from scratch.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::choice::{ChoiceOutcome, Offer};
use crate::error::{Error, Result};
use crate::geometry::Location;
use crate::instance::Instance;

pub type NodeId = usize;
pub const DEPOT: NodeId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeFeature {
    pub location: Location,
    /// Arrival time of the pending order; zero for every other node.
    pub arrival_time: f64,
    pub is_pickup: bool,
    pub must_visit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Depot,
    Pickup(usize),
    /// `order` counts arrivals from zero; `pickup` is set once the customer
    /// has chosen a pickup point.
    Customer { order: usize, pickup: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub feature: NodeFeature,
}

/// A served customer, used to build states directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServedCustomer {
    pub location: Location,
    pub pickup: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    nodes: Vec<Node>,
    arcs: BTreeSet<(NodeId, NodeId)>,
    pending: Option<NodeId>,
    num_pickups: usize,
    orders_seen: usize,
    pub epoch: usize,
    pub clock: f64,
    pub horizon: f64,
    pub region_radius: f64,
}

impl GraphState {
    /// Depot and pickup points only; no customer has arrived yet.
    pub fn initial(instance: &Instance, horizon: f64) -> Self {
        let mut nodes = Vec::with_capacity(1 + instance.num_pickups());
        nodes.push(Node {
            kind: NodeKind::Depot,
            feature: NodeFeature { location: instance.depot, arrival_time: 0.0, is_pickup: false, must_visit: true },
        });
        for (i, p) in instance.pickup_points.iter().enumerate() {
            nodes.push(Node {
                kind: NodeKind::Pickup(i),
                feature: NodeFeature { location: *p, arrival_time: 0.0, is_pickup: true, must_visit: false },
            });
        }
        let mut state = Self {
            nodes,
            arcs: BTreeSet::new(),
            pending: None,
            num_pickups: instance.num_pickups(),
            orders_seen: 0,
            epoch: 0,
            clock: 0.0,
            horizon,
            region_radius: instance.region_radius,
        };
        state.arcs = state.rebuild_arcs();
        state
    }

    /// Builds a state from served customers (in the given storage order) and
    /// an optional pending order.
    pub fn from_customers(
        instance: &Instance,
        horizon: f64,
        customers: &[ServedCustomer],
        pending: Option<(f64, Location)>,
    ) -> Result<Self> {
        let mut state = Self::initial(instance, horizon);
        for (order, c) in customers.iter().enumerate() {
            if let Some(m) = c.pickup {
                state.check_pickup(m)?;
                state.nodes[m + 1].feature.must_visit = true;
            }
            state.nodes.push(Node {
                kind: NodeKind::Customer { order, pickup: c.pickup },
                feature: NodeFeature { location: c.location, arrival_time: 0.0, is_pickup: false, must_visit: c.pickup.is_none() },
            });
        }
        state.orders_seen = customers.len();
        state.epoch = customers.len();
        if let Some((t, loc)) = pending {
            state.push_order(t, loc);
        }
        state.arcs = state.rebuild_arcs();
        Ok(state)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.arcs
    }

    pub fn num_pickups(&self) -> usize {
        self.num_pickups
    }

    pub fn pickup_node(&self, index: usize) -> NodeId {
        index + 1
    }

    /// Node id of the order awaiting a decision.
    pub fn pending_order(&self) -> Option<NodeId> {
        self.pending
    }

    pub fn pending_location(&self) -> Option<Location> {
        self.pending.map(|n| self.nodes[n].feature.location)
    }

    pub fn pending_arrival_time(&self) -> Option<f64> {
        self.pending.map(|n| self.nodes[n].feature.arrival_time)
    }

    pub fn is_terminal(&self) -> bool {
        self.pending.is_none()
    }

    pub fn must_visit_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].feature.must_visit).collect()
    }

    /// Locations of must-visit nodes, depot first.
    pub fn must_visit_locations(&self) -> Vec<Location> {
        self.must_visit_nodes().into_iter().map(|i| self.nodes[i].feature.location).collect()
    }

    /// Pickup indices currently marked must-visit.
    pub fn selected_pickups(&self) -> Vec<usize> {
        (0..self.num_pickups).filter(|&i| self.nodes[i + 1].feature.must_visit).collect()
    }

    pub fn is_pickup_selected(&self, index: usize) -> bool {
        self.nodes[index + 1].feature.must_visit
    }

    /// For each node, the sorted ids of nodes with an arc into it.
    pub fn in_neighbors(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(src, dst) in &self.arcs {
            out[dst].push(src);
        }
        out
    }

    fn check_pickup(&self, index: usize) -> Result<()> {
        if index < self.num_pickups {
            Ok(())
        } else {
            Err(Error::PickupOutOfRange { index, count: self.num_pickups })
        }
    }

    fn push_order(&mut self, time: f64, location: Location) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            kind: NodeKind::Customer { order: self.orders_seen, pickup: None },
            feature: NodeFeature { location, arrival_time: time, is_pickup: false, must_visit: false },
        });
        self.orders_seen += 1;
        self.pending = Some(id);
        self.clock = time;
        id
    }

    /// Registers a newly arrived order: self-loop plus arcs from every
    /// must-visit node.
    pub fn add_order(&mut self, time: f64, location: Location) -> NodeId {
        let id = self.push_order(time, location);
        self.arcs.insert((id, id));
        for i in self.must_visit_nodes() {
            self.arcs.insert((i, id));
        }
        id
    }

    /// Two-step transition: register the next order (if any), then apply the
    /// pending customer's realized choice.
    pub fn apply_decision(&self, offer: Offer, outcome: &ChoiceOutcome, next_order: Option<(f64, Location)>) -> Result<Self> {
        let current = self.pending.ok_or(Error::NoPendingOrder)?;
        match (offer, outcome) {
            (Offer::PickupPoint(m), ChoiceOutcome::Pickup { index, .. }) if m == *index => self.check_pickup(m)?,
            (Offer::PickupPoint(m), ChoiceOutcome::Home) => self.check_pickup(m)?,
            (Offer::HomeOnly, ChoiceOutcome::Home) => {}
            _ => {
                return Err(Error::InconsistentOutcome { offer: offer.to_string(), outcome: outcome.to_string() });
            }
        }

        let mut next = self.clone();
        next.pending = None;
        next.nodes[current].feature.arrival_time = 0.0;
        next.arcs.retain(|&(_, dst)| dst != current);
        let new_order = next_order.map(|(t, loc)| next.add_order(t, loc));
        if new_order.is_none() {
            next.clock = self.horizon;
        }

        let targets: Vec<NodeId> = (1..=self.num_pickups).chain(new_order).collect();
        match *outcome {
            ChoiceOutcome::Pickup { index, .. } => {
                let m = index + 1;
                next.nodes[m].feature.must_visit = true;
                for &j in &targets {
                    next.arcs.insert((m, j));
                }
                next.arcs.insert((current, m));
                if let NodeKind::Customer { pickup, .. } = &mut next.nodes[current].kind {
                    *pickup = Some(index);
                }
            }
            ChoiceOutcome::Home => {
                next.nodes[current].feature.must_visit = true;
                next.arcs.insert((current, current));
                for &j in &targets {
                    next.arcs.insert((current, j));
                }
            }
        }
        next.epoch += 1;
        Ok(next)
    }

    /// Arc set recomputed from the node set and features.
    pub fn rebuild_arcs(&self) -> BTreeSet<(NodeId, NodeId)> {
        let mut arcs = BTreeSet::new();
        let pickups = 1..=self.num_pickups;
        for p in pickups.clone() {
            arcs.insert((p, p));
        }
        if let Some(o) = self.pending {
            arcs.insert((o, o));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Customer { pickup: Some(m), .. } = node.kind {
                if Some(i) != self.pending {
                    arcs.insert((i, m + 1));
                }
            }
            if !node.feature.must_visit {
                continue;
            }
            if matches!(node.kind, NodeKind::Customer { .. }) {
                arcs.insert((i, i));
            }
            for j in pickups.clone().chain(self.pending) {
                if j != i {
                    arcs.insert((i, j));
                }
            }
        }
        arcs
    }
}
