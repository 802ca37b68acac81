//! Deterministic benchmark with full knowledge of the day's orders and
//! certain acceptance of every offered pickup point.
//!
//! Each order is assigned either home delivery or one pickup point. The
//! objective is the truck emission of the tour over the induced must-visit
//! set plus the expected car emission of every pickup-assigned customer.
//! Small problems are enumerated; larger ones use multi-start local search.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::choice::{customer_emission, ChoiceOutcome, ChoiceParams, Offer};
use crate::geometry::{distance, Location};
use crate::instance::Instance;
use crate::routing::{solve_tsp_quick, Tour, TspSolver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfectInfoConfig {
    /// Enumerate when `(|M| + 1)^n` does not exceed this.
    pub enumeration_limit: u64,
    pub restarts: usize,
    pub seed: u64,
    pub tsp: TspSolver,
    /// During local search, routes over more than this many points use a
    /// single-start heuristic; the returned solution is always re-routed
    /// with `tsp`.
    #[serde(default = "default_search_quick_above")]
    pub search_quick_above: usize,
}

fn default_search_quick_above() -> usize {
    8
}

impl Default for PerfectInfoConfig {
    fn default() -> Self {
        Self { enumeration_limit: 1_000_000, restarts: 20, seed: 0, tsp: TspSolver::default(), search_quick_above: default_search_quick_above() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectInfoSolution {
    pub assignment: Vec<Offer>,
    pub objective: f64,
    pub truck_emission: f64,
    pub customer_emission: f64,
    pub tour: Tour,
    /// True when the assignment was found by exhaustive enumeration.
    pub exact: bool,
}

impl PerfectInfoSolution {
    pub fn pickup_orders(&self) -> usize {
        self.assignment.iter().filter(|o| matches!(o, Offer::PickupPoint(_))).count()
    }

    pub fn visited_pickups(&self) -> usize {
        let mut used: Vec<usize> = self
            .assignment
            .iter()
            .filter_map(|o| match o {
                Offer::PickupPoint(i) => Some(*i),
                Offer::HomeOnly => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        used.len()
    }
}

/// Assignment option per order: `0..|M|` is a pickup point, `|M|` is home.
type Assignment = Vec<usize>;

pub struct PerfectInfoSolver<'a> {
    instance: &'a Instance,
    params: &'a ChoiceParams,
    orders: &'a [Location],
    config: PerfectInfoConfig,
    customer_cost: Vec<Vec<f64>>,
    route_cache: HashMap<(Vec<usize>, bool), (f64, Tour)>,
}

impl<'a> PerfectInfoSolver<'a> {
    pub fn new(instance: &'a Instance, params: &'a ChoiceParams, orders: &'a [Location], config: PerfectInfoConfig) -> Self {
        let customer_cost = orders
            .iter()
            .map(|o| {
                instance
                    .pickup_points
                    .iter()
                    .enumerate()
                    .map(|(index, p)| customer_emission(params, &ChoiceOutcome::Pickup { index, distance: distance(*o, *p) }))
                    .collect()
            })
            .collect();
        Self { instance, params, orders, config, customer_cost, route_cache: HashMap::new() }
    }

    fn home(&self) -> usize {
        self.instance.num_pickups()
    }

    /// Must-visit items of an assignment: home orders as `order id`, pickup
    /// points as `n + pickup index`, in increasing order.
    fn must_visit_key(&self, a: &[usize]) -> Vec<usize> {
        let n = self.orders.len();
        let mut key: Vec<usize> = (0..n).filter(|&o| a[o] == self.home()).collect();
        let mut used: Vec<usize> = a.iter().copied().filter(|&m| m != self.home()).map(|m| n + m).collect();
        used.sort_unstable();
        used.dedup();
        key.extend(used);
        key
    }

    fn route(&mut self, a: &[usize], search: bool) -> (f64, Tour) {
        let key = self.must_visit_key(a);
        let quick = search && key.len() + 1 > self.config.search_quick_above;
        let key = (key, quick);
        if let Some(hit) = self.route_cache.get(&key) {
            return hit.clone();
        }
        let n = self.orders.len();
        let mut points = vec![self.instance.depot];
        points.extend(key.0.iter().map(|&k| if k < n { self.orders[k] } else { self.instance.pickup_points[k - n] }));
        let tour = if quick { solve_tsp_quick(&points) } else { self.config.tsp.solve(&points) };
        let value = (tour.emission(self.params.e_truck), tour);
        self.route_cache.insert(key, value.clone());
        value
    }

    fn customer_total(&self, a: &[usize]) -> f64 {
        a.iter()
            .enumerate()
            .filter(|(_, &m)| m != self.home())
            .map(|(o, &m)| self.customer_cost[o][m])
            .sum()
    }

    pub fn objective(&mut self, a: &[usize]) -> f64 {
        self.route(a, false).0 + self.customer_total(a)
    }

    fn search_objective(&mut self, a: &[usize]) -> f64 {
        self.route(a, true).0 + self.customer_total(a)
    }

    fn solution(&mut self, a: &[usize], exact: bool) -> PerfectInfoSolution {
        let (truck, tour) = self.route(a, false);
        let customer = self.customer_total(a);
        PerfectInfoSolution {
            assignment: a.iter().map(|&m| if m == self.home() { Offer::HomeOnly } else { Offer::PickupPoint(m) }).collect(),
            objective: truck + customer,
            truck_emission: truck,
            customer_emission: customer,
            tour,
            exact,
        }
    }

    fn enumeration_size(&self) -> Option<u64> {
        let base = self.instance.num_pickups() as u64 + 1;
        let mut size = 1u64;
        for _ in 0..self.orders.len() {
            size = size.checked_mul(base)?;
        }
        Some(size)
    }

    pub fn solve(&mut self) -> PerfectInfoSolution {
        match self.enumeration_size() {
            Some(size) if size <= self.config.enumeration_limit => self.solve_enumeration(),
            _ => self.solve_local_search(),
        }
    }

    /// Exhaustive search over every assignment; ties keep the first found.
    pub fn solve_enumeration(&mut self) -> PerfectInfoSolution {
        let n = self.orders.len();
        let radix = self.home() + 1;
        let mut a = vec![0usize; n];
        let mut best = (f64::INFINITY, a.clone());
        loop {
            let v = self.objective(&a);
            if v < best.0 {
                best = (v, a.clone());
            }
            let mut pos = 0;
            while pos < n {
                a[pos] += 1;
                if a[pos] < radix {
                    break;
                }
                a[pos] = 0;
                pos += 1;
            }
            if pos == n {
                break;
            }
        }
        self.solution(&best.1, true)
    }

    /// Multi-start descent with single-order reassignment and whole-group
    /// moves. Starts are all-home, everyone at one pickup point, everyone at
    /// their nearest pickup point, then random assignments. The result never
    /// costs more than all-home.
    pub fn solve_local_search(&mut self) -> PerfectInfoSolution {
        let n = self.orders.len();
        let radix = self.home() + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut starts = vec![vec![self.home(); n]];
        for m in 0..self.home() {
            starts.push(vec![m; n]);
        }
        starts.push(self.nearest_assignment());
        for _ in 0..self.config.restarts {
            starts.push((0..n).map(|_| rng.random_range(0..radix)).collect());
        }
        // local optima are ranked by the full routing objective, with the
        // all-home assignment itself as a fallback candidate
        let all_home = starts[0].clone();
        let mut best = (self.objective(&all_home), all_home);
        for start in starts {
            let (_, a) = self.descend(start);
            let v = self.objective(&a);
            if v < best.0 {
                best = (v, a);
            }
        }
        self.solution(&best.1, false)
    }

    fn nearest_assignment(&self) -> Assignment {
        self.orders
            .iter()
            .map(|o| {
                let mut best = (f64::INFINITY, self.home());
                for (m, p) in self.instance.pickup_points.iter().enumerate() {
                    let d = distance(*o, *p);
                    if d < best.0 {
                        best = (d, m);
                    }
                }
                best.1
            })
            .collect()
    }

    fn descend(&mut self, mut a: Assignment) -> (f64, Assignment) {
        let n = a.len();
        let radix = self.home() + 1;
        let mut current = self.search_objective(&a);
        let tol = 1e-9 * current.abs().max(1.0);
        loop {
            let mut improved = false;
            for o in 0..n {
                for m in 0..radix {
                    if m == a[o] {
                        continue;
                    }
                    let old = a[o];
                    a[o] = m;
                    let v = self.search_objective(&a);
                    if v < current - tol {
                        current = v;
                        improved = true;
                    } else {
                        a[o] = old;
                    }
                }
            }
            for from in 0..radix {
                if !a.contains(&from) {
                    continue;
                }
                for to in 0..radix {
                    if to == from {
                        continue;
                    }
                    let moved: Assignment = a.iter().map(|&m| if m == from { to } else { m }).collect();
                    let v = self.search_objective(&moved);
                    if v < current - tol {
                        current = v;
                        a = moved;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                return (current, a);
            }
        }
    }
}

pub fn perfect_information_solve(
    instance: &Instance,
    params: &ChoiceParams,
    orders: &[Location],
    config: PerfectInfoConfig,
) -> PerfectInfoSolution {
    PerfectInfoSolver::new(instance, params, orders, config).solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::Regime;

    fn micro(seed: u64, n: usize, m: usize) -> (Instance, Vec<Location>) {
        let inst = crate::generate_instance(2.0, m, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let orders = (0..n).map(|_| inst.sample_customer_location(&mut rng)).collect();
        (inst, orders)
    }

    #[test]
    fn no_orders() {
        let (inst, _) = micro(1, 0, 3);
        let sol = perfect_information_solve(&inst, &ChoiceParams::regime(Regime::Base), &[], PerfectInfoConfig::default());
        assert!(sol.assignment.is_empty());
        assert_eq!(sol.objective, 0.0);
        assert!(sol.exact);
    }

    /// Brute-force objective of one explicit assignment.
    fn direct_objective(inst: &Instance, params: &ChoiceParams, orders: &[Location], a: &[Offer]) -> f64 {
        let mut points = vec![inst.depot];
        let mut used = Vec::new();
        let mut customer = 0.0;
        for (o, offer) in orders.iter().zip(a) {
            match offer {
                Offer::HomeOnly => points.push(*o),
                Offer::PickupPoint(m) => {
                    let d = distance(*o, inst.pickup_points[*m]);
                    let car = crate::choice::car_probability(params, d);
                    customer += 2.0 * params.e_car * d * car;
                    if !used.contains(m) {
                        used.push(*m);
                    }
                }
            }
        }
        used.sort_unstable();
        points.extend(used.iter().map(|m| inst.pickup_points[*m]));
        crate::routing::solve_tsp_exact(&points).unwrap().length * params.e_truck + customer
    }

    #[test]
    fn single_order_between_depot_and_pickup() {
        let params = ChoiceParams::regime(Regime::Base);
        let inst = Instance {
            region_radius: 4.0,
            depot: Location::new(-4.0, 0.0),
            pickup_points: vec![Location::new(-2.0, 0.0)],
            zone_centers: [Location::origin(); 2],
            seed: 0,
        };
        for x in [-1.9, -1.0, 0.5, 3.0] {
            let orders = [Location::new(x, 0.0)];
            let sol = perfect_information_solve(&inst, &params, &orders, PerfectInfoConfig::default());
            let home = direct_objective(&inst, &params, &orders, &[Offer::HomeOnly]);
            let pickup = direct_objective(&inst, &params, &orders, &[Offer::PickupPoint(0)]);
            let expected = if pickup < home { Offer::PickupPoint(0) } else { Offer::HomeOnly };
            assert_eq!(sol.assignment, vec![expected], "x={x}");
            assert!((sol.objective - home.min(pickup)).abs() < 1e-9);
        }
    }

    #[test]
    fn enumeration_objective_is_consistent() {
        let params = ChoiceParams::regime(Regime::Base);
        let (inst, orders) = micro(3, 5, 2);
        let sol = perfect_information_solve(&inst, &params, &orders, PerfectInfoConfig::default());
        assert!(sol.exact);
        let direct = direct_objective(&inst, &params, &orders, &sol.assignment);
        assert!((sol.objective - direct).abs() < 1e-9);
        assert!((sol.truck_emission + sol.customer_emission - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn local_search_matches_enumeration_on_micro_instances() {
        let params = ChoiceParams::regime(Regime::Base);
        for seed in 0..50 {
            let (inst, orders) = micro(seed, 6, 3);
            let mut solver = PerfectInfoSolver::new(&inst, &params, &orders, PerfectInfoConfig { seed, ..Default::default() });
            let exact = solver.solve_enumeration();
            let local = solver.solve_local_search();
            assert_eq!(exact.objective, local.objective, "seed {seed}");
            let home = solver.objective(&[3; 6]);
            assert!(local.objective <= home);
        }
    }

    #[test]
    fn falls_back_to_local_search_when_large() {
        let params = ChoiceParams::regime(Regime::Base);
        let (inst, orders) = micro(4, 8, 15);
        let sol = perfect_information_solve(&inst, &params, &orders, PerfectInfoConfig { restarts: 3, ..Default::default() });
        assert!(!sol.exact);
        assert_eq!(sol.assignment.len(), 8);
    }
}
