use std::collections::BTreeSet;

use dpo_core::choice::{customer_emission, ChoiceModel, ChoiceOutcome, ChoiceParams, Offer, Regime};
use dpo_core::env::{run_episode, run_episode_on, sample_arrivals, Arrival, EnvConfig, GraphState, NodeKind, RngBundle, DEPOT};
use dpo_core::policies::{HomePolicy, NearestPolicy, Policy, ScriptedPolicy, UniformRandomPolicy};
use dpo_core::{distance, generate_instance, Instance, Location};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn three_pickup_instance() -> Instance {
    Instance {
        region_radius: 3.0,
        depot: Location::new(-3.5, 0.0),
        pickup_points: vec![Location::new(-1.0, 0.5), Location::new(0.5, 2.0), Location::new(1.5, -1.0)],
        zone_centers: [Location::new(1.0, 0.0), Location::new(-1.0, 0.0)],
        seed: 0,
    }
}

/// Shortest closed tour from the first point by trying every permutation.
fn brute_tour(points: &[Location]) -> f64 {
    fn rec(points: &[Location], last: usize, rest: &mut Vec<usize>, acc: f64, best: &mut f64) {
        if rest.is_empty() {
            *best = best.min(acc + distance(points[last], points[0]));
            return;
        }
        for k in 0..rest.len() {
            let v = rest.remove(k);
            rec(points, v, rest, acc + distance(points[last], points[v]), best);
            rest.insert(k, v);
        }
    }
    let mut best = f64::INFINITY;
    if points.len() <= 1 {
        return 0.0;
    }
    rec(points, 0, &mut (1..points.len()).collect(), 0.0, &mut best);
    best
}

/// Car share of a pickup trip recomputed from the mode utilities.
fn car_share(params: &ChoiceParams, d: f64) -> f64 {
    let u: Vec<f64> = params.modes.iter().map(|m| (m.base + m.per_km * d).exp()).collect();
    u[0] / u.iter().sum::<f64>()
}

#[test]
fn three_order_scenario_must_visit_and_emissions() {
    let inst = three_pickup_instance();
    let params = ChoiceParams::regime(Regime::Base);
    let o = [Location::new(-0.8, 0.9), Location::new(0.0, -1.5), Location::new(1.2, -0.4)];

    let mut s = GraphState::initial(&inst, 8.0);
    s.add_order(0.5, o[0]);
    let d1 = distance(o[0], inst.pickup_points[0]);
    let accept = ChoiceOutcome::Pickup { index: 0, distance: d1 };
    s = s.apply_decision(Offer::PickupPoint(0), &accept, Some((1.0, o[1]))).unwrap();
    assert_eq!(s.must_visit_nodes(), vec![DEPOT, 1]);

    s = s.apply_decision(Offer::HomeOnly, &ChoiceOutcome::Home, Some((2.0, o[2]))).unwrap();
    assert_eq!(s.must_visit_nodes(), vec![DEPOT, 1, 5]);

    s = s.apply_decision(Offer::PickupPoint(2), &ChoiceOutcome::Home, None).unwrap();
    assert!(s.is_terminal());
    assert_eq!(s.must_visit_nodes(), vec![DEPOT, 1, 5, 6]);
    assert_eq!(s.selected_pickups(), vec![0]);
    assert_eq!(s.arcs(), &s.rebuild_arcs());
    // o1 keeps only its arc to p1
    assert_eq!(s.arcs().iter().filter(|(a, _)| *a == 4).collect::<Vec<_>>(), vec![&(4, 1)]);

    let pts = [inst.depot, inst.pickup_points[0], o[1], o[2]];
    let (tour, truck) = dpo_core::env::truck_route(&s, params.e_truck, &Default::default()).unwrap();
    assert!((tour.length - brute_tour(&pts)).abs() < 1e-12);
    assert!((truck - 196.0 * brute_tour(&pts)).abs() < 1e-9);

    let cust = customer_emission(&params, &accept);
    assert!((cust - 2.0 * 116.0 * d1 * car_share(&params, d1)).abs() < 1e-12);
    assert_eq!(customer_emission(&params, &ChoiceOutcome::Home), 0.0);
}

#[test]
fn initial_state_with_two_pickups() {
    let mut inst = three_pickup_instance();
    inst.pickup_points.truncate(2);
    let s = GraphState::initial(&inst, 8.0);
    assert_eq!(s.nodes().len(), 3);
    let expected: BTreeSet<_> = [(1, 1), (2, 2), (0, 1), (0, 2)].into_iter().collect();
    assert_eq!(s.arcs(), &expected);
    assert_eq!(GraphState::initial(&inst, 8.0).arcs(), s.arcs());
}

#[test]
fn zero_arrivals_cost_nothing() {
    let inst = three_pickup_instance();
    let model = ChoiceModel::new(ChoiceParams::default());
    let trace = run_episode_on(&inst, &model, &EnvConfig::default(), &mut NearestPolicy, &[], ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(trace.epochs.is_empty());
    assert_eq!(trace.total_emission, 0.0);
    assert_eq!(trace.must_visit, vec![DEPOT]);
}

#[test]
fn all_home_policy_routes_every_order() {
    let inst = generate_instance(2.0, 5, 7).unwrap();
    let model = ChoiceModel::new(ChoiceParams::default());
    let trace = run_episode(&inst, &model, &EnvConfig::default().with_expected_orders(10.0), &mut HomePolicy, RngBundle::from_seeds(1, 2)).unwrap();
    let n = trace.epochs.len();
    assert!(n > 0);
    assert!(trace.epochs.iter().all(|e| e.outcome == ChoiceOutcome::Home));
    assert_eq!(trace.customer_emission, 0.0);
    assert_eq!(trace.tour.visit_order.len(), n + 2);
    assert!(trace.visited_pickups.is_empty());
}

#[test]
fn forced_accept_single_pickup() {
    let inst = three_pickup_instance();
    let model = ChoiceModel::new(ChoiceParams::default()).with_forced_accept(true);
    let config = EnvConfig::default().with_expected_orders(12.0);
    let mut policy = ScriptedPolicy::new(vec![Offer::PickupPoint(1); 100]);
    let trace = run_episode(&inst, &model, &config, &mut policy, RngBundle::from_seeds(3, 4)).unwrap();
    assert!(!trace.epochs.is_empty());
    assert_eq!(trace.must_visit, vec![DEPOT, 2]);
    let d = distance(inst.depot, inst.pickup_points[1]);
    assert!((trace.truck_emission - 2.0 * d * 196.0).abs() < 1e-9);
}

fn policy_for(kind: u8, seed: u64) -> Box<dyn Policy> {
    match kind {
        0 => Box::new(HomePolicy),
        1 => Box::new(NearestPolicy),
        _ => Box::new(UniformRandomPolicy::new(seed)),
    }
}

/// Replays a trace's decisions on the state while checking the arc set
/// against a from-scratch rebuild and must-visit monotonicity.
fn replay_checks(inst: &Instance, arrivals: &[Arrival], trace: &dpo_core::EpisodeTrace) {
    let mut s = GraphState::initial(inst, 8.0);
    s.add_order(arrivals[0].time, arrivals[0].location);
    assert_eq!(s.arcs(), &s.rebuild_arcs());
    for (k, rec) in trace.epochs.iter().enumerate() {
        let offer = match rec.offer {
            dpo_core::env::OfferRecord::Offered(o) => o,
            dpo_core::env::OfferRecord::Unrestricted => unreachable!(),
        };
        let before: Vec<bool> = s.nodes().iter().map(|n| n.feature.must_visit).collect();
        let next = arrivals.get(k + 1).map(|a| (a.time, a.location));
        s = s.apply_decision(offer, &rec.outcome, next).unwrap();
        assert_eq!(s.arcs(), &s.rebuild_arcs(), "epoch {k}");
        for (i, was) in before.into_iter().enumerate() {
            if was {
                assert!(s.nodes()[i].feature.must_visit);
            }
        }
        let pickup_customers_mv = s
            .nodes()
            .iter()
            .any(|n| matches!(n.kind, NodeKind::Customer { pickup: Some(_), .. }) && n.feature.must_visit);
        assert!(!pickup_customers_mv);
    }
    assert_eq!(s.must_visit_nodes(), trace.must_visit);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn episode_invariants(seed in 0u64..10_000, kind in 0u8..3, regime in 0usize..3) {
        let inst = generate_instance(2.0, 4, seed).unwrap();
        let model = ChoiceModel::new(ChoiceParams::regime(Regime::ALL[regime]));
        let config = EnvConfig::default().with_expected_orders(8.0);
        let arrivals = sample_arrivals(&inst, &config, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assume!(!arrivals.is_empty());

        let mut p = policy_for(kind, seed);
        let trace = run_episode_on(&inst, &model, &config, p.as_mut(), &arrivals, ChaCha8Rng::seed_from_u64(seed + 1)).unwrap();
        replay_checks(&inst, &arrivals, &trace);

        let recomputed: f64 = trace.epochs.iter().map(|e| customer_emission(&model.params, &e.outcome)).sum();
        prop_assert_eq!(recomputed, trace.customer_emission);
        prop_assert_eq!(trace.total_emission, trace.customer_emission + trace.truck_emission);

        let mut p2 = policy_for(kind, seed);
        let again = run_episode_on(&inst, &model, &config, p2.as_mut(), &arrivals, ChaCha8Rng::seed_from_u64(seed + 1)).unwrap();
        prop_assert_eq!(trace, again);
    }
}

#[test]
fn trace_export_is_stable() {
    let inst = generate_instance(1.0, 2, 11).unwrap();
    let model = ChoiceModel::new(ChoiceParams::default());
    let config = EnvConfig::default().with_expected_orders(4.0);
    let a = run_episode(&inst, &model, &config, &mut NearestPolicy, RngBundle::from_seeds(5, 6)).unwrap();
    let b = run_episode(&inst, &model, &config, &mut NearestPolicy, RngBundle::from_seeds(5, 6)).unwrap();
    let text = a.to_jsonl();
    assert_eq!(text, b.to_jsonl());
    assert_eq!(text.lines().count(), a.epochs.len() + 1);
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}
