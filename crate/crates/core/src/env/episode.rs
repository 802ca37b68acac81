use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::choice::{ChoiceModel, ChoiceOutcome, Offer};
use crate::error::{Error, Result};
use crate::geometry::distance;
use crate::instance::Instance;
use crate::policies::{unrestricted_choice, Offering, Policy};
use crate::routing::{Tour, TspSolver};

use super::state::{GraphState, NodeKind};
use super::trace::{EpochRecord, EpisodeTrace, OfferRecord};
use super::{sample_arrivals, Arrival, EnvConfig};

/// Independent random streams of one episode.
#[derive(Debug, Clone)]
pub struct RngBundle {
    pub arrivals: ChaCha8Rng,
    pub choices: ChaCha8Rng,
}

impl RngBundle {
    pub fn from_seeds(arrival_seed: u64, choice_seed: u64) -> Self {
        Self { arrivals: ChaCha8Rng::seed_from_u64(arrival_seed), choices: ChaCha8Rng::seed_from_u64(choice_seed) }
    }
}

/// Cost realized by one decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub outcome: ChoiceOutcome,
    pub customer_emission: f64,
    /// Present on the terminal step only.
    pub truck_emission: Option<f64>,
    /// Customer emission plus, on the terminal step, truck emission.
    pub cost: f64,
    pub done: bool,
}

/// Optimal (or heuristic) truck tour over the must-visit nodes of `state`
/// and its emission.
pub fn truck_route(state: &GraphState, e_truck: f64, solver: &TspSolver) -> Result<(Tour, f64)> {
    let points = state.must_visit_locations();
    if let Some(bad) = points.iter().find(|p| !p.is_finite()) {
        return Err(Error::Format(format!("non-finite must-visit location {bad:?}")));
    }
    let tour = solver.solve(&points);
    let emission = tour.emission(e_truck);
    Ok((tour, emission))
}

/// One capture period played decision by decision.
pub struct Episode<'a, R: Rng = ChaCha8Rng> {
    instance: &'a Instance,
    model: &'a ChoiceModel,
    config: EnvConfig,
    arrivals: Vec<Arrival>,
    next_arrival: usize,
    state: GraphState,
    records: Vec<EpochRecord>,
    rng: R,
    route: Option<(Tour, f64)>,
}

impl<'a, R: Rng> Episode<'a, R> {
    /// Starts an episode on a pre-sampled arrival sequence; `rng` drives
    /// customer choices.
    pub fn new(instance: &'a Instance, model: &'a ChoiceModel, config: EnvConfig, arrivals: Vec<Arrival>, rng: R) -> Result<Self> {
        let mut state = GraphState::initial(instance, config.horizon);
        let mut route = None;
        if let Some(first) = arrivals.first() {
            state.add_order(first.time, first.location);
        } else {
            route = Some(truck_route(&state, model.params.e_truck, &config.tsp)?);
        }
        Ok(Self { instance, model, config, arrivals, next_arrival: 1, state, records: Vec::new(), rng, route })
    }

    pub fn state(&self) -> &GraphState {
        &self.state
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    pub fn is_done(&self) -> bool {
        self.state.is_terminal()
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    /// Offers `offer` to the pending order and advances.
    pub fn step(&mut self, offer: Offer) -> Result<StepResult> {
        let loc = self.state.pending_location().ok_or(Error::NoPendingOrder)?;
        let dist = match offer {
            Offer::PickupPoint(i) => {
                let p = self
                    .instance
                    .pickup_points
                    .get(i)
                    .ok_or(Error::PickupOutOfRange { index: i, count: self.instance.num_pickups() })?;
                Some(distance(loc, *p))
            }
            Offer::HomeOnly => None,
        };
        let outcome = self.model.sample_choice(offer, dist.unwrap_or(0.0), &mut self.rng)?;
        self.advance(OfferRecord::Offered(offer), offer, dist, outcome)
    }

    /// Lets the pending customer choose freely among all pickup points and home.
    pub fn step_unrestricted(&mut self) -> Result<StepResult> {
        let loc = self.state.pending_location().ok_or(Error::NoPendingOrder)?;
        let outcome = unrestricted_choice(&self.model.params, loc, self.instance, &mut self.rng);
        let offer = match outcome {
            ChoiceOutcome::Pickup { index, .. } => Offer::PickupPoint(index),
            ChoiceOutcome::Home => Offer::HomeOnly,
        };
        self.advance(OfferRecord::Unrestricted, offer, None, outcome)
    }

    fn advance(&mut self, record: OfferRecord, offer: Offer, dist: Option<f64>, outcome: ChoiceOutcome) -> Result<StepResult> {
        let customer_emission = self.model.emission_of(&outcome, &mut self.rng);
        let epoch = self.state.epoch;
        let pending = self.state.pending_order().ok_or(Error::NoPendingOrder)?;
        let feature = self.state.nodes()[pending].feature;
        let next = self.arrivals.get(self.next_arrival).map(|a| (a.time, a.location));
        self.state = self.state.apply_decision(offer, &outcome, next)?;
        self.next_arrival += 1;
        self.records.push(EpochRecord {
            epoch,
            arrival_time: feature.arrival_time,
            location: feature.location,
            offer: record,
            offered_distance: dist,
            outcome,
            customer_emission,
        });

        let mut truck_emission = None;
        if self.state.is_terminal() {
            let route = truck_route(&self.state, self.model.params.e_truck, &self.config.tsp)
                .map_err(|e| Error::Routing { epoch, source: Box::new(e) })?;
            truck_emission = Some(route.1);
            self.route = Some(route);
        }
        Ok(StepResult {
            outcome,
            customer_emission,
            truck_emission,
            cost: customer_emission + truck_emission.unwrap_or(0.0),
            done: self.state.is_terminal(),
        })
    }

    /// Plays the remaining decisions with `policy`.
    pub fn play(&mut self, policy: &mut dyn Policy) -> Result<()> {
        while !self.is_done() {
            match policy.offering() {
                Offering::Single => {
                    let offer = policy.decide(&self.state, self.instance);
                    self.step(offer)?;
                }
                Offering::Unrestricted => {
                    self.step_unrestricted()?;
                }
            }
        }
        Ok(())
    }

    /// Final record; errors if decisions are still pending.
    pub fn into_trace(self) -> Result<EpisodeTrace> {
        let (tour, truck_emission) = self.route.ok_or(Error::NoPendingOrder)?;
        let customer_emission: f64 = self.records.iter().map(|r| r.customer_emission).sum();
        let visited_pickups = self.state.selected_pickups();
        let must_visit = self.state.must_visit_nodes();
        debug_assert!(must_visit.iter().all(|&n| !matches!(self.state.nodes()[n].kind, NodeKind::Customer { pickup: Some(_), .. })));
        Ok(EpisodeTrace {
            epochs: self.records,
            must_visit,
            visited_pickups,
            tour,
            truck_emission,
            customer_emission,
            total_emission: customer_emission + truck_emission,
        })
    }
}

/// Plays one full episode on a fixed arrival sequence.
pub fn run_episode_on<R: Rng>(
    instance: &Instance,
    model: &ChoiceModel,
    config: &EnvConfig,
    policy: &mut dyn Policy,
    arrivals: &[Arrival],
    choice_rng: R,
) -> Result<EpisodeTrace> {
    policy.reset();
    let mut episode = Episode::new(instance, model, *config, arrivals.to_vec(), choice_rng)?;
    episode.play(policy)?;
    episode.into_trace()
}

/// Samples arrivals from `rngs.arrivals` and plays the episode.
pub fn run_episode(
    instance: &Instance,
    model: &ChoiceModel,
    config: &EnvConfig,
    policy: &mut dyn Policy,
    mut rngs: RngBundle,
) -> Result<EpisodeTrace> {
    let arrivals = sample_arrivals(instance, config, &mut rngs.arrivals);
    run_episode_on(instance, model, config, policy, &arrivals, rngs.choices)
}
