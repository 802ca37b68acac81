use dpo_core::env::GraphState;
use dpo_core::policies::Policy;
use dpo_core::{Instance, Offer};
use dpo_neural::{argmax, softmax_in_place, ActorCritic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Action index `|M|` is home-only; smaller indices are pickup points.
pub fn action_to_offer(action: usize, num_pickups: usize) -> Offer {
    if action >= num_pickups {
        Offer::HomeOnly
    } else {
        Offer::PickupPoint(action)
    }
}

pub fn offer_to_action(offer: Offer, num_pickups: usize) -> usize {
    match offer {
        Offer::PickupPoint(m) => m,
        Offer::HomeOnly => num_pickups,
    }
}

/// Highest-probability offer; ties go to the lowest action index.
pub fn act_greedy(net: &ActorCritic, state: &GraphState) -> Offer {
    let (logits, _) = net.evaluate(&net.encode(state));
    action_to_offer(argmax(&logits), net.spec.num_pickups)
}

/// Inverse-CDF draw from the softmax of `logits` with one uniform.
pub fn sample_action<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> usize {
    let mut p = logits.to_vec();
    softmax_in_place(&mut p);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Trained network wrapped as an offering policy.
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub net: ActorCritic,
    /// `None` acts greedily; otherwise actions are sampled from this stream.
    sampler: Option<(u64, ChaCha8Rng)>,
    name: String,
}

impl LearnedPolicy {
    pub fn greedy(net: ActorCritic) -> Self {
        let name = format!("dpo_{}", net.spec.architecture.name());
        Self { net, sampler: None, name }
    }

    pub fn sampling(net: ActorCritic, seed: u64) -> Self {
        let name = format!("dpo_{}_sampled", net.spec.architecture.name());
        Self { net, sampler: Some((seed, ChaCha8Rng::seed_from_u64(seed))), name }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Policy for LearnedPolicy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn decide(&mut self, state: &GraphState, _instance: &Instance) -> Offer {
        match &mut self.sampler {
            None => act_greedy(&self.net, state),
            Some((_, rng)) => {
                let (logits, _) = self.net.evaluate(&self.net.encode(state));
                action_to_offer(sample_action(&logits, rng), self.net.spec.num_pickups)
            }
        }
    }

    fn reset(&mut self) {
        if let Some((seed, rng)) = &mut self.sampler {
            *rng = ChaCha8Rng::seed_from_u64(*seed);
        }
    }
}
