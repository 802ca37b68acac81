use rand::Rng;

use crate::choice::{softmax, ChoiceOutcome, ChoiceParams};
use crate::geometry::{distance, Location};
use crate::instance::Instance;

/// Logit shares over every pickup point (by index) followed by home.
pub fn unrestricted_probabilities(params: &ChoiceParams, order: Location, instance: &Instance) -> Vec<f64> {
    let mut utilities: Vec<f64> =
        instance.pickup_points.iter().map(|p| params.pickup_utility(distance(order, *p))).collect();
    utilities.push(params.u0_home);
    softmax(&utilities)
}

/// Free choice among all pickup points and home delivery. Consumes one uniform.
pub fn unrestricted_choice<R: Rng + ?Sized>(
    params: &ChoiceParams,
    order: Location,
    instance: &Instance,
    rng: &mut R,
) -> ChoiceOutcome {
    let probs = unrestricted_probabilities(params, order, instance);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (index, p) in probs[..probs.len() - 1].iter().enumerate() {
        acc += p;
        if u < acc {
            return ChoiceOutcome::Pickup { index, distance: distance(order, instance.pickup_points[index]) };
        }
    }
    ChoiceOutcome::Home
}
