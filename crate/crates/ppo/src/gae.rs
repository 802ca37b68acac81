use dpo_core::Scalar;

/// Generalized advantage estimates and value targets.
///
/// `values[t]` is the critic estimate at step `t`; after a step with
/// `dones[t]` the next value counts as zero. The step after the last one
/// bootstraps from `last_value` unless the last step is terminal.
pub fn compute_gae_bootstrapped<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    last_value: T,
    gamma: T,
    lambda: T,
) -> (Vec<T>, Vec<T>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "rollout arrays differ in length");
    let mut adv = vec![T::zero(); n];
    let mut next_adv = T::zero();
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let targets = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    (adv, targets)
}

/// [`compute_gae_bootstrapped`] for rollouts made of complete episodes.
pub fn compute_gae<T: Scalar>(rewards: &[T], values: &[T], dones: &[bool], gamma: T, lambda: T) -> (Vec<T>, Vec<T>) {
    compute_gae_bootstrapped(rewards, values, dones, T::zero(), gamma, lambda)
}

/// Shifts and scales to zero mean and unit (population) variance; leaves
/// constant inputs centred only.
pub fn normalize<T: Scalar>(xs: &mut [T]) {
    if xs.is_empty() {
        return;
    }
    let n = T::lit(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let scale = if var > T::zero() { T::one() / (var.sqrt() + T::lit(1e-8)) } else { T::one() };
    for x in xs.iter_mut() {
        *x = (*x - mean) * scale;
    }
}
