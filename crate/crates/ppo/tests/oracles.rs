use dpo_ppo::{compute_gae, entropy, sample_loss, LossWeights, SampleTargets};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Advantage as an explicit discounted sum of TD errors up to the end of the
/// current episode.
fn brute_gae(r: &[f64], v: &[f64], done: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            for l in t..n {
                let next_v = if done[l] || l + 1 == n { 0.0 } else { v[l + 1] };
                let delta = r[l] + gamma * next_v - v[l];
                total += (gamma * lambda).powi((l - t) as i32) * delta;
                if done[l] {
                    break;
                }
            }
            total
        })
        .collect()
}

#[test]
fn gae_matches_double_sum_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut done: Vec<bool> = (0..n).map(|_| rng.random_bool(0.15)).collect();
        done[n - 1] = true;
        let gamma = rng.random_range(0.5..=1.0);
        let lambda = rng.random_range(0.0..=1.0);
        let (adv, targets) = compute_gae(&r, &v, &done, gamma, lambda);
        let oracle = brute_gae(&r, &v, &done, gamma, lambda);
        for t in 0..n {
            worst = worst.max((adv[t] - oracle[t]).abs());
            assert_eq!(targets[t], adv[t] + v[t]);
        }
    }
    assert!(worst < 1e-10, "max abs error {worst}");
}

/// Loss recomputed term by term from probabilities.
fn scalar_loss(logits: &[f64], value: f64, s: &SampleTargets, w: &LossWeights) -> f64 {
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    let p: Vec<f64> = logits.iter().map(|l| l.exp() / z).collect();
    let ratio = p[s.action] / s.old_log_prob.exp();
    let clipped = ratio.clamp(1.0 - w.clip_eps, 1.0 + w.clip_eps);
    let surrogate = (ratio * s.advantage).min(clipped * s.advantage);
    let h: f64 = -p.iter().map(|q| q * q.ln()).sum::<f64>();
    -surrogate + w.value_coef * (value - s.value_target).powi(2) - w.entropy_coef * h
}

fn random_case(rng: &mut ChaCha8Rng) -> (Vec<f64>, f64, SampleTargets, LossWeights) {
    let k = rng.random_range(1..6);
    let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
    let s = SampleTargets {
        action: rng.random_range(0..k),
        old_log_prob: rng.random_range(-3.0..-0.05),
        advantage: rng.random_range(-2.0..2.0),
        value_target: rng.random_range(-1.0..1.0),
    };
    let w = LossWeights { clip_eps: 0.2, value_coef: rng.random_range(0.1..2.0), entropy_coef: rng.random_range(0.0..0.1) };
    (logits, rng.random_range(-1.0..1.0), s, w)
}

#[test]
fn loss_matches_scalar_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let (logits, value, s, w) = random_case(&mut rng);
        let l = sample_loss(&logits, value, &s, &w);
        assert!((l.loss - scalar_loss(&logits, value, &s, &w)).abs() < 1e-10);
    }
}

#[test]
fn loss_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    let mut checked = 0;
    for _ in 0..500 {
        let (logits, value, s, w) = random_case(&mut rng);
        let l = sample_loss(&logits, value, &s, &w);
        // skip points within h of the clip boundary
        let r = l.ratio;
        if (r - 0.8).abs() < 1e-4 || (r - 1.2).abs() < 1e-4 {
            continue;
        }
        for k in 0..logits.len() {
            let mut up = logits.clone();
            up[k] += h;
            let mut down = logits.clone();
            down[k] -= h;
            let fd = (scalar_loss(&up, value, &s, &w) - scalar_loss(&down, value, &s, &w)) / (2.0 * h);
            assert!((fd - l.dlogits[k]).abs() < 1e-6, "{fd} vs {}", l.dlogits[k]);
        }
        let fd = (scalar_loss(&logits, value + h, &s, &w) - scalar_loss(&logits, value - h, &s, &w)) / (2.0 * h);
        assert!((fd - l.dvalue).abs() < 1e-6);
        checked += 1;
    }
    assert!(checked > 400);
}

proptest! {
    #[test]
    fn clipped_objective_bounds_the_surrogate(
        logits in prop::collection::vec(-3.0f64..3.0, 1..6),
        old in -4.0f64..-0.01,
        adv in -3.0f64..3.0,
        pick in 0usize..6,
    ) {
        let s = SampleTargets { action: pick % logits.len(), old_log_prob: old, advantage: adv, value_target: 0.0 };
        let w = LossWeights { clip_eps: 0.2, value_coef: 1.0, entropy_coef: 0.01 };
        let l = sample_loss(&logits, 0.0, &s, &w);
        prop_assert!(l.clipped_surrogate <= l.surrogate);
    }

    #[test]
    fn entropy_matches_definition(logits in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        let h: f64 = -logits.iter().map(|l| { let p = l.exp() / z; p * p.ln() }).sum::<f64>();
        prop_assert!((entropy(&logits) - h).abs() < 1e-10);
    }
}
