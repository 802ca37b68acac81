//! Clipped PPO objective for one sample, with analytic gradients with
//! respect to the network outputs.

use dpo_core::Scalar;

/// Coefficients of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<T = f64> {
    pub clip_eps: T,
    pub value_coef: T,
    pub entropy_coef: T,
}

/// One training sample as seen by the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleTargets<T = f64> {
    pub action: usize,
    pub old_log_prob: T,
    pub advantage: T,
    pub value_target: T,
}

/// Objective terms and the gradient of the minimized loss
/// `-(clipped surrogate) + c1 (V - V_target)^2 - c2 H` with respect to the
/// logits and the value output.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLoss<T = f64> {
    /// `min(r A, clip(r, 1-eps, 1+eps) A)`.
    pub clipped_surrogate: T,
    /// `r A`.
    pub surrogate: T,
    pub value_error: T,
    pub entropy: T,
    pub ratio: T,
    pub log_prob: T,
    /// True when the clipped branch is strictly smaller.
    pub clipped: bool,
    pub loss: T,
    pub dlogits: Vec<T>,
    pub dvalue: T,
}

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&l| l - lse).collect()
}

pub fn entropy<T: Scalar>(logits: &[T]) -> T {
    log_softmax(logits).iter().map(|&lp| -lp.exp() * lp).sum()
}

pub fn sample_loss<T: Scalar>(logits: &[T], value: T, s: &SampleTargets<T>, w: &LossWeights<T>) -> SampleLoss<T> {
    let logp = log_softmax(logits);
    let probs: Vec<T> = logp.iter().map(|l| l.exp()).collect();
    let h: T = logp.iter().zip(&probs).map(|(&l, &p)| -p * l).sum();
    let log_prob = logp[s.action];
    let ratio = (log_prob - s.old_log_prob).exp();
    let clipped_ratio = ratio.max(T::one() - w.clip_eps).min(T::one() + w.clip_eps);
    let surrogate = ratio * s.advantage;
    let clipped_term = clipped_ratio * s.advantage;
    let clipped = clipped_term < surrogate;
    let clipped_surrogate = if clipped { clipped_term } else { surrogate };
    let value_error = value - s.value_target;
    let loss = -clipped_surrogate + w.value_coef * value_error * value_error - w.entropy_coef * h;

    // d(surrogate)/d(log pi(a)) is r A on the unclipped branch, 0 otherwise
    let dsur_dlogp = if clipped { T::zero() } else { surrogate };
    let dlogits = probs
        .iter()
        .zip(&logp)
        .enumerate()
        .map(|(k, (&p, &l))| {
            let onehot = if k == s.action { T::one() } else { T::zero() };
            let dlogp = onehot - p;
            let dh = -p * (l + h);
            -dsur_dlogp * dlogp - w.entropy_coef * dh
        })
        .collect();
    let dvalue = T::lit(2.0) * w.value_coef * value_error;
    SampleLoss { clipped_surrogate, surrogate, value_error, entropy: h, ratio, log_prob, clipped, loss, dlogits, dvalue }
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: LossWeights = LossWeights { clip_eps: 0.2, value_coef: 1.0, entropy_coef: 0.01 };

    #[test]
    fn identity_ratio() {
        let logits = [0.3, -0.1, 0.8];
        let lp = log_softmax(&logits)[1];
        let s = SampleTargets { action: 1, old_log_prob: lp, advantage: 1.7, value_target: 0.0 };
        let l = sample_loss(&logits, 0.0, &s, &W);
        assert_eq!(l.ratio, 1.0);
        assert_eq!(l.clipped_surrogate, l.surrogate);
        assert!(!l.clipped);
    }

    #[test]
    fn clipped_branch_has_no_ratio_gradient() {
        let logits = [0.3, -0.1, 0.8];
        let lp = log_softmax(&logits)[0];
        // ratio = 1 + 2 eps
        let s = SampleTargets { action: 0, old_log_prob: lp - 1.4f64.ln(), advantage: 2.0, value_target: 0.0 };
        let w = LossWeights { entropy_coef: 0.0, ..W };
        let l = sample_loss(&logits, 0.0, &s, &w);
        assert!((l.ratio - 1.4).abs() < 1e-12);
        assert!(l.clipped);
        assert!((l.clipped_surrogate - 1.2 * 2.0).abs() < 1e-12);
        assert!(l.dlogits.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn entropy_of_uniform() {
        assert!((entropy(&[0.0; 4]) - 4f64.ln()).abs() < 1e-15);
    }
}
