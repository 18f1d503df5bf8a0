//! Group-standardized advantages and the clipped, KL-regularized surrogate.

use serde::{Deserialize, Serialize};

use super::policy::Policy;
use crate::error::{Error, Result};
use crate::types::{HyperParams, QualityResponse, RewardBreakdown};

/// Ratios above this are clamped.
pub const MAX_RATIO: f64 = 1e6;

/// One video's sampled responses, their rewards and standardized advantages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub video_id: String,
    /// Policy input the responses were sampled from.
    pub features: Vec<f64>,
    pub responses: Vec<QualityResponse>,
    pub rewards: Vec<RewardBreakdown>,
    pub advantages: Vec<f64>,
}

/// Counters for numerical events during an objective evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ratio_clamps: u64,
}

/// `(r - mean) / max(std, eps)` with the population std; all zeros when
/// every reward is equal.
///
/// The guard takes the maximum rather than adding `eps`, so any group whose
/// std exceeds `eps` comes out with unit std exactly, not `std / (std + eps)`.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::GroupSize(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Ok(vec![0.0; rewards.len()]);
    }
    let denom = var.sqrt().max(eps);
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// `exp(log_p_current - log_p_old)`, clamped to [`MAX_RATIO`].
pub fn importance_ratio(log_p_current: f64, log_p_old: f64, diag: &mut Diagnostics) -> f64 {
    let ratio = (log_p_current - log_p_old).exp();
    if ratio > MAX_RATIO || ratio.is_nan() {
        diag.ratio_clamps += 1;
        return MAX_RATIO;
    }
    ratio
}

/// `min(ratio * a, clip(ratio, 1 - eps, 1 + eps) * a)`.
pub fn clipped_term(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Whether the unclipped branch is the active one (it carries the gradient).
fn unclipped_active(ratio: f64, advantage: f64, clip_eps: f64) -> bool {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    ratio * advantage <= clipped * advantage
}

/// KL of the current policy to the reference at one video's features.
pub fn kl_to_reference<P: Policy>(policy: &P, reference: &P, features: &[f64]) -> Result<f64> {
    policy.kl_to(reference, features)
}

/// Objective value and its gradient with respect to the policy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    /// Ascent direction, laid out like [`Policy::params`].
    pub gradient: Vec<f64>,
    pub mean_kl: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub diagnostics: Diagnostics,
}

/// Mean over every (group, response) of `clipped_term - beta * KL`.
///
/// Advantages and the old / reference policies are constants. The
/// likelihood of each response is evaluated at [`QualityResponse::action`].
pub fn grpo_objective<P: Policy>(
    groups: &[RolloutGroup],
    policy: &P,
    old: &P,
    reference: &P,
    hyper: &HyperParams,
) -> Result<ObjectiveValue> {
    let count: usize = groups.iter().map(|g| g.responses.len()).sum();
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    let inv = 1.0 / count as f64;
    let mut gradient = vec![0.0; policy.num_params()];
    let mut diag = Diagnostics::default();
    let (mut value, mut kl_sum, mut ratio_sum, mut clipped) = (0.0, 0.0, 0.0, 0usize);

    for group in groups {
        if group.advantages.len() != group.responses.len() {
            return Err(Error::LengthMismatch(
                group.advantages.len(),
                group.responses.len(),
            ));
        }
        let x = &group.features;
        let kl = policy.kl_to(reference, x)?;
        let k = group.responses.len() as f64;
        kl_sum += kl * k;
        value -= hyper.beta_kl * kl * k * inv;
        policy.add_grad_kl_to(reference, x, -hyper.beta_kl * k * inv, &mut gradient)?;

        for (response, &adv) in group.responses.iter().zip(&group.advantages) {
            let action = response.action();
            let log_cur = policy.log_prob(x, action)?;
            let log_old = old.log_prob(x, action)?;
            let clamps_before = diag.ratio_clamps;
            let ratio = importance_ratio(log_cur, log_old, &mut diag);
            ratio_sum += ratio;
            value += clipped_term(ratio, adv, hyper.clip_eps) * inv;
            if (ratio - ratio.clamp(1.0 - hyper.clip_eps, 1.0 + hyper.clip_eps)).abs() > 0.0 {
                clipped += 1;
            }
            let saturated = diag.ratio_clamps != clamps_before;
            if !saturated && unclipped_active(ratio, adv, hyper.clip_eps) {
                // d(ratio * a) = a * ratio * d log pi
                policy.add_grad_log_prob(x, action, adv * ratio * inv, &mut gradient)?;
            }
        }
    }

    Ok(ObjectiveValue {
        value,
        gradient,
        mean_kl: kl_sum * inv,
        mean_ratio: ratio_sum * inv,
        clip_fraction: clipped as f64 * inv,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grpo::policy::PolicyParams;

    #[test]
    fn advantage_examples() {
        let a = group_advantages(&[1.0, 2.0, 3.0, 4.0], 0.0).unwrap();
        // mean 2.5, population std sqrt(1.25)
        let s = 1.25f64.sqrt();
        let expected = [-1.5 / s, -0.5 / s, 0.5 / s, 1.5 / s];
        for (x, e) in a.iter().zip(expected) {
            assert!((x - e).abs() < 1e-12);
        }
        assert!((a[0] + 1.341_641).abs() < 1e-6 && (a[1] + 0.447_214).abs() < 1e-6);
        assert_eq!(group_advantages(&[0.5; 4], 1e-8).unwrap(), vec![0.0; 4]);
        assert!(matches!(
            group_advantages(&[1.0], 1e-8),
            Err(Error::GroupSize(1))
        ));
    }

    #[test]
    fn ratio_examples() {
        let mut d = Diagnostics::default();
        assert_eq!(importance_ratio(-1.3, -1.3, &mut d), 1.0);
        assert!((importance_ratio(1.5f64.ln(), 0.0, &mut d) - 1.5).abs() < 1e-15);
        assert_eq!(d.ratio_clamps, 0);
        assert_eq!(importance_ratio(800.0, 0.0, &mut d), MAX_RATIO);
        assert_eq!(importance_ratio(20.0, 0.0, &mut d), MAX_RATIO);
        assert_eq!(d.ratio_clamps, 2);
    }

    #[test]
    fn clipped_term_examples() {
        assert!((clipped_term(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert_eq!(clipped_term(1.5, -1.0, 0.2), -1.5);
        for a in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            assert_eq!(clipped_term(1.0, a, 0.2), a);
        }
        assert!((clipped_term(0.5, 1.0, 0.2) - 0.5).abs() < 1e-15);
        assert!((clipped_term(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let p = PolicyParams::new(vec![0.0], 3.0, 0.0);
        assert!(matches!(
            grpo_objective(&[], &p, &p, &p, &HyperParams::default()),
            Err(Error::EmptyBatch)
        ));
    }
}
