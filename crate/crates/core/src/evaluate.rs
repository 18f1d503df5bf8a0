//! Held-out evaluation with the deterministic policy mean.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::policy_input;
use crate::error::{Error, Result};
use crate::grpo::policy::Policy;
use crate::grpo::train::predict_means;
use crate::metrics::{plcc, srcc};
use crate::perturb::apply_random_perturbation;
use crate::types::VideoSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub srcc: f64,
    pub plcc: f64,
    pub n: usize,
}

pub fn evaluate_predictions(pred: &[f64], mos: &[f64]) -> Result<EvalReport> {
    Ok(EvalReport {
        srcc: srcc(pred, mos)?,
        plcc: plcc(pred, mos)?,
        n: pred.len(),
    })
}

/// Policy mean score for every video.
pub fn predict<P: Policy>(
    policy: &P,
    videos: &[VideoSample],
    zero_coherence: bool,
) -> Result<Vec<f64>> {
    if let Some(v) = videos.first() {
        let dim = policy_input(&v.frames, zero_coherence)?.len();
        if dim != policy.feature_dim() {
            return Err(Error::Shape {
                expected: policy.feature_dim(),
                got: dim,
            });
        }
    }
    predict_means(policy, videos, zero_coherence)
}

pub fn evaluate<P: Policy>(
    policy: &P,
    videos: &[VideoSample],
    zero_coherence: bool,
) -> Result<EvalReport> {
    let pred = predict(policy, videos, zero_coherence)?;
    let mos: Vec<f64> = videos.iter().map(|v| v.mos).collect();
    evaluate_predictions(&pred, &mos)
}

/// Fraction of videos whose mean score beats that of a randomly perturbed
/// twin. Ties count as half a win.
pub fn temporal_discrimination_rate<P: Policy>(
    policy: &P,
    videos: &[VideoSample],
    seed: u64,
    zero_coherence: bool,
) -> Result<f64> {
    if videos.is_empty() {
        return Err(Error::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wins = 0.0;
    for v in videos {
        let (twin, _) = apply_random_perturbation(&v.frames, rng.next_u64())?;
        let raw = policy.forward(&policy_input(&v.frames, zero_coherence)?)?.0;
        let pert = policy.forward(&policy_input(&twin, zero_coherence)?)?.0;
        if raw > pert {
            wins += 1.0;
        } else if raw == pert {
            wins += 0.5;
        }
    }
    Ok(wins / videos.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthSpec};
    use crate::grpo::policy::PolicyParams;

    #[test]
    fn oracle_weights_rank_noise_free_data_perfectly() {
        let ds = generate_synthetic(&SynthSpec {
            n_videos: 64,
            noise_std: 0.0,
            ..SynthSpec::default()
        })
        .unwrap();
        let (w, b) = ds.oracle.mos_weights();
        let p = PolicyParams::new(w, b, 0.0);
        let r = evaluate(&p, &ds.videos, false).unwrap();
        assert!(r.srcc > 0.999 && r.plcc > 0.99, "{r:?}");
        assert_eq!(r.n, 64);
    }

    #[test]
    fn constant_policy_ties_everywhere() {
        let ds = generate_synthetic(&SynthSpec {
            n_videos: 16,
            ..SynthSpec::default()
        })
        .unwrap();
        let p = PolicyParams::new(vec![0.0; 8], 3.0, 0.0);
        assert_eq!(
            temporal_discrimination_rate(&p, &ds.videos, 5, false).unwrap(),
            0.5
        );
        assert!(evaluate(&p, &ds.videos, false).is_err());
    }
}
