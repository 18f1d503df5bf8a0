//! Domain types shared by every module, plus MOS rescaling.
//!
//! All scores live on the 1–5 MOS scale. Datasets rated on other scales are
//! mapped onto it with [`normalize_mos`] at ingestion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower end of the unified MOS scale.
pub const MOS_MIN: f64 = 1.0;
/// Upper end of the unified MOS scale.
pub const MOS_MAX: f64 = 5.0;

/// Linearly rescale `raw` from `[lo, hi]` onto `[1, 5]`.
pub fn normalize_mos(raw: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidRange { lo, hi });
    }
    if !(raw >= lo && raw <= hi) {
        return Err(Error::OutOfDomain { value: raw, lo, hi });
    }
    Ok(MOS_MIN + (MOS_MAX - MOS_MIN) * (raw - lo) / (hi - lo))
}

/// Ordered frames of one video: integer frame ids with one feature vector per
/// frame. Every perturbation moves ids and features together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrameSequence")]
pub struct FrameSequence {
    frame_ids: Vec<usize>,
    features: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawFrameSequence {
    frame_ids: Vec<usize>,
    features: Vec<Vec<f64>>,
}

impl TryFrom<RawFrameSequence> for FrameSequence {
    type Error = Error;

    fn try_from(raw: RawFrameSequence) -> Result<Self> {
        FrameSequence::new(raw.frame_ids, raw.features)
    }
}

impl FrameSequence {
    pub fn new(frame_ids: Vec<usize>, features: Vec<Vec<f64>>) -> Result<Self> {
        if frame_ids.is_empty() {
            return Err(Error::InvalidSequence("no frames".into()));
        }
        if frame_ids.len() != features.len() {
            return Err(Error::InvalidSequence(format!(
                "{} frame ids but {} feature vectors",
                frame_ids.len(),
                features.len()
            )));
        }
        let dim = features[0].len();
        if let Some(bad) = features.iter().position(|f| f.len() != dim) {
            return Err(Error::InvalidSequence(format!(
                "frame {bad} has dimension {} (expected {dim})",
                features[bad].len()
            )));
        }
        Ok(Self {
            frame_ids,
            features,
        })
    }

    /// A sequence that carries ids only (zero-dimensional features).
    pub fn from_ids(frame_ids: Vec<usize>) -> Result<Self> {
        let features = vec![Vec::new(); frame_ids.len()];
        Self::new(frame_ids, features)
    }

    pub fn len(&self) -> usize {
        self.frame_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_ids.is_empty()
    }

    /// Per-frame feature dimension.
    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn frame_ids(&self) -> &[usize] {
        &self.frame_ids
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    /// Build a new sequence from source positions. Positions may repeat.
    ///
    /// Panics if `positions` is empty or any position is out of bounds; the
    /// perturbation operators validate before calling.
    pub(crate) fn select(&self, positions: &[usize]) -> Self {
        assert!(
            !positions.is_empty(),
            "selection must keep at least one frame"
        );
        Self {
            frame_ids: positions.iter().map(|&p| self.frame_ids[p]).collect(),
            features: positions
                .iter()
                .map(|&p| self.features[p].clone())
                .collect(),
        }
    }
}

/// A video with its ground-truth MOS on the 1–5 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSample {
    pub id: String,
    pub frames: FrameSequence,
    pub mos: f64,
}

/// One sampled response: rendered text, its parsed score, and the sampling
/// record needed for importance ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityResponse {
    pub text: String,
    pub parsed_score: Option<f64>,
    pub raw_draw: f64,
    pub log_prob_current: f64,
    pub log_prob_old: f64,
}

impl QualityResponse {
    /// The score the likelihood is evaluated at: the parsed score when the
    /// text parses, otherwise the raw draw.
    pub fn action(&self) -> f64 {
        self.parsed_score.unwrap_or(self.raw_draw)
    }
}

/// Per-response reward components and their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub fmt: f64,
    pub reg: f64,
    pub rank: f64,
    pub temp: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(fmt: f64, reg: f64, rank: f64, temp: f64) -> Self {
        Self {
            fmt,
            reg,
            rank,
            temp,
            total: crate::rewards::total_reward(fmt, reg, rank, temp),
        }
    }
}

/// Training and reward hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Responses sampled per video.
    pub k_group: usize,
    /// KL penalty weight.
    pub beta_kl: f64,
    /// Ratio clipping half-width.
    pub clip_eps: f64,
    /// Peak of the regression reward.
    pub alpha_reg: f64,
    /// Width of the regression reward.
    pub sigma_reg: f64,
    /// Temporal bonus per satisfied sub-condition.
    pub delta_temp: f64,
    /// Confidence threshold for the temporal bonus.
    pub tau_temp: f64,
    /// Stabilizer inside square roots and the advantage denominator.
    pub eps_stab: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            k_group: 4,
            beta_kl: 0.04,
            clip_eps: 0.2,
            alpha_reg: 0.8,
            sigma_reg: 0.5,
            delta_temp: 0.3,
            tau_temp: 0.5,
            eps_stab: 1e-8,
            learning_rate: 1e-6,
            batch_size: 64,
            epochs: 3,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_group < 2 {
            return Err(Error::GroupSize(self.k_group));
        }
        if !(self.clip_eps > 0.0) {
            return Err(Error::param("clip_eps", "must be > 0"));
        }
        if !(self.sigma_reg > 0.0) {
            return Err(Error::param("sigma_reg", "must be > 0"));
        }
        if !(self.alpha_reg > 0.0 && self.alpha_reg <= 1.0) {
            return Err(Error::param("alpha_reg", "must lie in (0, 1]"));
        }
        if !(self.eps_stab > 0.0) {
            return Err(Error::param("eps_stab", "must be > 0"));
        }
        if !(self.delta_temp > 0.0) {
            return Err(Error::param("delta_temp", "must be > 0"));
        }
        if !(self.beta_kl >= 0.0) {
            return Err(Error::param("beta_kl", "must be >= 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(
                "learning_rate",
                "must be a positive finite number",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_endpoints_and_midpoint() {
        assert_eq!(normalize_mos(0.0, 0.0, 100.0).unwrap(), 1.0);
        assert_eq!(normalize_mos(100.0, 0.0, 100.0).unwrap(), 5.0);
        assert_eq!(normalize_mos(50.0, 0.0, 100.0).unwrap(), 3.0);
    }

    #[test]
    fn normalize_rejects_bad_range_and_domain() {
        assert!(matches!(
            normalize_mos(1.0, 5.0, 5.0),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            normalize_mos(1.0, 5.0, 1.0),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            normalize_mos(101.0, 0.0, 100.0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(normalize_mos(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn frame_sequence_invariants() {
        assert!(FrameSequence::new(vec![], vec![]).is_err());
        assert!(FrameSequence::new(vec![0, 1], vec![vec![1.0]]).is_err());
        assert!(FrameSequence::new(vec![0, 1], vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        let seq = FrameSequence::from_ids(vec![3, 4]).unwrap();
        assert_eq!(seq.dim(), 0);
        assert_eq!(seq.len(), 2);
    }

    #[test]
    fn frame_sequence_deserialize_validates() {
        let bad = r#"{"frame_ids":[0,1],"features":[[1.0]]}"#;
        assert!(serde_json::from_str::<FrameSequence>(bad).is_err());
        let good = r#"{"frame_ids":[0,1],"features":[[1.0],[2.0]]}"#;
        assert_eq!(
            serde_json::from_str::<FrameSequence>(good).unwrap().len(),
            2
        );
    }

    #[test]
    fn default_hyper_params_validate() {
        HyperParams::default().validate().unwrap();
        let bad = HyperParams {
            k_group: 1,
            ..HyperParams::default()
        };
        assert!(matches!(bad.validate(), Err(Error::GroupSize(1))));
    }

    proptest! {
        #[test]
        fn normalize_is_monotone(lo in -50.0f64..50.0, span in 0.1f64..100.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let hi = lo + span;
            let (x1, x2) = (lo + a.min(b) * span, lo + a.max(b) * span);
            prop_assert!(normalize_mos(x1, lo, hi).unwrap() < normalize_mos(x2, lo, hi).unwrap());
        }

        #[test]
        fn normalize_is_affine(t in 0.0f64..1.0, a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let mix = normalize_mos(t * a + (1.0 - t) * b, 0.0, 100.0).unwrap();
            let split = t * normalize_mos(a, 0.0, 100.0).unwrap()
                + (1.0 - t) * normalize_mos(b, 0.0, 100.0).unwrap();
            prop_assert!((mix - split).abs() < 1e-12);
        }
    }
}
