//! The pluggable policy interface and the reference Gaussian-linear policy.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewards::parse_score;
use crate::types::QualityResponse;

/// Bounds on the policy's standard deviation, enforced by [`Policy::project`].
pub const STD_BOUNDS: (f64, f64) = (1e-4, 10.0);

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A stochastic score policy with a Gaussian response distribution and
/// analytic gradients, so the clipped objective can be differentiated
/// without an autodiff engine.
///
/// Gradients are written into caller-provided buffers of length
/// [`Policy::num_params`], laid out like [`Policy::params`].
pub trait Policy: Clone {
    fn feature_dim(&self) -> usize;

    fn num_params(&self) -> usize;

    /// Mean score and standard deviation for one video.
    fn forward(&self, features: &[f64]) -> Result<(f64, f64)>;

    /// Signed per-feature contributions to the mean, used to render the
    /// reasoning trace.
    fn contributions(&self, features: &[f64]) -> Result<Vec<f64>>;

    fn log_prob(&self, features: &[f64], score: f64) -> Result<f64> {
        let (mean, std) = self.forward(features)?;
        let z = (score - mean) / std;
        Ok(-std.ln() - LN_SQRT_2PI - 0.5 * z * z)
    }

    /// Adds `scale * d log_prob / d params` into `out`.
    fn add_grad_log_prob(
        &self,
        features: &[f64],
        score: f64,
        scale: f64,
        out: &mut [f64],
    ) -> Result<()>;

    /// `KL(self || reference)` of the two response distributions.
    fn kl_to(&self, reference: &Self, features: &[f64]) -> Result<f64> {
        let (mc, sc) = self.forward(features)?;
        let (mr, sr) = reference.forward(features)?;
        Ok(gaussian_kl(mc, sc, mr, sr))
    }

    /// Adds `scale * d KL(self || reference) / d params(self)` into `out`.
    fn add_grad_kl_to(
        &self,
        reference: &Self,
        features: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> Result<()>;

    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, params: &[f64]) -> Result<()>;

    /// Pull the parameters back into their admissible region.
    fn project(&mut self);
}

/// Closed-form `KL(N(mc, sc^2) || N(mr, sr^2))`.
pub fn gaussian_kl(mc: f64, sc: f64, mr: f64, sr: f64) -> f64 {
    (sr / sc).ln() + (sc * sc + (mc - mr).powi(2)) / (2.0 * sr * sr) - 0.5
}

/// Linear mean, learned log standard deviation:
/// `score ~ N(weights . x + bias, exp(log_std)^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub log_std: f64,
}

impl PolicyParams {
    pub fn new(weights: Vec<f64>, bias: f64, log_std: f64) -> Self {
        Self {
            weights,
            bias,
            log_std,
        }
    }

    /// Seeded initialization: small Gaussian weights around a mid-scale
    /// bias.
    pub fn init<R: Rng + ?Sized>(dim: usize, init: &PolicyInit, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, init.weight_std).expect("weight_std is finite and >= 0");
        Self {
            weights: (0..dim).map(|_| normal.sample(rng)).collect(),
            bias: init.bias,
            log_std: init.std.ln(),
        }
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.weights.len() {
            return Err(Error::Shape {
                expected: self.weights.len(),
                got: features.len(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self.bias.is_finite()
            && self.log_std.is_finite()
    }
}

/// Initialization recipe for [`PolicyParams::init`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyInit {
    pub weight_std: f64,
    pub bias: f64,
    pub std: f64,
}

impl Default for PolicyInit {
    fn default() -> Self {
        Self {
            weight_std: 0.02,
            bias: 3.0,
            std: 0.2,
        }
    }
}

/// `(mean, std)` of the Gaussian-linear policy.
pub fn policy_forward(params: &PolicyParams, features: &[f64]) -> Result<(f64, f64)> {
    params.forward(features)
}

impl Policy for PolicyParams {
    fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    fn num_params(&self) -> usize {
        self.weights.len() + 2
    }

    fn forward(&self, features: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(features)?;
        let mean = crate::data::dot(&self.weights, features) + self.bias;
        Ok((mean, self.log_std.exp()))
    }

    fn contributions(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        Ok(self
            .weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .collect())
    }

    fn add_grad_log_prob(
        &self,
        features: &[f64],
        score: f64,
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let (mean, std) = self.forward(features)?;
        let z = (score - mean) / std;
        // d/dmean = z / std, d/dlog_std = z^2 - 1
        let dmean = scale * z / std;
        let d = self.weights.len();
        for (o, x) in out[..d].iter_mut().zip(features) {
            *o += dmean * x;
        }
        out[d] += dmean;
        out[d + 1] += scale * (z * z - 1.0);
        Ok(())
    }

    fn add_grad_kl_to(
        &self,
        reference: &Self,
        features: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let (mc, sc) = self.forward(features)?;
        let (mr, sr) = reference.forward(features)?;
        let var_r = sr * sr;
        let dmean = scale * (mc - mr) / var_r;
        let d = self.weights.len();
        for (o, x) in out[..d].iter_mut().zip(features) {
            *o += dmean * x;
        }
        out[d] += dmean;
        out[d + 1] += scale * (sc * sc / var_r - 1.0);
        Ok(())
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p.push(self.log_std);
        p
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Shape {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let d = self.weights.len();
        self.weights.copy_from_slice(&params[..d]);
        self.bias = params[d];
        self.log_std = params[d + 1];
        Ok(())
    }

    fn project(&mut self) {
        self.log_std = self.log_std.clamp(STD_BOUNDS.0.ln(), STD_BOUNDS.1.ln());
    }
}

/// Human-readable name of video-level feature `index` out of `dim`.
pub fn channel_name(index: usize, dim: usize) -> String {
    if dim < 4 {
        return format!("feature {index}");
    }
    match index {
        0 => "sharpness".into(),
        1 => "noise".into(),
        i if i + 1 == dim => "temporal coherence".into(),
        i if i + 2 == dim => "motion phase".into(),
        i => format!("content descriptor {}", i - 1),
    }
}

/// Render the reasoning trace from the two largest-magnitude contributions.
fn render_trace(contributions: &[f64]) -> String {
    let mut order: Vec<usize> = (0..contributions.len()).collect();
    order.sort_by(|&a, &b| contributions[b].abs().total_cmp(&contributions[a].abs()));
    let parts: Vec<String> = order
        .iter()
        .take(2)
        .map(|&i| {
            let c = contributions[i];
            let verb = if c >= 0.0 { "raises" } else { "lowers" };
            format!(
                "{} {verb} the score by {:.2}",
                channel_name(i, contributions.len()),
                c.abs()
            )
        })
        .collect();
    if parts.is_empty() {
        "no visual evidence".into()
    } else {
        parts.join("; ")
    }
}

/// Draw one response from `policy`: sample a score, render the tagged text
/// with the score rounded to two decimals, and record the log-probability
/// of that rounded score.
pub fn sample_response<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    features: &[f64],
    rng: &mut R,
) -> Result<QualityResponse> {
    let (mean, std) = policy.forward(features)?;
    let draw = mean + std * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let trace = render_trace(&policy.contributions(features)?);
    let text = format!("<think>{trace}</think><answer>{draw:.2}</answer>");
    let parsed_score = parse_score(&text);
    let at = parsed_score.unwrap_or(draw);
    let log_prob = policy.log_prob(features, at)?;
    Ok(QualityResponse {
        text,
        parsed_score,
        raw_draw: draw,
        log_prob_current: log_prob,
        log_prob_old: log_prob,
    })
}
