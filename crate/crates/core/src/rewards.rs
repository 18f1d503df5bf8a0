//! Quality-assessment rewards: format, bell-shaped regression, pairwise
//! fidelity ranking, and the group-level temporal consistency bonus.
//!
//! Rewards are computed per response, but the ranking and temporal terms need
//! statistics over a whole group of `K` responses, so [`GroupStats`] is built
//! once per group before scoring individual responses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{HyperParams, QualityResponse, RewardBreakdown};

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";
const TAGS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];

fn parse_number(body: &str) -> Option<f64> {
    let body = body.trim();
    // f64::from_str also accepts "inf" and "nan"; only finite decimals count.
    if !body.starts_with(|c: char| c.is_ascii_digit() || matches!(c, '-' | '+' | '.')) {
        return None;
    }
    body.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// `1.0` iff the text is exactly `<think>…</think><answer>number</answer>`,
/// with optional surrounding whitespace, otherwise `0.0`.
pub fn format_reward(text: &str) -> f64 {
    if matches_format(text) {
        1.0
    } else {
        0.0
    }
}

fn matches_format(text: &str) -> bool {
    let Some(rest) = text.trim().strip_prefix(THINK_OPEN) else {
        return false;
    };
    let Some((think, rest)) = rest.split_once(THINK_CLOSE) else {
        return false;
    };
    if think.trim().is_empty() || TAGS.iter().any(|t| think.contains(t)) {
        return false;
    }
    let Some(rest) = rest.trim_start().strip_prefix(ANSWER_OPEN) else {
        return false;
    };
    let Some(answer) = rest.strip_suffix(ANSWER_CLOSE) else {
        return false;
    };
    !TAGS.iter().any(|t| answer.contains(t)) && parse_number(answer).is_some()
}

/// The number inside the first `<answer>` pair, if any. Nothing is clamped.
pub fn parse_score(text: &str) -> Option<f64> {
    let start = text.find(ANSWER_OPEN)? + ANSWER_OPEN.len();
    let len = text[start..].find(ANSWER_CLOSE)?;
    parse_number(&text[start..start + len])
}

/// `alpha * exp(-(s - g)^2 / (2 sigma^2))`.
pub fn regression_reward(score: f64, truth: f64, alpha: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be > 0"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1]"));
    }
    let err = score - truth;
    Ok(alpha * (-(err * err) / (2.0 * sigma * sigma)).exp())
}

/// Standard normal CDF.
///
/// Evaluated as `erfc(-x / sqrt 2) / 2`; the complementary form keeps full
/// relative precision in the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Mean and population variance of the parsed scores in one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub scores: Vec<f64>,
    pub mean: f64,
    pub var: f64,
}

impl GroupStats {
    /// Statistics over the scores that parsed. Returns a degenerate-group
    /// error when none did.
    pub fn from_scores(scores: impl IntoIterator<Item = Option<f64>>) -> Result<Self> {
        let scores: Vec<f64> = scores.into_iter().flatten().collect();
        if scores.is_empty() {
            return Err(Error::DegenerateGroup);
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        Ok(Self { scores, mean, var })
    }

    pub fn from_responses(responses: &[QualityResponse]) -> Result<Self> {
        Self::from_scores(responses.iter().map(|r| r.parsed_score))
    }
}

/// A video's group paired with its comparison partner.
#[derive(Debug, Clone, PartialEq)]
pub struct PairContext<'a> {
    pub self_group: &'a GroupStats,
    pub other_group: &'a GroupStats,
    pub g_self: f64,
    pub g_other: f64,
}

/// Probability that `score` (one response of the own group) outranks the
/// partner group's mean, under a Gaussian comparison model.
pub fn comparative_probability(score: f64, ctx: &PairContext<'_>, eps: f64) -> f64 {
    let spread = (ctx.self_group.var + ctx.other_group.var + eps).sqrt();
    normal_cdf((score - ctx.other_group.mean) / spread)
}

/// Fidelity reward of a predicted preference `p` against the true order of
/// `g_self` and `g_other`. Ties use a soft label of 0.5 on both terms.
pub fn ranking_reward(p: f64, g_self: f64, g_other: f64, eps: f64) -> f64 {
    let (above, below) = if g_self > g_other {
        (1.0, 0.0)
    } else if g_self < g_other {
        (0.0, 1.0)
    } else {
        (0.5, 0.5)
    };
    (p * above + eps).sqrt() + ((1.0 - p) * below + eps).sqrt()
}

/// `delta` when the raw video's mean reward is at least the perturbed one's
/// and clears `tau`, otherwise zero.
pub fn temporal_sub_reward(mu_raw: f64, mu_pert: f64, delta: f64, tau: f64) -> f64 {
    if mu_raw >= mu_pert && mu_raw > tau {
        delta
    } else {
        0.0
    }
}

/// Sum of the regression and ranking temporal sub-rewards.
pub fn temporal_reward(
    raw_reg_mean: f64,
    raw_rank_mean: f64,
    pert_reg_mean: f64,
    pert_rank_mean: f64,
    delta: f64,
    tau: f64,
) -> f64 {
    temporal_sub_reward(raw_reg_mean, pert_reg_mean, delta, tau)
        + temporal_sub_reward(raw_rank_mean, pert_rank_mean, delta, tau)
}

/// `fmt + reg + rank + temp`, always summed in this order.
pub fn total_reward(fmt: f64, reg: f64, rank: f64, temp: f64) -> f64 {
    fmt + reg + rank + temp
}

/// The comparison partner of a group: its statistics and ground truth.
#[derive(Debug, Clone, Copy)]
pub struct Partner<'a> {
    pub stats: &'a GroupStats,
    pub mos: f64,
}

/// Format, regression and ranking rewards for every response of one group.
/// The temporal component is left at zero; see [`with_temporal_bonus`].
///
/// Responses whose score does not parse earn zero regression and ranking
/// reward. A group with no parsed score, or a missing / degenerate partner,
/// earns zero ranking reward throughout.
pub fn score_group(
    responses: &[QualityResponse],
    mos: f64,
    partner: Option<Partner<'_>>,
    hyper: &HyperParams,
) -> Result<Vec<RewardBreakdown>> {
    let own = GroupStats::from_responses(responses).ok();
    let pair = match (&own, partner) {
        (Some(own), Some(partner)) => Some(PairContext {
            self_group: own,
            other_group: partner.stats,
            g_self: mos,
            g_other: partner.mos,
        }),
        _ => None,
    };
    responses
        .iter()
        .map(|r| {
            let fmt = format_reward(&r.text);
            let (reg, rank) = match r.parsed_score {
                Some(s) => {
                    let reg = regression_reward(s, mos, hyper.alpha_reg, hyper.sigma_reg)?;
                    let rank = pair.as_ref().map_or(0.0, |ctx| {
                        let p = comparative_probability(s, ctx, hyper.eps_stab);
                        ranking_reward(p, ctx.g_self, ctx.g_other, hyper.eps_stab)
                    });
                    (reg, rank)
                }
                None => (0.0, 0.0),
            };
            Ok(RewardBreakdown::new(fmt, reg, rank, 0.0))
        })
        .collect()
}

fn mean_of(rewards: &[RewardBreakdown], f: impl Fn(&RewardBreakdown) -> f64) -> f64 {
    if rewards.is_empty() {
        return 0.0;
    }
    rewards.iter().map(f).sum::<f64>() / rewards.len() as f64
}

/// The temporal bonus earned by a raw group against its perturbed twin.
pub fn temporal_bonus(
    raw: &[RewardBreakdown],
    twin: &[RewardBreakdown],
    hyper: &HyperParams,
) -> f64 {
    temporal_reward(
        mean_of(raw, |r| r.reg),
        mean_of(raw, |r| r.rank),
        mean_of(twin, |r| r.reg),
        mean_of(twin, |r| r.rank),
        hyper.delta_temp,
        hyper.tau_temp,
    )
}

/// Add the same temporal bonus to every response of the raw group.
pub fn with_temporal_bonus(raw: &mut [RewardBreakdown], temp: f64) {
    for r in raw {
        *r = RewardBreakdown::new(r.fmt, r.reg, r.rank, temp);
    }
}
