//! Rollouts and the training loop.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{group_advantages, grpo_objective, Diagnostics, RolloutGroup};
use super::policy::{sample_response, Policy, PolicyInit, PolicyParams};
use crate::data::policy_input;
use crate::error::{Error, Result};
use crate::metrics::srcc;
use crate::perturb::{apply_random_perturbation, PerturbSpec};
use crate::rewards::{score_group, temporal_bonus, with_temporal_bonus, GroupStats, Partner};
use crate::types::{HyperParams, QualityResponse, RewardBreakdown, VideoSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hyper: HyperParams,
    /// Seeds initialization, shuffling, sampling and perturbations.
    pub seed: u64,
    /// Seeds the per-step ranking partner assignment.
    pub pairing_seed: u64,
    /// Build a perturbed twin per video and grant the temporal bonus.
    pub perturb_every_step: bool,
    /// Hide the coherence channel from the policy.
    pub zero_coherence: bool,
    pub init: PolicyInit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hyper: HyperParams::default(),
            seed: 0,
            pairing_seed: 1,
            perturb_every_step: true,
            zero_coherence: false,
            init: PolicyInit::default(),
        }
    }
}

/// One JSONL training log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub epoch: usize,
    pub mean_total_reward: f64,
    pub mean_fmt: f64,
    pub mean_reg: f64,
    pub mean_rank: f64,
    pub mean_temp: f64,
    pub mean_kl: f64,
    pub objective: f64,
    /// SRCC of the updated policy's mean scores on the probe set; `None`
    /// when undefined (constant predictions).
    pub probe_srcc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome<P> {
    pub policy: P,
    pub log: Vec<LogRow>,
    pub diagnostics: Diagnostics,
}

/// A perturbed counterpart, scored only for comparison with its raw video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinGroup {
    pub spec: PerturbSpec,
    pub features: Vec<f64>,
    pub responses: Vec<QualityResponse>,
    pub rewards: Vec<RewardBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRollout {
    pub groups: Vec<RolloutGroup>,
    pub twins: Vec<Option<TwinGroup>>,
}

/// A uniformly random derangement of `0..n` (`partner[i] != i`). A single
/// video has no partner.
pub fn random_derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Option<usize>> {
    if n < 2 {
        return vec![None; n];
    }
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return perm.into_iter().map(Some).collect();
        }
    }
}

fn sample_group<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    features: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<QualityResponse>> {
    (0..k)
        .map(|_| sample_response(policy, features, rng))
        .collect()
}

/// Sample `K` responses per video from the old policy, score them, and
/// standardize each group's totals.
///
/// `partners[i]` indexes the video `batch[i]` is ranked against. When
/// `cfg.perturb_every_step` is set every video also gets a perturbed twin;
/// the twin's rewards only decide the temporal bonus and never become
/// advantages.
pub fn rollout_batch<P: Policy, R: RngCore>(
    batch: &[&VideoSample],
    old: &P,
    partners: &[Option<usize>],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<BatchRollout> {
    let hyper = &cfg.hyper;
    if partners.len() != batch.len() {
        return Err(Error::LengthMismatch(partners.len(), batch.len()));
    }
    let k = hyper.k_group;

    let mut raw = Vec::with_capacity(batch.len());
    for video in batch {
        let x = policy_input(&video.frames, cfg.zero_coherence)?;
        let responses = sample_group(old, &x, k, rng)?;
        raw.push((x, responses));
    }
    let mut twin_samples = Vec::new();
    if cfg.perturb_every_step {
        for video in batch {
            let (frames, spec) = apply_random_perturbation(&video.frames, rng.next_u64())?;
            let x = policy_input(&frames, cfg.zero_coherence)?;
            let responses = sample_group(old, &x, k, rng)?;
            twin_samples.push((spec, x, responses));
        }
    }

    let stats: Vec<Option<GroupStats>> = raw
        .iter()
        .map(|(_, r)| GroupStats::from_responses(r).ok())
        .collect();
    let partner_of = |i: usize| {
        partners[i].and_then(|j| {
            stats[j].as_ref().map(|s| Partner {
                stats: s,
                mos: batch[j].mos,
            })
        })
    };

    let mut groups = Vec::with_capacity(batch.len());
    let mut twins = Vec::with_capacity(batch.len());
    let mut twin_iter = twin_samples.into_iter();
    for (i, ((x, responses), video)) in raw.into_iter().zip(batch).enumerate() {
        let mut rewards = score_group(&responses, video.mos, partner_of(i), hyper)?;
        let twin = match twin_iter.next() {
            Some((spec, tx, tresp)) => {
                let trewards = score_group(&tresp, video.mos, partner_of(i), hyper)?;
                let bonus = temporal_bonus(&rewards, &trewards, hyper);
                with_temporal_bonus(&mut rewards, bonus);
                Some(TwinGroup {
                    spec,
                    features: tx,
                    responses: tresp,
                    rewards: trewards,
                })
            }
            None => None,
        };
        let totals: Vec<f64> = rewards.iter().map(|r| r.total).collect();
        let advantages = group_advantages(&totals, hyper.eps_stab)?;
        groups.push(RolloutGroup {
            video_id: video.id.clone(),
            features: x,
            responses,
            rewards,
            advantages,
        });
        twins.push(twin);
    }
    Ok(BatchRollout { groups, twins })
}

/// Roll out a single video with no ranking partner (its ranking reward is
/// zero), plus its perturbed twin when configured.
pub fn rollout_group<P: Policy, R: RngCore>(
    sample: &VideoSample,
    old: &P,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(RolloutGroup, Option<TwinGroup>)> {
    let mut out = rollout_batch(&[sample], old, &[None], cfg, rng)?;
    Ok((out.groups.remove(0), out.twins.remove(0)))
}

fn mean_over<F: Fn(&RewardBreakdown) -> f64>(groups: &[RolloutGroup], f: F) -> f64 {
    let (sum, n) = groups
        .iter()
        .flat_map(|g| &g.rewards)
        .fold((0.0, 0usize), |(s, n), r| (s + f(r), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn group_is_finite(g: &RolloutGroup) -> bool {
    g.features.iter().all(|v| v.is_finite())
        && g.advantages.iter().all(|v| v.is_finite())
        && g.rewards.iter().all(|r| r.total.is_finite())
        && g.responses
            .iter()
            .all(|r| r.raw_draw.is_finite() && r.log_prob_old.is_finite())
}

fn non_finite_dump(step: usize, what: &str, groups: &[RolloutGroup]) -> Error {
    let culprit = groups
        .iter()
        .find(|g| !group_is_finite(g))
        .or(groups.first());
    let dump = culprit
        .and_then(|g| serde_json::to_string(g).ok())
        .unwrap_or_default();
    Error::NonFinite(format!("{what} at step {step}; group dump: {dump}"))
}

/// Mean scores of `policy` on every video of `probe`, using the
/// deterministic policy mean.
pub(crate) fn predict_means<P: Policy>(
    policy: &P,
    videos: &[VideoSample],
    zero_coherence: bool,
) -> Result<Vec<f64>> {
    videos
        .iter()
        .map(|v| Ok(policy.forward(&policy_input(&v.frames, zero_coherence)?)?.0))
        .collect()
}

/// Train an arbitrary policy. The initial policy doubles as the frozen
/// reference for the KL penalty.
pub fn train_policy<P: Policy>(
    mut policy: P,
    dataset: &[VideoSample],
    probe: &[VideoSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<P>> {
    let hyper = &cfg.hyper;
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty);
    }
    let reference = policy.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pair_rng = ChaCha8Rng::seed_from_u64(cfg.pairing_seed);
    let probe_mos: Vec<f64> = probe.iter().map(|v| v.mos).collect();
    let mut diagnostics = Diagnostics::default();
    let mut log = Vec::new();
    let mut step = 0;

    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            step += 1;
            let old = policy.clone();
            let batch: Vec<&VideoSample> = chunk.iter().map(|&i| &dataset[i]).collect();
            let partners = random_derangement(batch.len(), &mut pair_rng);
            let rollout = rollout_batch(&batch, &old, &partners, cfg, &mut rng)?;
            let obj = grpo_objective(&rollout.groups, &policy, &old, &reference, hyper)?;
            diagnostics.ratio_clamps += obj.diagnostics.ratio_clamps;
            if !obj.value.is_finite() || obj.gradient.iter().any(|g| !g.is_finite()) {
                return Err(non_finite_dump(
                    step,
                    "non-finite objective",
                    &rollout.groups,
                ));
            }

            let mut params = policy.params();
            for (p, g) in params.iter_mut().zip(&obj.gradient) {
                *p += hyper.learning_rate * g;
            }
            policy.set_params(&params)?;
            policy.project();
            if policy.params().iter().any(|p| !p.is_finite()) {
                return Err(non_finite_dump(
                    step,
                    "non-finite parameters",
                    &rollout.groups,
                ));
            }

            let probe_srcc = if probe.len() >= 2 {
                srcc(
                    &predict_means(&policy, probe, cfg.zero_coherence)?,
                    &probe_mos,
                )
                .ok()
            } else {
                None
            };
            let groups = &rollout.groups;
            log.push(LogRow {
                step,
                epoch,
                mean_total_reward: mean_over(groups, |r| r.total),
                mean_fmt: mean_over(groups, |r| r.fmt),
                mean_reg: mean_over(groups, |r| r.reg),
                mean_rank: mean_over(groups, |r| r.rank),
                mean_temp: mean_over(groups, |r| r.temp),
                mean_kl: obj.mean_kl,
                objective: obj.value,
                probe_srcc,
            });
        }
    }
    Ok(TrainOutcome {
        policy,
        log,
        diagnostics,
    })
}

/// Seeded initialization of the Gaussian-linear policy for `dim` features.
pub fn init_policy(dim: usize, cfg: &TrainConfig) -> PolicyParams {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // separate stream so initialization never shifts the training draws
    rng.set_stream(1);
    PolicyParams::init(dim, &cfg.init, &mut rng)
}

/// Train the Gaussian-linear policy from its seeded initialization, probing
/// SRCC on the training set itself.
pub fn train(dataset: &[VideoSample], cfg: &TrainConfig) -> Result<TrainOutcome<PolicyParams>> {
    train_with_probe(dataset, dataset, cfg)
}

pub fn train_with_probe(
    dataset: &[VideoSample],
    probe: &[VideoSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<PolicyParams>> {
    let first = dataset.first().ok_or(Error::Empty)?;
    let dim = policy_input(&first.frames, cfg.zero_coherence)?.len();
    train_policy(init_policy(dim, cfg), dataset, probe, cfg)
}
