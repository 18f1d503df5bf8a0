//! Group relative policy optimization over a pluggable score policy.
//!
//! For each video the old-policy snapshot samples `K` responses. Their
//! rewards are standardized within the group to give advantages, and the
//! policy ascends the clipped surrogate minus a KL penalty to a frozen
//! reference:
//!
//! ```text
//! J = mean_{i,k} [ min(rho * a, clip(rho, 1-eps, 1+eps) * a) - beta * KL(pi || pi_ref) ]
//! ```

pub mod objective;
pub mod policy;
pub mod train;

pub use objective::{
    clipped_term, group_advantages, grpo_objective, importance_ratio, kl_to_reference, Diagnostics,
    ObjectiveValue, RolloutGroup, MAX_RATIO,
};
pub use policy::{
    channel_name, gaussian_kl, policy_forward, sample_response, Policy, PolicyInit, PolicyParams,
    STD_BOUNDS,
};
pub use train::{
    init_policy, random_derangement, rollout_batch, rollout_group, train, train_policy,
    train_with_probe, BatchRollout, LogRow, TrainConfig, TrainOutcome, TwinGroup,
};
