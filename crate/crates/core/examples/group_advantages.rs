//! Standardize group rewards into advantages, evaluate the clipped
//! KL-regularized objective, and check its gradient by central differences.
//!
//!     cargo run --example group_advantages

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vqa_grpo::grpo::{
    group_advantages, grpo_objective, sample_response, Policy, PolicyParams, RolloutGroup,
};
use vqa_grpo::{HyperParams, RewardBreakdown};

fn main() -> vqa_grpo::Result<()> {
    let rewards = [1.9, 2.6, 0.4, 2.6];
    println!("rewards    {rewards:?}");
    println!("advantages {:.4?}", group_advantages(&rewards, 1e-8)?);
    println!("constant   {:?}", group_advantages(&[1.0; 4], 1e-8)?);

    let old = PolicyParams::new(vec![0.4, -0.3, 0.1], 3.0, -0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = vec![1.0, -0.5, 2.0];
    let responses: Vec<_> = (0..4)
        .map(|_| sample_response(&old, &x, &mut rng))
        .collect::<vqa_grpo::Result<_>>()?;
    let totals: Vec<f64> = responses
        .iter()
        .map(|r| 4.0 - (r.action() - 3.5).abs())
        .collect();
    let group = RolloutGroup {
        video_id: "demo".into(),
        features: x,
        rewards: totals
            .iter()
            .map(|&t| RewardBreakdown::new(0.0, t, 0.0, 0.0))
            .collect(),
        advantages: group_advantages(&totals, 1e-8)?,
        responses,
    };
    for r in &group.responses {
        println!("sampled {}", r.text);
    }

    let hyper = HyperParams::default();
    let mut current = old.clone();
    current.set_params(&[0.45, -0.3, 0.12, 3.02, -0.69])?;
    let groups = [group];
    let obj = grpo_objective(&groups, &current, &old, &old, &hyper)?;
    println!(
        "objective {:.6}, mean ratio {:.4}",
        obj.value, obj.mean_ratio
    );

    let theta = current.params();
    let h = 1e-6;
    for (i, g) in obj.gradient.iter().enumerate() {
        let at = |d: f64| -> vqa_grpo::Result<f64> {
            let mut p = current.clone();
            let mut t = theta.clone();
            t[i] += d;
            p.set_params(&t)?;
            Ok(grpo_objective(&groups, &p, &old, &old, &hyper)?.value)
        };
        let fd = (at(h)? - at(-h)?) / (2.0 * h);
        println!("param {i}: analytic {g:+.8}  finite difference {fd:+.8}");
    }
    Ok(())
}
