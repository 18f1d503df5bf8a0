//! Train the Gaussian score policy on a synthetic dataset and report
//! held-out correlation before and after.
//!
//!     cargo run --release --example toy_training

use vqa_grpo::data::{generate_synthetic, split, SynthSpec};
use vqa_grpo::evaluate::evaluate;
use vqa_grpo::grpo::{channel_name, init_policy, train_with_probe, Policy, TrainConfig};

fn main() -> vqa_grpo::Result<()> {
    let ds = generate_synthetic(&SynthSpec::default())?;
    let (train, test) = split(&ds.videos, 0.8, 7)?;
    let mut cfg = TrainConfig::default();
    cfg.hyper.learning_rate = 1e-2;

    let dim = ds.oracle.w_star.len();
    let before = evaluate(&init_policy(dim, &cfg), &test, false)?;
    let out = train_with_probe(&train, &test, &cfg)?;
    for row in &out.log {
        println!(
            "step {:>2} epoch {} reward {:.3} (fmt {:.2} reg {:.3} rank {:.3} temp {:.3}) kl {:.2e} probe srcc {:.3}",
            row.step,
            row.epoch,
            row.mean_total_reward,
            row.mean_fmt,
            row.mean_reg,
            row.mean_rank,
            row.mean_temp,
            row.mean_kl,
            row.probe_srcc.unwrap_or(f64::NAN)
        );
    }
    let after = evaluate(&out.policy, &test, false)?;
    println!(
        "held-out srcc {:.3} -> {:.3}, plcc {:.3} -> {:.3}",
        before.srcc, after.srcc, before.plcc, after.plcc
    );

    let (w, _) = ds.oracle.mos_weights();
    let learned = out.policy.params();
    println!("{:<20} {:>9} {:>9}", "channel", "learned", "oracle");
    for (i, wi) in w.iter().enumerate() {
        println!(
            "{:<20} {:>+9.4} {:>+9.4}",
            channel_name(i, dim),
            learned[i],
            wi
        );
    }
    Ok(())
}
