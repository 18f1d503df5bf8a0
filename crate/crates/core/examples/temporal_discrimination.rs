//! Compare a policy trained with the temporal reward and coherence feature
//! against an ablated one: how often does each score the raw clip above a
//! temporally perturbed twin?
//!
//!     cargo run --release --example temporal_discrimination

use vqa_grpo::data::{generate_synthetic, split, SynthSpec};
use vqa_grpo::evaluate::{evaluate, temporal_discrimination_rate};
use vqa_grpo::grpo::{train_with_probe, TrainConfig};

fn main() -> vqa_grpo::Result<()> {
    let ds = generate_synthetic(&SynthSpec::default())?;
    let (train, test) = split(&ds.videos, 0.8, 7)?;
    let mut full = TrainConfig::default();
    full.hyper.learning_rate = 1e-2;
    let ablated = TrainConfig {
        perturb_every_step: false,
        zero_coherence: true,
        ..full
    };

    for (name, cfg) in [("full", &full), ("ablated", &ablated)] {
        let out = train_with_probe(&train, &test, cfg)?;
        let quality = evaluate(&out.policy, &test, cfg.zero_coherence)?;
        let rate = temporal_discrimination_rate(&out.policy, &test, 7, cfg.zero_coherence)?;
        println!(
            "{name:<8} srcc {:.3}  raw-beats-perturbed {:.3} over {} clips",
            quality.srcc,
            rate,
            test.len()
        );
    }
    Ok(())
}
