//! Apply each of the six temporal perturbations to a short clip, replay one
//! from its serialized spec, and show how each lowers temporal coherence.
//!
//!     cargo run --example temporal_perturbations

use vqa_grpo::data::{generate_synthetic, recompute_features, SynthSpec};
use vqa_grpo::perturb::{
    apply_mode, apply_random_perturbation, PerturbMode, PerturbOptions, PerturbSpec,
};
use vqa_grpo::FrameSequence;

fn coherence(seq: &FrameSequence) -> vqa_grpo::Result<f64> {
    Ok(*recompute_features(seq)?.last().unwrap())
}

fn main() -> vqa_grpo::Result<()> {
    let ids = FrameSequence::from_ids((0..12).collect())?;
    let opts = PerturbOptions::default();
    for mode in PerturbMode::ALL {
        let (out, spec) = apply_mode(&ids, mode, 42, &opts)?;
        println!("{:<15} {:?}", mode.cli_name(), out.frame_ids());
        println!("{:<15} {}", "", serde_json::to_string(&spec)?);
    }

    let (out, spec) = apply_random_perturbation(&ids, 7)?;
    let json = serde_json::to_string(&spec)?;
    let replayed = serde_json::from_str::<PerturbSpec>(&json)?.apply(&ids)?;
    println!(
        "\nseed 7 drew {}; replay from JSON identical: {}",
        spec.mode(),
        replayed == out
    );

    let clip = generate_synthetic(&SynthSpec {
        n_videos: 1,
        ..SynthSpec::default()
    })?
    .videos
    .remove(0)
    .frames;
    println!("\ncoherence of a smooth clip: {:.3}", coherence(&clip)?);
    for mode in PerturbMode::ALL {
        let (out, _) = apply_mode(&clip, mode, 1, &opts)?;
        println!("  after {:<15} {:.3}", mode.cli_name(), coherence(&out)?);
    }
    Ok(())
}
