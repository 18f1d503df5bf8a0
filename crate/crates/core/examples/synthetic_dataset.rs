//! Generate a synthetic dataset, inspect its features, and check that the
//! published oracle reproduces the labels.
//!
//!     cargo run --example synthetic_dataset

use vqa_grpo::data::{generate_synthetic, recompute_features, split, SynthSpec};
use vqa_grpo::grpo::channel_name;
use vqa_grpo::metrics::{plcc, srcc};

fn main() -> vqa_grpo::Result<()> {
    let spec = SynthSpec::default();
    let ds = generate_synthetic(&spec)?;
    println!(
        "{} videos x {} frames, {} features, noise std {}",
        ds.videos.len(),
        spec.n_frames,
        spec.feature_dim,
        spec.noise_std
    );

    let (w, b) = ds.oracle.mos_weights();
    println!("oracle on the 1-5 scale (bias {b:.3}):");
    for (i, wi) in w.iter().enumerate() {
        println!("  {:<20} {wi:+.4}", channel_name(i, w.len()));
    }

    let first = &ds.videos[0];
    let x = recompute_features(&first.frames)?;
    println!("{}: mos {:.3}, features {:.3?}", first.id, first.mos, x);

    let noiseless: Vec<f64> = ds
        .videos
        .iter()
        .map(|v| recompute_features(&v.frames).map(|x| ds.oracle.mos(&x)))
        .collect::<vqa_grpo::Result<_>>()?;
    let mos: Vec<f64> = ds.videos.iter().map(|v| v.mos).collect();
    println!(
        "oracle vs noisy labels: srcc {:.4}, plcc {:.4}",
        srcc(&noiseless, &mos)?,
        plcc(&noiseless, &mos)?
    );

    let (train, test) = split(&ds.videos, 0.8, 7)?;
    println!("split 0.8: {} train / {} test", train.len(), test.len());
    Ok(())
}
