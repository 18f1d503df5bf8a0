use proptest::prelude::*;

use vqa_grpo::data::{generate_synthetic, recompute_features, SynthSpec};
use vqa_grpo::perturb::{
    apply_mode, apply_random_perturbation, PerturbMode, PerturbOptions, PerturbSpec,
};
use vqa_grpo::FrameSequence;

fn mode() -> impl Strategy<Value = PerturbMode> {
    prop::sample::select(PerturbMode::ALL.to_vec())
}

fn tagged(len: usize) -> FrameSequence {
    FrameSequence::new(
        (0..len).collect(),
        (0..len).map(|i| vec![i as f64, -(i as f64)]).collect(),
    )
    .unwrap()
}

fn sorted(ids: &[usize]) -> Vec<usize> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v
}

/// Output plays a contiguous stretch of the input forwards, i.e. it is the
/// identity or only trims the ends.
fn is_forward_run(ids: &[usize]) -> bool {
    ids.windows(2).all(|w| w[1] == w[0] + 1)
}

fn synthetic_clip(seed: u64, n_frames: usize) -> FrameSequence {
    generate_synthetic(&SynthSpec {
        n_videos: 1,
        n_frames,
        seed,
        ..SynthSpec::default()
    })
    .unwrap()
    .videos
    .remove(0)
    .frames
}

proptest! {
    #[test]
    fn output_is_built_from_input_frames(len in 6usize..48, m in mode(), seed: u64) {
        let seq = tagged(len);
        let (out, spec) = apply_mode(&seq, m, seed, &PerturbOptions::default()).unwrap();
        prop_assert_eq!(spec.mode(), m);
        for (id, f) in out.frame_ids().iter().zip(out.features()) {
            prop_assert!(*id < len);
            prop_assert_eq!(f, &vec![*id as f64, -(*id as f64)]);
        }
        let expected_len = match spec {
            PerturbSpec::RandomDrop { ref drop } => len - drop.len(),
            _ => len,
        };
        prop_assert_eq!(out.len(), expected_len);
    }

    #[test]
    fn permuting_modes_keep_the_multiset(len in 6usize..48, seed: u64) {
        let seq = tagged(len);
        for m in [PerturbMode::GlobalShuffle, PerturbMode::LocalShuffle, PerturbMode::Reverse] {
            let (out, _) = apply_mode(&seq, m, seed, &PerturbOptions::default()).unwrap();
            prop_assert_eq!(sorted(out.frame_ids()), (0..len).collect::<Vec<_>>());
        }
    }

    #[test]
    fn spec_replays_exactly(len in 2usize..48, seed: u64) {
        let seq = tagged(len);
        let (out, spec) = apply_random_perturbation(&seq, seed).unwrap();
        prop_assert_eq!(spec.apply(&seq).unwrap(), out.clone());
        let json = serde_json::to_string(&spec).unwrap();
        let back: PerturbSpec = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.apply(&seq).unwrap(), out);
    }

    #[test]
    fn random_drop_keeps_order(len in 6usize..48, seed: u64, count in 1usize..5) {
        let opts = PerturbOptions { count: Some(count), ..PerturbOptions::default() };
        let (out, _) = apply_mode(&tagged(len), PerturbMode::RandomDrop, seed, &opts).unwrap();
        prop_assert_eq!(out.len(), len - count);
        prop_assert!(out.frame_ids().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn disrupted_playback_lowers_coherence(clip_seed in 0u64..10_000, seed: u64, m in mode()) {
        let seq = synthetic_clip(clip_seed, 16);
        let (out, _) = apply_mode(&seq, m, seed, &PerturbOptions::default()).unwrap();
        prop_assume!(!is_forward_run(out.frame_ids()));
        let before = recompute_features(&seq).unwrap();
        let after = recompute_features(&out).unwrap();
        prop_assert!(
            after.last() < before.last(),
            "{m}: coherence {:?} -> {:?} for {:?}",
            before.last(),
            after.last(),
            out.frame_ids()
        );
    }
}

#[test]
fn trimming_the_ends_keeps_coherence_close() {
    // Dropping only leading or trailing frames leaves forward playback
    // intact, so coherence moves by sampling noise alone.
    let seq = synthetic_clip(3, 16);
    let trimmed = vqa_grpo::perturb::random_drop(&seq, &[0, 1, 14, 15]).unwrap();
    let a = recompute_features(&seq).unwrap();
    let b = recompute_features(&trimmed).unwrap();
    assert!((a[a.len() - 1] - b[b.len() - 1]).abs() < 1.0);
}
