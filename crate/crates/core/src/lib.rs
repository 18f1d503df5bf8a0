//! Group relative policy optimization for video quality assessment.
//!
//! A stochastic score policy reads per-video features, emits tagged
//! responses (`<think>…</think><answer>score</answer>`) and is trained with
//! group-standardized advantages against four rewards: format, a bell-shaped
//! regression reward, a fidelity ranking reward between paired videos, and a
//! temporal consistency bonus earned against a temporally perturbed twin.
//!
//! The library ships a synthetic video generator with a known linear quality
//! function, so every stage can be checked against ground truth:
//!
//! ```
//! use vqa_grpo::data::{generate_synthetic, SynthSpec};
//! use vqa_grpo::metrics::srcc;
//!
//! let ds = generate_synthetic(&SynthSpec { n_videos: 32, ..SynthSpec::default() }).unwrap();
//! let (w, b) = ds.oracle.mos_weights();
//! let policy = vqa_grpo::grpo::PolicyParams::new(w, b, 0.0);
//! let pred = vqa_grpo::evaluate::predict(&policy, &ds.videos, false).unwrap();
//! let mos: Vec<f64> = ds.videos.iter().map(|v| v.mos).collect();
//! assert!(srcc(&pred, &mos).unwrap() > 0.9);
//! ```

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod grpo;
pub mod metrics;
pub mod perturb;
pub mod rewards;
pub mod types;

pub use error::{Error, Result};
pub use types::{FrameSequence, HyperParams, QualityResponse, RewardBreakdown, VideoSample};
