//! Synthetic videos with a known linear quality function, MOS ingestion,
//! frame sampling and dataset splits.
//!
//! Per-frame feature layout for a video-level dimension `d` (`d >= 4`):
//!
//! | per-frame channel | meaning                                   |
//! |-------------------|-------------------------------------------|
//! | `0`               | sharpness score (standardized, centred on 0) |
//! | `1`               | noise score (standardized, centred on 0)  |
//! | `2 .. d-2`        | content descriptors                       |
//! | `d-2`             | motion phase, advancing [`FRAME_STEP`] per frame |
//!
//! [`recompute_features`] averages the `d-1` per-frame channels and appends
//! the log temporal coherence as channel `d-1`.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{normalize_mos, FrameSequence, VideoSample, MOS_MAX, MOS_MIN};

/// Motion-phase advance between consecutive frames of an unperturbed video.
pub const FRAME_STEP: f64 = 1.0;

/// Raw quality scale of the synthetic linear form.
pub const RAW_SCALE: (f64, f64) = (0.0, 100.0);

const SHARPNESS_RANGE: (f64, f64) = (-5.0, 5.0);
const NOISE_RANGE: (f64, f64) = (-5.0, 5.0);
const CONTENT_RANGE: (f64, f64) = (-2.5, 2.5);
const PHASE_SPAN: f64 = 6.0;
const MAX_ROUGHNESS: f64 = 0.25;

/// Scale of the log coherence channel.
pub const COHERENCE_GAIN: f64 = 10.0;

const SHARPNESS_WEIGHT: f64 = 4.8;
const NOISE_WEIGHT: f64 = -4.2;
const CONTENT_WEIGHT: f64 = 0.24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_videos: usize,
    pub n_frames: usize,
    /// Video-level feature dimension (per-frame dimension is one less).
    pub feature_dim: usize,
    /// Std of the Gaussian observation noise added to the MOS.
    pub noise_std: f64,
    /// Raw-scale weight of the coherence channel in the quality form.
    pub temporal_coherence_weight: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_videos: 640,
            n_frames: 24,
            feature_dim: 8,
            noise_std: 0.15,
            temporal_coherence_weight: 7.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim < 4 {
            return Err(Error::param(
                "feature_dim",
                "need sharpness, noise, motion phase and coherence channels (>= 4)",
            ));
        }
        if self.n_frames < 6 {
            return Err(Error::param("n_frames", "must be >= 6"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::param("noise_std", "must be a finite value >= 0"));
        }
        if !self.temporal_coherence_weight.is_finite() {
            return Err(Error::param("temporal_coherence_weight", "must be finite"));
        }
        Ok(())
    }
}

/// The published quality function: `raw = bias + w_star . features` on the
/// `scale` range, then rescaled to 1–5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub w_star: Vec<f64>,
    pub bias: f64,
    pub scale: (f64, f64),
}

impl Oracle {
    fn for_spec(spec: &SynthSpec) -> Self {
        let d = spec.feature_dim;
        let mut w_star = vec![0.0; d];
        w_star[0] = SHARPNESS_WEIGHT;
        w_star[1] = NOISE_WEIGHT;
        for (j, w) in w_star[2..d - 2].iter_mut().enumerate() {
            *w = if j % 2 == 0 {
                CONTENT_WEIGHT
            } else {
                -CONTENT_WEIGHT
            };
        }
        // motion phase carries no quality information
        w_star[d - 2] = 0.0;
        w_star[d - 1] = spec.temporal_coherence_weight;

        // Centre the expected quality on the middle of the scale.
        let mid = 0.5 * (RAW_SCALE.0 + RAW_SCALE.1);
        Self {
            bias: mid - dot(&w_star, &expected_features(d)),
            w_star,
            scale: RAW_SCALE,
        }
    }

    /// Quality on the raw scale, unclamped.
    pub fn raw_quality(&self, features: &[f64]) -> f64 {
        self.bias + dot(&self.w_star, features)
    }

    /// Weights of the same form expressed directly on the 1–5 scale.
    pub fn mos_weights(&self) -> (Vec<f64>, f64) {
        let k = (MOS_MAX - MOS_MIN) / (self.scale.1 - self.scale.0);
        let w = self.w_star.iter().map(|w| w * k).collect();
        (w, MOS_MIN + k * (self.bias - self.scale.0))
    }

    /// Noise-free MOS, clamped to the 1–5 scale.
    pub fn mos(&self, features: &[f64]) -> f64 {
        let raw = self.raw_quality(features).clamp(self.scale.0, self.scale.1);
        normalize_mos(raw, self.scale.0, self.scale.1).expect("raw clamped into scale")
    }
}

/// Approximate mean of [`recompute_features`] over generated videos. Every
/// per-frame channel is centred on zero; the coherence channel is averaged
/// over the roughness distribution using the root-mean-square residual
/// `c * roughness`.
fn expected_features(d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    let cr = MAX_ROUGHNESS * (2.0 * (d - 1) as f64 / 3.0).sqrt();
    // mean of ln(1 + c u) for u ~ U(0, MAX_ROUGHNESS)
    let mean_log = ((1.0 + cr) * (1.0 + cr).ln() - cr) / cr;
    mean[d - 1] = -COHERENCE_GAIN * mean_log;
    mean
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub videos: Vec<VideoSample>,
    pub oracle: Oracle,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Generate videos whose MOS is the oracle's linear form of their features
/// plus Gaussian observation noise.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let oracle = Oracle::for_spec(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise =
        Normal::new(0.0, spec.noise_std).map_err(|e| Error::param("noise_std", e.to_string()))?;
    let frame_dim = spec.feature_dim - 1;
    let phase = frame_dim - 1;
    let t_len = spec.n_frames;

    let mut videos = Vec::with_capacity(spec.n_videos);
    for i in 0..spec.n_videos {
        let mut level = vec![0.0; frame_dim];
        level[0] = rng.random_range(SHARPNESS_RANGE.0..=SHARPNESS_RANGE.1);
        level[1] = rng.random_range(NOISE_RANGE.0..=NOISE_RANGE.1);
        for l in &mut level[2..phase] {
            *l = rng.random_range(CONTENT_RANGE.0..=CONTENT_RANGE.1);
        }
        let half_path = 0.5 * (t_len - 1) as f64 * FRAME_STEP;
        level[phase] = rng.random_range(-PHASE_SPAN..=PHASE_SPAN) - half_path;
        let roughness = rng.random_range(0.0..=MAX_ROUGHNESS);

        let features: Vec<Vec<f64>> = (0..t_len)
            .map(|t| {
                let mut f: Vec<f64> = level
                    .iter()
                    .map(|&l| l + roughness * rng.random_range(-1.0..=1.0))
                    .collect();
                f[phase] += t as f64 * FRAME_STEP;
                f
            })
            .collect();
        let frames = FrameSequence::new((0..t_len).collect(), features)?;
        let x = recompute_features(&frames)?;
        let mos = (oracle.mos(&x) + noise.sample(&mut rng)).clamp(MOS_MIN, MOS_MAX);
        videos.push(VideoSample {
            id: format!("synth-{i:05}"),
            frames,
            mos,
        });
    }
    Ok(SynthDataset { videos, oracle })
}

/// Video-level features: the per-frame channel means followed by the log
/// temporal coherence `COHERENCE_GAIN * ln(1 / (1 + r))`, where
/// `r = mean_t |f[t+1] - f[t] - u|` and `u` advances the motion phase by
/// [`FRAME_STEP`]. Perfectly smooth playback scores 0.
///
/// Natural playback moves forward one step per frame, so reordering,
/// repeating or skipping frames leaves residual motion and lowers coherence.
pub fn recompute_features(seq: &FrameSequence) -> Result<Vec<f64>> {
    if seq.len() < 2 {
        return Err(Error::TooShort {
            len: seq.len(),
            min: 2,
        });
    }
    let dim = seq.dim();
    if dim == 0 {
        return Err(Error::InvalidSequence("frames carry no features".into()));
    }
    let frames = seq.features();
    let n = frames.len() as f64;
    let mut out: Vec<f64> = (0..dim)
        .map(|c| frames.iter().map(|f| f[c]).sum::<f64>() / n)
        .collect();
    let phase = dim - 1;
    let residual: f64 = frames
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .enumerate()
                .map(|(c, (a, b))| {
                    let step = if c == phase { FRAME_STEP } else { 0.0 };
                    (b - a - step).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / (n - 1.0);
    out.push(coherence_channel(residual));
    Ok(out)
}

fn coherence_channel(residual: f64) -> f64 {
    COHERENCE_GAIN * (1.0 / (1.0 + residual)).ln()
}

/// Set the coherence channel (the last one) to zero.
pub fn zero_coherence(features: &mut [f64]) {
    if let Some(last) = features.last_mut() {
        *last = 0.0;
    }
}

/// Policy input for a clip: [`recompute_features`], optionally with the
/// coherence channel zeroed.
pub fn policy_input(seq: &FrameSequence, zero_coh: bool) -> Result<Vec<f64>> {
    let mut x = recompute_features(seq)?;
    if zero_coh {
        zero_coherence(&mut x);
    }
    Ok(x)
}

/// `count` indices spread evenly over `total` frames: `floor(i * total / count)`.
pub fn uniform_sample_frames(total: usize, count: usize) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::param("count", "must be >= 1"));
    }
    if count > total {
        return Err(Error::InsufficientFrames {
            have: total,
            min: count,
        });
    }
    Ok((0..count).map(|i| i * total / count).collect())
}

/// One row of a MOS label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosLabel {
    pub id: String,
    pub mos: f64,
}

/// Read `id,mos[,scale_lo,scale_hi]` rows. Scores with scale columns are
/// rescaled to 1–5; scores without must already lie on it.
pub fn load_mos_csv(path: impl AsRef<Path>) -> Result<Vec<MosLabel>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_mos_csv(file)
}

pub fn parse_mos_csv<R: std::io::Read>(reader: R) -> Result<Vec<MosLabel>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        reason: e.to_string(),
    })?;
    let names: Vec<&str> = header.iter().collect();
    let valid = matches!(
        names.as_slice(),
        ["id", "mos"] | ["id", "mos", "scale_lo", "scale_hi"]
    );
    if !valid {
        return Err(Error::Parse {
            line: 1,
            reason: format!(
                "expected header id,mos[,scale_lo,scale_hi], got {}",
                names.join(",")
            ),
        });
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |reason: String| Error::Parse { line, reason };
        let num = |i: usize| -> Result<f64> {
            let field = &record[i];
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("`{field}` is not a number")))
        };
        let mos = match record.len() {
            2 => {
                let mos = num(1)?;
                if !(MOS_MIN..=MOS_MAX).contains(&mos) {
                    return Err(bad(format!("mos {mos} outside [1, 5] and no scale given")));
                }
                mos
            }
            4 => normalize_mos(num(1)?, num(2)?, num(3)?).map_err(|e| bad(e.to_string()))?,
            n => return Err(bad(format!("expected 2 or 4 fields, got {n}"))),
        };
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(bad("empty id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        out.push(MosLabel { id, mos });
    }
    Ok(out)
}

/// Seeded shuffle, then the first `round(train_frac * n)` items go to train.
pub fn split<T: Clone>(dataset: &[T], train_frac: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::param("train_frac", "must lie in (0, 1)"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_frac * dataset.len() as f64).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| dataset[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// On-disk dataset record; `features` is the row-major frame-by-channel
/// matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub frame_ids: Vec<usize>,
    pub features: Vec<f64>,
    pub mos: f64,
}

impl From<&VideoSample> for DatasetRecord {
    fn from(v: &VideoSample) -> Self {
        Self {
            id: v.id.clone(),
            frame_ids: v.frames.frame_ids().to_vec(),
            features: v.frames.features().iter().flatten().copied().collect(),
            mos: v.mos,
        }
    }
}

impl TryFrom<DatasetRecord> for VideoSample {
    type Error = Error;

    fn try_from(r: DatasetRecord) -> Result<Self> {
        let t = r.frame_ids.len();
        if t == 0 || !r.features.len().is_multiple_of(t) {
            return Err(Error::InvalidSequence(format!(
                "video `{}`: {} feature values do not split over {t} frames",
                r.id,
                r.features.len()
            )));
        }
        let dim = r.features.len() / t;
        let features = if dim == 0 {
            vec![Vec::new(); t]
        } else {
            r.features.chunks(dim).map(<[f64]>::to_vec).collect()
        };
        if !(MOS_MIN..=MOS_MAX).contains(&r.mos) {
            return Err(Error::OutOfDomain {
                value: r.mos,
                lo: MOS_MIN,
                hi: MOS_MAX,
            });
        }
        Ok(VideoSample {
            id: r.id,
            frames: FrameSequence::new(r.frame_ids, features)?,
            mos: r.mos,
        })
    }
}

pub fn dataset_to_json(videos: &[VideoSample]) -> Result<String> {
    let records: Vec<DatasetRecord> = videos.iter().map(DatasetRecord::from).collect();
    Ok(serde_json::to_string(&records)?)
}

pub fn dataset_from_json(text: &str) -> Result<Vec<VideoSample>> {
    let records: Vec<DatasetRecord> = serde_json::from_str(text)?;
    let mut seen = HashSet::new();
    records
        .into_iter()
        .map(|r| {
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateId(r.id));
            }
            VideoSample::try_from(r)
        })
        .collect()
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<VideoSample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dataset_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            n_videos: 40,
            n_frames: 12,
            feature_dim: 6,
            noise_std: 0.0,
            temporal_coherence_weight: 7.5,
            seed: 5,
        }
    }

    #[test]
    fn uniform_sampling_examples() {
        assert_eq!(
            uniform_sample_frames(100, 6).unwrap(),
            vec![0, 16, 33, 50, 66, 83]
        );
        assert_eq!(uniform_sample_frames(6, 6).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(
            uniform_sample_frames(12, 12).unwrap(),
            (0..12).collect::<Vec<_>>()
        );
        assert!(matches!(
            uniform_sample_frames(5, 6),
            Err(Error::InsufficientFrames { have: 5, min: 6 })
        ));
        for (t, n) in [(7, 3), (100, 12), (13, 13)] {
            let idx = uniform_sample_frames(t, n).unwrap();
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = small_spec();
        s.feature_dim = 3;
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.n_frames = 5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn noise_free_mos_is_exact_oracle() {
        let ds = generate_synthetic(&small_spec()).unwrap();
        let (w, b) = ds.oracle.mos_weights();
        for v in &ds.videos {
            let x = recompute_features(&v.frames).unwrap();
            assert_eq!(v.mos, ds.oracle.mos(&x));
            let raw = ds.oracle.raw_quality(&x);
            if raw > 0.0 && raw < 100.0 {
                assert!((v.mos - (b + dot(&w, &x))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_form_is_centred_and_rarely_clamped() {
        let ds = generate_synthetic(&SynthSpec::default()).unwrap();
        let n = ds.videos.len() as f64;
        let mean = ds.videos.iter().map(|v| v.mos).sum::<f64>() / n;
        assert!((mean - 3.0).abs() < 0.15, "mean mos {mean}");
        let clamped = ds
            .videos
            .iter()
            .filter(|v| v.mos == MOS_MIN || v.mos == MOS_MAX)
            .count();
        assert!((clamped as f64) < 0.05 * n, "{clamped} clamped");
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = generate_synthetic(&small_spec()).unwrap();
        let b = generate_synthetic(&small_spec()).unwrap();
        assert_eq!(a, b);
        let mut other = small_spec();
        other.seed = 6;
        assert_ne!(generate_synthetic(&other).unwrap().videos, a.videos);
    }

    #[test]
    fn reverse_changes_only_coherence() {
        let ds = generate_synthetic(&small_spec()).unwrap();
        let seq = &ds.videos[0].frames;
        let a = recompute_features(seq).unwrap();
        let b = recompute_features(&perturb::reverse(seq)).unwrap();
        let d = a.len();
        for c in 0..d - 1 {
            assert!((a[c] - b[c]).abs() < 1e-12);
        }
        assert!(b[d - 1] < a[d - 1]);
    }

    #[test]
    fn identity_perturbation_keeps_features() {
        let ds = generate_synthetic(&small_spec()).unwrap();
        let seq = &ds.videos[1].frames;
        let same = perturb::jitter(seq, &vec![0; seq.len()]).unwrap();
        assert_eq!(
            recompute_features(seq).unwrap(),
            recompute_features(&same).unwrap()
        );
    }

    #[test]
    fn freeze_frame_has_zero_adjacent_motion_but_no_forward_progress() {
        let ds = generate_synthetic(&small_spec()).unwrap();
        let seq = &ds.videos[2].frames;
        let t = seq.len();
        let drop: Vec<usize> = (1..t).collect();
        let frozen = perturb::duplicate(seq, 0, t - 1, 0, &drop).unwrap();
        let x = recompute_features(&frozen).unwrap();
        // every adjacent residual is exactly the missing forward step
        let expected = -COHERENCE_GAIN * (1.0 + FRAME_STEP).ln();
        assert!((x[x.len() - 1] - expected).abs() < 1e-12);
        assert!(x[x.len() - 1] < recompute_features(seq).unwrap()[x.len() - 1]);
    }

    #[test]
    fn recompute_requires_two_frames() {
        let seq = FrameSequence::new(vec![0], vec![vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            recompute_features(&seq),
            Err(Error::TooShort { .. })
        ));
        let ids_only = FrameSequence::from_ids(vec![0, 1]).unwrap();
        assert!(recompute_features(&ids_only).is_err());
    }

    #[test]
    fn mos_csv_examples() {
        let rows = parse_mos_csv("id,mos\na,3.0\n".as_bytes()).unwrap();
        assert_eq!(
            rows,
            vec![MosLabel {
                id: "a".into(),
                mos: 3.0
            }]
        );
        let rows = parse_mos_csv("id,mos,scale_lo,scale_hi\nb,75,0,100\n".as_bytes()).unwrap();
        assert_eq!(rows[0].mos, 4.0);
        assert!(matches!(
            parse_mos_csv("id,mos\na,3\na,4\n".as_bytes()),
            Err(Error::DuplicateId(id)) if id == "a"
        ));
    }

    #[test]
    fn mos_csv_reports_line_numbers() {
        let err = parse_mos_csv("id,mos\na,3\nb,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_mos_csv("id,mos\na,7\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_mos_csv("name,score\na,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_mos_csv("id,mos,scale_lo,scale_hi\na,3,5,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn split_examples() {
        let items: Vec<u32> = (0..10).collect();
        let (train, test) = split(&items, 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all: Vec<u32> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, items);
        assert_eq!(split(&items, 0.8, 1).unwrap(), (train, test));
        assert!(split(&items, 1.0, 1).is_err());
        assert!(split(&items, 0.0, 1).is_err());
    }

    #[test]
    fn dataset_json_round_trip() {
        let ds = generate_synthetic(&small_spec()).unwrap();
        let text = dataset_to_json(&ds.videos).unwrap();
        assert_eq!(dataset_from_json(&text).unwrap(), ds.videos);
    }

    #[test]
    fn dataset_json_rejects_ragged_features() {
        let text = r#"[{"id":"a","frame_ids":[0,1],"features":[1.0,2.0,3.0],"mos":3.0}]"#;
        assert!(dataset_from_json(text).is_err());
        let text = r#"[{"id":"a","frame_ids":[0,1],"features":[1.0,2.0],"mos":7.0}]"#;
        assert!(dataset_from_json(text).is_err());
    }
}
