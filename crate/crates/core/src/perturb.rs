//! Temporal degradation operators.
//!
//! Each operator is a pure function of the input sequence and an explicit,
//! fully materialized [`PerturbSpec`]. The seeded entry point
//! [`apply_random_perturbation`] draws the spec and returns it alongside the
//! output so any perturbation can be replayed exactly.
//!
//! All indices are 0-based positions in the input sequence. Operators only
//! ever select input positions, so a frame id and its feature vector always
//! travel together.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::FrameSequence;

/// Default local-shuffle window.
pub const DEFAULT_WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerturbMode {
    GlobalShuffle,
    LocalShuffle,
    Reverse,
    Jitter,
    Duplicate,
    RandomDrop,
}

impl PerturbMode {
    pub const ALL: [PerturbMode; 6] = [
        PerturbMode::GlobalShuffle,
        PerturbMode::LocalShuffle,
        PerturbMode::Reverse,
        PerturbMode::Jitter,
        PerturbMode::Duplicate,
        PerturbMode::RandomDrop,
    ];

    /// Kebab-case name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            PerturbMode::GlobalShuffle => "global-shuffle",
            PerturbMode::LocalShuffle => "local-shuffle",
            PerturbMode::Reverse => "reverse",
            PerturbMode::Jitter => "jitter",
            PerturbMode::Duplicate => "duplicate",
            PerturbMode::RandomDrop => "random-drop",
        }
    }

    pub fn from_cli_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.cli_name() == name)
    }
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

/// A fully materialized perturbation: the mode plus every random choice it
/// made.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum PerturbSpec {
    GlobalShuffle {
        perm: Vec<usize>,
    },
    LocalShuffle {
        window: usize,
        perms: Vec<Vec<usize>>,
    },
    Reverse,
    Jitter {
        offsets: Vec<i64>,
    },
    Duplicate {
        frame: usize,
        copies: usize,
        position: usize,
        drop: Vec<usize>,
    },
    RandomDrop {
        drop: Vec<usize>,
    },
}

impl PerturbSpec {
    pub fn mode(&self) -> PerturbMode {
        match self {
            PerturbSpec::GlobalShuffle { .. } => PerturbMode::GlobalShuffle,
            PerturbSpec::LocalShuffle { .. } => PerturbMode::LocalShuffle,
            PerturbSpec::Reverse => PerturbMode::Reverse,
            PerturbSpec::Jitter { .. } => PerturbMode::Jitter,
            PerturbSpec::Duplicate { .. } => PerturbMode::Duplicate,
            PerturbSpec::RandomDrop { .. } => PerturbMode::RandomDrop,
        }
    }

    /// Replay this spec through its operator.
    pub fn apply(&self, seq: &FrameSequence) -> Result<FrameSequence> {
        match self {
            PerturbSpec::GlobalShuffle { perm } => global_shuffle(seq, perm),
            PerturbSpec::LocalShuffle { window, perms } => local_shuffle(seq, *window, perms),
            PerturbSpec::Reverse => Ok(reverse(seq)),
            PerturbSpec::Jitter { offsets } => jitter(seq, offsets),
            PerturbSpec::Duplicate {
                frame,
                copies,
                position,
                drop,
            } => duplicate(seq, *frame, *copies, *position, drop),
            PerturbSpec::RandomDrop { drop } => random_drop(seq, drop),
        }
    }
}

fn check_permutation(perm: &[usize], len: usize) -> Result<()> {
    if perm.len() != len {
        return Err(Error::InvalidPermutation(format!(
            "length {} does not match {len}",
            perm.len()
        )));
    }
    let mut seen = vec![false; len];
    for &p in perm {
        if p >= len || seen[p] {
            return Err(Error::InvalidPermutation(format!(
                "{perm:?} is not a bijection on 0..{len}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

fn check_distinct_in_range(idx: &[usize], len: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(idx.len());
    for &i in idx {
        if i >= len {
            return Err(Error::InvalidDrop(format!(
                "index {i} out of range 0..{len}"
            )));
        }
        if !seen.insert(i) {
            return Err(Error::InvalidDrop(format!("index {i} repeated")));
        }
    }
    Ok(())
}

/// Output frame `i` is input frame `perm[i]`.
pub fn global_shuffle(seq: &FrameSequence, perm: &[usize]) -> Result<FrameSequence> {
    check_permutation(perm, seq.len())?;
    Ok(seq.select(perm))
}

/// Permute each full window of `window` frames internally; the trailing
/// `len % window` frames stay in place.
pub fn local_shuffle(
    seq: &FrameSequence,
    window: usize,
    perms: &[Vec<usize>],
) -> Result<FrameSequence> {
    if window < 2 {
        return Err(Error::param("window", "must be >= 2"));
    }
    let full = seq.len() / window;
    if perms.len() != full {
        return Err(Error::Arity {
            expected: full,
            got: perms.len(),
        });
    }
    let mut positions = Vec::with_capacity(seq.len());
    for (w, perm) in perms.iter().enumerate() {
        check_permutation(perm, window)?;
        positions.extend(perm.iter().map(|&p| w * window + p));
    }
    positions.extend(full * window..seq.len());
    Ok(seq.select(&positions))
}

pub fn reverse(seq: &FrameSequence) -> FrameSequence {
    let positions: Vec<usize> = (0..seq.len()).rev().collect();
    seq.select(&positions)
}

/// Replace frame `t` with frame `clamp(t + offsets[t])`, offsets in {-1, 0, 1}.
pub fn jitter(seq: &FrameSequence, offsets: &[i64]) -> Result<FrameSequence> {
    if offsets.len() != seq.len() {
        return Err(Error::LengthMismatch(offsets.len(), seq.len()));
    }
    let last = seq.len() as i64 - 1;
    let mut positions = Vec::with_capacity(seq.len());
    for (t, &off) in offsets.iter().enumerate() {
        if !(-1..=1).contains(&off) {
            return Err(Error::InvalidOffset {
                position: t,
                offset: off,
            });
        }
        positions.push((t as i64 + off).clamp(0, last) as usize);
    }
    Ok(seq.select(&positions))
}

/// Insert `copies` copies of frame `frame` before position `position`
/// (`0..=len`), then remove the original frames listed in `drop`.
///
/// `drop` must hold exactly `copies` distinct original positions, none equal
/// to `frame`, so the output keeps the input length.
pub fn duplicate(
    seq: &FrameSequence,
    frame: usize,
    copies: usize,
    position: usize,
    drop: &[usize],
) -> Result<FrameSequence> {
    let len = seq.len();
    if frame >= len {
        return Err(Error::param(
            "frame",
            format!("{frame} out of range 0..{len}"),
        ));
    }
    if copies == 0 {
        return Err(Error::param("copies", "must be >= 1"));
    }
    if position > len {
        return Err(Error::param(
            "position",
            format!("{position} out of range 0..={len}"),
        ));
    }
    if drop.len() != copies {
        return Err(Error::InvalidDrop(format!(
            "need {copies} dropped frames, got {}",
            drop.len()
        )));
    }
    check_distinct_in_range(drop, len)?;
    if drop.contains(&frame) {
        return Err(Error::InvalidDrop(format!(
            "cannot drop the duplicated frame {frame}"
        )));
    }
    let dropped: HashSet<usize> = drop.iter().copied().collect();
    let mut positions = Vec::with_capacity(len);
    for p in 0..=len {
        if p == position {
            positions.extend(std::iter::repeat_n(frame, copies));
        }
        if p < len && !dropped.contains(&p) {
            positions.push(p);
        }
    }
    Ok(seq.select(&positions))
}

/// Remove the listed positions, keeping the remaining order.
pub fn random_drop(seq: &FrameSequence, drop: &[usize]) -> Result<FrameSequence> {
    if drop.len() >= seq.len() {
        return Err(Error::WouldEmpty {
            n: drop.len(),
            len: seq.len(),
        });
    }
    check_distinct_in_range(drop, seq.len())?;
    let dropped: HashSet<usize> = drop.iter().copied().collect();
    let positions: Vec<usize> = (0..seq.len()).filter(|p| !dropped.contains(p)).collect();
    Ok(seq.select(&positions))
}

/// Knobs for drawing random specs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbOptions {
    /// Local-shuffle window.
    pub window: usize,
    /// Frames duplicated / dropped. `None` means `ceil(0.2 * len)`.
    pub count: Option<usize>,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            count: None,
        }
    }
}

impl PerturbOptions {
    fn count_for(&self, len: usize) -> usize {
        self.count
            .unwrap_or_else(|| (0.2 * len as f64).ceil() as usize)
            .max(1)
    }

    /// Whether `mode` can produce a valid spec for a sequence of `len` frames.
    pub fn applicable(&self, mode: PerturbMode, len: usize) -> bool {
        match mode {
            PerturbMode::GlobalShuffle | PerturbMode::Reverse | PerturbMode::Jitter => len >= 2,
            PerturbMode::LocalShuffle => self.window >= 2 && len >= self.window,
            PerturbMode::Duplicate | PerturbMode::RandomDrop => {
                len >= 2 && self.count_for(len) < len
            }
        }
    }

    pub fn applicable_modes(&self, len: usize) -> Vec<PerturbMode> {
        PerturbMode::ALL
            .into_iter()
            .filter(|&m| self.applicable(m, len))
            .collect()
    }
}

/// Draw the randomness for `mode` on a sequence of `len` frames.
pub fn random_spec<R: Rng + ?Sized>(
    mode: PerturbMode,
    len: usize,
    opts: &PerturbOptions,
    rng: &mut R,
) -> Result<PerturbSpec> {
    if !opts.applicable(mode, len) {
        let min = match mode {
            PerturbMode::LocalShuffle => opts.window.max(2),
            PerturbMode::Duplicate | PerturbMode::RandomDrop => opts.count_for(len) + 1,
            _ => 2,
        };
        return Err(Error::TooShort { len, min });
    }
    let spec = match mode {
        PerturbMode::GlobalShuffle => {
            let mut perm: Vec<usize> = (0..len).collect();
            perm.shuffle(rng);
            PerturbSpec::GlobalShuffle { perm }
        }
        PerturbMode::LocalShuffle => {
            let perms = (0..len / opts.window)
                .map(|_| {
                    let mut p: Vec<usize> = (0..opts.window).collect();
                    p.shuffle(rng);
                    p
                })
                .collect();
            PerturbSpec::LocalShuffle {
                window: opts.window,
                perms,
            }
        }
        PerturbMode::Reverse => PerturbSpec::Reverse,
        PerturbMode::Jitter => PerturbSpec::Jitter {
            offsets: (0..len).map(|_| rng.random_range(-1..=1)).collect(),
        },
        PerturbMode::Duplicate => {
            let copies = opts.count_for(len);
            let frame = rng.random_range(0..len);
            let position = rng.random_range(0..=len);
            let candidates: Vec<usize> = (0..len).filter(|&p| p != frame).collect();
            let mut drop: Vec<usize> = rand::seq::index::sample(rng, candidates.len(), copies)
                .into_iter()
                .map(|i| candidates[i])
                .collect();
            drop.sort_unstable();
            PerturbSpec::Duplicate {
                frame,
                copies,
                position,
                drop,
            }
        }
        PerturbMode::RandomDrop => {
            let mut drop = rand::seq::index::sample(rng, len, opts.count_for(len)).into_vec();
            drop.sort_unstable();
            PerturbSpec::RandomDrop { drop }
        }
    };
    Ok(spec)
}

/// Perturb with a specific mode, drawing its randomness from `seed`.
pub fn apply_mode(
    seq: &FrameSequence,
    mode: PerturbMode,
    seed: u64,
    opts: &PerturbOptions,
) -> Result<(FrameSequence, PerturbSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_spec(mode, seq.len(), opts, &mut rng)?;
    let out = spec.apply(seq)?;
    Ok((out, spec))
}

/// Pick one applicable mode uniformly, draw its randomness, and apply it.
pub fn apply_random_perturbation(
    seq: &FrameSequence,
    seed: u64,
) -> Result<(FrameSequence, PerturbSpec)> {
    apply_random_perturbation_with(seq, seed, &PerturbOptions::default())
}

pub fn apply_random_perturbation_with(
    seq: &FrameSequence,
    seed: u64,
    opts: &PerturbOptions,
) -> Result<(FrameSequence, PerturbSpec)> {
    if seq.len() < 2 {
        return Err(Error::TooShort {
            len: seq.len(),
            min: 2,
        });
    }
    let modes = opts.applicable_modes(seq.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mode = modes[rng.random_range(0..modes.len())];
    let spec = random_spec(mode, seq.len(), opts, &mut rng)?;
    let out = spec.apply(seq)?;
    Ok((out, spec))
}
