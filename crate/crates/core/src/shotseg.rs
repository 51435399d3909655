//! Shot boundary detection with frame skipping.
//!
//! Frame `i` is compared against frame `i + k` on two cues: the mean circular hue
//! distance of the HSI frames, and the fraction of `block_size` tiles whose mean
//! absolute RGB difference exceeds `block_change_level`. Both must exceed their
//! thresholds for a cut to be declared at `i + k`. Comparisons advance by `k`, which
//! bridges gradual transitions shorter than the skip.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{rgb_to_hsi, ColorSpace, Frame, FrameSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotParams {
    /// Frame skip; also the keyframe stride.
    pub k: usize,
    pub motion_threshold: f64,
    pub block_threshold: f64,
    pub block_size: usize,
    /// Mean absolute RGB difference above which a single block counts as changed.
    pub block_change_level: f64,
}

impl Default for ShotParams {
    fn default() -> Self {
        ShotParams { k: 10, motion_threshold: 0.10, block_threshold: 0.25, block_size: 64, block_change_level: 0.08 }
    }
}

impl ShotParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.k < 1 {
            return Err(Error::InvalidParam("shot.k must be >= 1".into()));
        }
        if self.block_size < 1 {
            return Err(Error::InvalidParam("shot.block_size must be >= 1".into()));
        }
        if !unit(self.motion_threshold) || !unit(self.block_threshold) || !unit(self.block_change_level) {
            return Err(Error::InvalidParam("shot thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Frames `[start, end)` of one continuous take.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub start: usize,
    pub end: usize,
    pub keyframes: Vec<usize>,
}

impl Shot {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotList {
    pub shots: Vec<Shot>,
    pub frame_count: usize,
}

impl ShotList {
    /// Build shots from sorted boundary indices (each the first frame of a new shot).
    pub fn from_boundaries(frame_count: usize, boundaries: &[usize], k: usize) -> ShotList {
        let mut starts = vec![0];
        starts.extend(boundaries.iter().copied().filter(|&b| b > 0 && b < frame_count));
        starts.dedup();
        let shots = starts
            .iter()
            .enumerate()
            .map(|(n, &start)| {
                let end = starts.get(n + 1).copied().unwrap_or(frame_count);
                Shot { start, end, keyframes: (start..end).step_by(k.max(1)).collect() }
            })
            .collect();
        ShotList { shots, frame_count }
    }

    /// Start index of every shot after the first.
    pub fn boundaries(&self) -> Vec<usize> {
        self.shots.iter().skip(1).map(|s| s.start).collect()
    }

    pub fn keyframes(&self) -> impl Iterator<Item = usize> + '_ {
        self.shots.iter().flat_map(|s| s.keyframes.iter().copied())
    }

    /// Check the partition and keyframe invariants.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for s in &self.shots {
            if s.start != next || s.start >= s.end {
                return Err(Error::Format(format!(
                    "shots must partition 0..{} contiguously (bad shot {}..{})",
                    self.frame_count, s.start, s.end
                )));
            }
            if s.keyframes.iter().any(|&f| f < s.start || f >= s.end)
                || s.keyframes.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(Error::Format(format!("bad keyframes in shot {}..{}", s.start, s.end)));
            }
            next = s.end;
        }
        if next != self.frame_count {
            return Err(Error::Format(format!("shots end at {next}, sequence has {} frames", self.frame_count)));
        }
        Ok(())
    }
}

/// Mean circular hue distance, scaled so antipodal hues give 1.
pub fn hue_motion_difference(a: &Frame, b: &Frame) -> Result<f64> {
    a.expect_space(ColorSpace::Hsi)?;
    b.expect_space(ColorSpace::Hsi)?;
    a.expect_same_dims(b)?;
    let total: f64 = a
        .plane(0)
        .iter()
        .zip(b.plane(0))
        .map(|(&h1, &h2)| {
            let d = (h1 - h2).abs();
            d.min(1.0 - d).max(0.0)
        })
        .sum();
    Ok((2.0 * total / a.len() as f64).min(1.0))
}

/// Fraction of tiles whose mean absolute RGB difference exceeds `block_change_level`.
pub fn block_change_ratio(a: &Frame, b: &Frame, params: &ShotParams) -> Result<f64> {
    a.expect_space(ColorSpace::Rgb)?;
    b.expect_space(ColorSpace::Rgb)?;
    a.expect_same_dims(b)?;
    let (w, h) = a.dims();
    let bs = params.block_size.max(1);
    let (mut changed, mut total) = (0usize, 0usize);
    for by in (0..h).step_by(bs) {
        for bx in (0..w).step_by(bs) {
            let (x1, y1) = ((bx + bs).min(w), (by + bs).min(h));
            let mut sum = 0.0;
            for c in 0..3 {
                let (pa, pb) = (a.plane(c), b.plane(c));
                for y in by..y1 {
                    let row = y * w;
                    for x in bx..x1 {
                        sum += (pa[row + x] - pb[row + x]).abs();
                    }
                }
            }
            let mean = sum / (3 * (x1 - bx) * (y1 - by)) as f64;
            total += 1;
            if mean > params.block_change_level {
                changed += 1;
            }
        }
    }
    Ok(changed as f64 / total as f64)
}

/// One `(i, j)` comparison and its cue values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub from: usize,
    pub to: usize,
    pub motion: f64,
    pub block_ratio: f64,
}

/// Frame pairs compared by the detector: `(0, k), (k, 2k), ...`, with the last pair
/// clipped to the final frame.
pub fn comparison_pairs(frame_count: usize, k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut i = 0;
    while i + 1 < frame_count {
        let j = (i + k).min(frame_count - 1);
        pairs.push((i, j));
        i = j;
    }
    pairs
}

/// Evaluate both cues on every comparison pair. Pairs run in parallel.
pub fn compare_frames(seq: &FrameSequence, params: &ShotParams) -> Result<Vec<Comparison>> {
    params.validate()?;
    let pairs = comparison_pairs(seq.len(), params.k);
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (seq.get(i)?, seq.get(j)?);
            let motion = hue_motion_difference(&rgb_to_hsi(&a)?, &rgb_to_hsi(&b)?)?;
            let block_ratio = block_change_ratio(&a, &b, params)?;
            Ok(Comparison { from: i, to: j, motion, block_ratio })
        })
        .collect()
}

/// Apply the thresholds to precomputed comparisons.
pub fn shots_from_comparisons(frame_count: usize, comparisons: &[Comparison], params: &ShotParams) -> ShotList {
    let boundaries: Vec<usize> = comparisons
        .iter()
        .filter(|c| c.motion > params.motion_threshold && c.block_ratio > params.block_threshold)
        .map(|c| c.to)
        .collect();
    ShotList::from_boundaries(frame_count, &boundaries, params.k)
}

pub fn detect_shots(seq: &FrameSequence, params: &ShotParams) -> Result<ShotList> {
    if seq.is_empty() {
        return Err(Error::Empty("cannot detect shots in an empty sequence".into()));
    }
    let comparisons = compare_frames(seq, params)?;
    Ok(shots_from_comparisons(seq.len(), &comparisons, params))
}

/// JSON array of `{start, end, keyframes}` records.
pub fn export_shots(shots: &ShotList) -> String {
    serde_json::to_string_pretty(&shots.shots).expect("shots serialize")
}

/// Parse an exported shot report. The frame count is taken from the last shot's end.
pub fn parse_shots(text: &str) -> Result<ShotList> {
    let shots: Vec<Shot> = serde_json::from_str(text)?;
    let frame_count = shots.last().map(|s| s.end).unwrap_or(0);
    let list = ShotList { shots, frame_count };
    list.validate()?;
    Ok(list)
}
