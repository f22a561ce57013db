//! Stable-interval segmentation of a frame sequence.
//!
//! Consecutive frames are compared through a feature descriptor. Similarity
//! indices within `(max - min) / divisor` of the series maximum are stable;
//! maximal stable runs of at least `min_stable_frames` frames become intervals
//! and their middle frames become keyframes. Adjacent keyframes bound one
//! interaction clip each.

pub mod features;
pub mod similarity;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use features::{extract_feature, FeatureKind, FeatureMap};
pub use similarity::{similarity, Metric};

use crate::raster::Raster;
use crate::trace::Clip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegConfig {
    pub feature: FeatureKind,
    pub metric: Metric,
    pub min_stable_frames: usize,
    pub spike_divisor: f64,
    pub hog_cell: usize,
    pub hog_bins: usize,
    pub hist_bins: usize,
    /// `(width, height)` for RGB/YUV comparison.
    pub downsample: (usize, usize),
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            feature: FeatureKind::Hog,
            metric: Metric::Ssim,
            min_stable_frames: 4,
            spike_divisor: 15.0,
            hog_cell: 16,
            hog_bins: 9,
            hist_bins: 32,
            downsample: (64, 128),
        }
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<(), SegError> {
        if !(self.spike_divisor > 0.0) {
            return Err(SegError::Config(format!("spike divisor {} must be > 0", self.spike_divisor)));
        }
        if self.min_stable_frames < 2 {
            return Err(SegError::Config(format!("min_stable_frames {} must be >= 2", self.min_stable_frames)));
        }
        if self.hog_bins == 0 || self.hist_bins == 0 || self.downsample.0 == 0 || self.downsample.1 == 0 {
            return Err(SegError::Config("bin counts and downsample size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableInterval {
    pub start_frame: usize,
    pub end_frame: usize,
    pub keyframe: usize,
}

impl StableInterval {
    pub fn new(start_frame: usize, end_frame: usize) -> Self {
        Self { start_frame, end_frame, keyframe: (start_frame + end_frame) / 2 }
    }

    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start_frame..=self.end_frame).contains(&frame)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SegError {
    #[error("segmentation config: {0}")]
    Config(String),
    #[error("feature layout mismatch: {0}")]
    Layout(String),
    #[error("similarity series is empty")]
    EmptySeries,
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("no stable interval found in {} similarity values", series.len())]
    Failed { series: Vec<f64> },
}

/// θ = s_max − (s_max − s_min) / divisor.
pub fn spike_threshold(series: &[f64], divisor: f64) -> Result<f64, SegError> {
    if series.is_empty() {
        return Err(SegError::EmptySeries);
    }
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - (max - min) / divisor)
}

pub fn detect_stable_intervals(series: &[f64], cfg: &SegConfig) -> Result<Vec<StableInterval>, SegError> {
    let theta = spike_threshold(series, cfg.spike_divisor)?;
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for t in 0..=series.len() {
        let stable = t < series.len() && series[t] >= theta;
        match (stable, run_start) {
            (true, None) => run_start = Some(t),
            (false, Some(i)) => {
                // similarity indices i..t-1 cover frames i..t
                let interval = StableInterval::new(i, t);
                if interval.len() >= cfg.min_stable_frames {
                    out.push(interval);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub series: Vec<f64>,
    pub threshold: f64,
    pub intervals: Vec<StableInterval>,
    pub keyframes: Vec<usize>,
    pub clips: Vec<Clip>,
}

pub fn similarity_series(frames: &[&Raster], cfg: &SegConfig) -> Result<Vec<f64>, SegError> {
    let feats = frames
        .par_iter()
        .map(|f| extract_feature(f, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    feats.par_windows(2).map(|w| similarity(&w[0], &w[1], cfg.metric)).collect()
}

pub fn segment_video(frames: &[&Raster], cfg: &SegConfig) -> Result<Segmentation, SegError> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(SegError::TooFewFrames(frames.len()));
    }
    let series = similarity_series(frames, cfg)?;
    let threshold = spike_threshold(&series, cfg.spike_divisor)?;
    let intervals = detect_stable_intervals(&series, cfg)?;
    if intervals.is_empty() {
        return Err(SegError::Failed { series });
    }
    let keyframes: Vec<usize> = intervals.iter().map(|i| i.keyframe).collect();
    let clips = keyframes.windows(2).map(|k| Clip::new(k[0], k[1])).collect();
    Ok(Segmentation { series, threshold, intervals, keyframes, clips })
}
