//! Tap-point localization: the title-match heuristic first, then the argmax
//! of a heatmap network trained on tap clips.
//!
//! Heatmaps live on a model grid of `height × width` cells. Cell `(r, c)`
//! covers the source rectangle `[c·sx, (c+1)·sx) × [r·sy, (r+1)·sy)` where
//! `sx = src_w / width` and `sy = src_h / height`.

pub mod checkpoint;
pub mod model;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use vid2trace_nn::{NnError, Tensor};

use crate::geometry::{Point, Rect, ScreenDims};
use crate::raster::Raster;
use crate::recording::OcrToken;
use crate::trace::Clip;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{LocModel, ModelGrads};
pub use train::{point_accuracy, train, train_with, TrainConfig, TrainReport};

#[derive(Debug, thiserror::Error)]
pub enum LocError {
    #[error("empty clip")]
    EmptyClip,
    #[error("empty training set")]
    EmptyDataset,
    #[error("point ({x}, {y}) lies outside {width}x{height}")]
    PointOutside { x: f64, y: f64, width: u32, height: u32 },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("clip frames are {got:?}, model expects {expected:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },
    #[error("non-finite loss {value} at epoch {epoch}, sample {sample}")]
    NonFinite { epoch: usize, sample: usize, value: f64 },
    #[error("heuristic did not fire and no model checkpoint was given")]
    MissingModel,
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "hm2d")]
    Hm2d,
    #[serde(rename = "hm3d")]
    Hm3d,
    #[serde(rename = "hm3d-noshortcut")]
    Hm3dNoShortcut,
    #[serde(rename = "hm3d+2d")]
    Hm3d2d,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Hm2d, Variant::Hm3d, Variant::Hm3dNoShortcut, Variant::Hm3d2d];

    pub fn uses_2d(self) -> bool {
        matches!(self, Variant::Hm2d | Variant::Hm3d2d)
    }

    pub fn uses_3d(self) -> bool {
        !matches!(self, Variant::Hm2d)
    }

    pub fn has_shortcut(self) -> bool {
        !matches!(self, Variant::Hm3dNoShortcut)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Hm2d => "hm2d",
            Variant::Hm3d => "hm3d",
            Variant::Hm3dNoShortcut => "hm3d-noshortcut",
            Variant::Hm3d2d => "hm3d+2d",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == norm || (norm == "hm3d-2d" && *v == Variant::Hm3d2d))
            .ok_or_else(|| format!("unknown variant `{s}` (expected hm2d, hm3d, hm3d-noshortcut, hm3d+2d)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocModelConfig {
    pub variant: Variant,
    pub k: usize,
    /// Model grid height (rows).
    pub height: usize,
    /// Model grid width (columns).
    pub width: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LocModelConfig {
    fn default() -> Self {
        Self { variant: Variant::Hm3d2d, k: 8, height: 512, width: 256, alpha: 2.0, beta: 4.0 }
    }
}

impl LocModelConfig {
    /// 128×64 grid used for CPU-scale runs.
    pub fn desk(variant: Variant) -> Self {
        Self { variant, height: 128, width: 64, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), LocError> {
        if self.k != 8 && self.k != 16 {
            return Err(LocError::Config(format!("k must be 8 or 16, got {}", self.k)));
        }
        if self.height == 0 || self.width == 0 || self.height % 8 != 0 || self.width % 8 != 0 {
            return Err(LocError::Config(format!("grid {}x{} must be positive multiples of 8", self.height, self.width)));
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(LocError::Config("alpha and beta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    pub top_bar_fraction: f64,
    pub bottom_bar_fraction: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self { top_bar_fraction: 0.12, bottom_bar_fraction: 0.10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocMethod {
    Heuristic,
    Model,
}

impl LocMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            LocMethod::Heuristic => "heuristic",
            LocMethod::Model => "model",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleMatch {
    pub point: Point,
    pub bbox: Rect,
    pub title: String,
}

/// New-screen title equal to a content label of the previous screen.
pub fn title_match_heuristic(
    prev: &[OcrToken],
    next: &[OcrToken],
    dims: ScreenDims,
    cfg: &HeuristicConfig,
) -> Option<TitleMatch> {
    let h = dims.height as f64;
    let top = h * cfg.top_bar_fraction;
    let bottom = h * (1.0 - cfg.bottom_bar_fraction);
    let title = next
        .iter()
        .filter(|t| t.bbox.center().y < top)
        .min_by(|a, b| a.bbox.y.total_cmp(&b.bbox.y).then(a.bbox.x.total_cmp(&b.bbox.x)))?;
    let wanted = title.text.to_lowercase();
    prev.iter()
        .filter(|t| {
            let cy = t.bbox.center().y;
            cy >= top && cy < bottom
        })
        .filter(|t| t.text.to_lowercase() == wanted)
        .min_by(|a, b| a.bbox.y.total_cmp(&b.bbox.y).then(a.bbox.x.total_cmp(&b.bbox.x)))
        .map(|t| TitleMatch { point: t.bbox.center(), bbox: t.bbox, title: title.text.clone() })
}

/// `round(linspace(0, n-1, k))`, rounding halves away from zero.
pub fn sample_indices(n: usize, k: usize) -> Result<Vec<usize>, LocError> {
    if n == 0 {
        return Err(LocError::EmptyClip);
    }
    if k == 1 {
        return Ok(vec![0]);
    }
    let last = (n - 1) as f64;
    Ok((0..k).map(|i| (last * i as f64 / (k - 1) as f64).round() as usize).collect())
}

/// Clip frames resampled to the model grid, laid out `[3, K, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipTensor {
    pub frames: Tensor<f32>,
    /// Positions within the clip that were sampled.
    pub indices: Vec<usize>,
}

impl ClipTensor {
    pub fn k(&self) -> usize {
        self.frames.shape()[1]
    }

    /// First and last sampled frame stacked to `[6, H, W]`.
    pub fn endpoints(&self) -> Tensor<f32> {
        let s = self.frames.shape();
        let (k, hw) = (s[1], s[2] * s[3]);
        let mut data = Vec::with_capacity(6 * hw);
        for z in [0, k - 1] {
            for c in 0..3 {
                let off = (c * k + z) * hw;
                data.extend_from_slice(&self.frames.data()[off..off + hw]);
            }
        }
        Tensor::from_vec(&[6, s[2], s[3]], data).expect("endpoint extents")
    }
}

pub fn sample_frames(frames: &[&Raster], k: usize, height: usize, width: usize) -> Result<ClipTensor, LocError> {
    let indices = sample_indices(frames.len(), k)?;
    let hw = height * width;
    let mut data = vec![0.0f32; 3 * k * hw];
    for (z, &i) in indices.iter().enumerate() {
        let small = frames[i].resize_bilinear(width, height);
        for (p, px) in small.data().chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[(c * k + z) * hw + p] = px[c];
            }
        }
    }
    Ok(ClipTensor { frames: Tensor::from_vec(&[3, k, height, width], data)?, indices })
}

/// Source ↔ model-grid coordinate mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMap {
    pub source: ScreenDims,
    pub height: usize,
    pub width: usize,
}

impl GridMap {
    pub fn new(source: ScreenDims, height: usize, width: usize) -> Self {
        Self { source, height, width }
    }

    fn sx(&self) -> f64 {
        self.source.width as f64 / self.width as f64
    }

    fn sy(&self) -> f64 {
        self.source.height as f64 / self.height as f64
    }

    /// Cell containing a source point.
    pub fn to_cell(&self, p: Point) -> Result<(usize, usize), LocError> {
        if !self.source.contains(p) {
            return Err(LocError::PointOutside { x: p.x, y: p.y, width: self.source.width, height: self.source.height });
        }
        let r = ((p.y / self.sy()).floor() as usize).min(self.height - 1);
        let c = ((p.x / self.sx()).floor() as usize).min(self.width - 1);
        Ok((r, c))
    }

    /// Source point at the center of a cell.
    pub fn to_source(&self, row: usize, col: usize) -> Point {
        Point::new((col as f64 + 0.5) * self.sx(), (row as f64 + 0.5) * self.sy())
    }

    pub fn rect_to_grid(&self, r: &Rect) -> Rect {
        Rect::new(r.x / self.sx(), r.y / self.sy(), r.w / self.sx(), r.h / self.sy())
    }
}

/// Element box assumed when none is annotated, in source pixels.
pub const FALLBACK_BOX_PX: f64 = 24.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetHeatmap {
    /// `[1, H, W]`
    pub grid: Tensor<f32>,
    /// (row, col)
    pub peak: (usize, usize),
    /// Element box in source pixels.
    pub element_bbox: Rect,
}

pub fn gaussian_sigma(bbox_w: f64, bbox_h: f64) -> f64 {
    (bbox_w.min(bbox_h) / 6.0).max(1.0)
}

/// Gaussian target around the tap, zero outside the element box dilated by σ.
/// σ and the box are measured in grid cells.
pub fn make_target_heatmap(tap: Point, element: Option<Rect>, map: GridMap) -> Result<TargetHeatmap, LocError> {
    let (pr, pc) = map.to_cell(tap)?;
    let bbox = element.unwrap_or_else(|| {
        Rect::new(tap.x - FALLBACK_BOX_PX / 2.0, tap.y - FALLBACK_BOX_PX / 2.0, FALLBACK_BOX_PX, FALLBACK_BOX_PX)
    });
    let gb = map.rect_to_grid(&bbox);
    let sigma = gaussian_sigma(gb.w, gb.h);
    let support = gb.inflated(sigma);
    let (h, w) = (map.height, map.width);
    let mut data = vec![0.0f32; h * w];
    for r in 0..h {
        for c in 0..w {
            let (cy, cx) = (r as f64 + 0.5, c as f64 + 0.5);
            if cx < support.x || cx > support.right() || cy < support.y || cy > support.bottom() {
                continue;
            }
            let d2 = ((r as f64 - pr as f64).powi(2) + (c as f64 - pc as f64).powi(2)) / (2.0 * sigma * sigma);
            data[r * w + c] = (-d2).exp() as f32;
        }
    }
    data[pr * w + pc] = 1.0;
    Ok(TargetHeatmap { grid: Tensor::from_vec(&[1, h, w], data)?, peak: (pr, pc), element_bbox: bbox })
}

/// Row-major argmax of the last two axes; ties go to the smallest `(row, col)`.
pub fn argmax(heatmap: &Tensor<f32>) -> (usize, usize) {
    let s = heatmap.shape();
    let w = s[s.len() - 1];
    let mut best = 0;
    for (i, &v) in heatmap.data().iter().enumerate() {
        if v > heatmap.data()[best] {
            best = i;
        }
    }
    (best / w, best % w)
}

#[derive(Debug, Clone)]
pub struct Localization {
    pub point: Point,
    pub method: LocMethod,
    pub title_match: Option<TitleMatch>,
    pub heatmap: Option<Tensor<f32>>,
}

/// Heuristic first, model argmax otherwise.
pub fn localize_tap(
    clip: Clip,
    frames: &[&Raster],
    tokens: &[Vec<OcrToken>],
    dims: ScreenDims,
    model: Option<&LocModel<f32>>,
    cfg: &HeuristicConfig,
) -> Result<Localization, LocError> {
    let empty = Vec::new();
    let prev = tokens.get(clip.start).unwrap_or(&empty);
    let next = tokens.get(clip.end).unwrap_or(&empty);
    if let Some(m) = title_match_heuristic(prev, next, dims, cfg) {
        return Ok(Localization { point: m.point, method: LocMethod::Heuristic, title_match: Some(m), heatmap: None });
    }
    let model = model.ok_or(LocError::MissingModel)?;
    let end = clip.end.min(frames.len().saturating_sub(1));
    let slice = frames.get(clip.start..=end).ok_or(LocError::EmptyClip)?;
    let (point, heatmap) = model_point(model, slice, dims)?;
    Ok(Localization { point, method: LocMethod::Model, title_match: None, heatmap: Some(heatmap) })
}

/// Model argmax mapped back to source pixels.
pub fn model_point(model: &LocModel<f32>, clip_frames: &[&Raster], dims: ScreenDims) -> Result<(Point, Tensor<f32>), LocError> {
    let cfg = model.config();
    let clip = sample_frames(clip_frames, cfg.k, cfg.height, cfg.width)?;
    let p = model.predict(&clip)?;
    let (r, c) = argmax(&p);
    Ok((GridMap::new(dims, cfg.height, cfg.width).to_source(r, c), p))
}

/// One supervised tap example.
#[derive(Debug, Clone)]
pub struct Sample {
    pub clip: ClipTensor,
    pub target: TargetHeatmap,
}

pub fn tap_sample(
    clip_frames: &[&Raster],
    dims: ScreenDims,
    tap: Point,
    element: Option<Rect>,
    cfg: &LocModelConfig,
) -> Result<Sample, LocError> {
    let clip = sample_frames(clip_frames, cfg.k, cfg.height, cfg.width)?;
    let target = make_target_heatmap(tap, element, GridMap::new(dims, cfg.height, cfg.width))?;
    Ok(Sample { clip, target })
}
