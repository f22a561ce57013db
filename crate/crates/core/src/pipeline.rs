//! End-to-end extraction: segment, classify, localize taps, attach targets,
//! and persist every intermediate result next to the trace.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classification::{classify_interaction, typed_candidates, Classification, ClassifierConfig};
use crate::geometry::{Point, Rect, ScreenDims};
use crate::localization::{
    localize_tap, HeuristicConfig, LocError, LocMethod, LocModel, LocModelConfig, TitleMatch, TrainConfig,
    FALLBACK_BOX_PX,
};
use crate::raster::Raster;
use crate::recording::{Recording, RecordingError};
use crate::replay::{fallback_detect, nearest_text_inside, select_target_detection, DetectionKind, DetectorConfig, MatchConfig};
use crate::segmentation::{segment_video, SegConfig, SegError, Segmentation};
use crate::trace::{normalize_point, to_canonical_string, Clip, InteractionTrace, InteractionType, Target, TraceError};

pub const TRACE_FILE: &str = "trace.json";
pub const SEGMENTATION_FILE: &str = "segmentation.json";
pub const CLASSIFICATION_FILE: &str = "classifications.json";
pub const LOCALIZATION_FILE: &str = "localizations.json";
pub const CROP_DIR: &str = "crops";
pub const HEATMAP_DIR: &str = "heatmaps";

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub segmentation: SegConfig,
    pub classifier: ClassifierConfig,
    pub heuristic: HeuristicConfig,
    pub model: LocModelConfig,
    pub train: TrainConfig,
    pub detector: DetectorConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            segmentation: SegConfig::default(),
            classifier: ClassifierConfig::default(),
            heuristic: HeuristicConfig::default(),
            model: LocModelConfig::default(),
            train: TrainConfig::default(),
            detector: DetectorConfig::default(),
            matching: MatchConfig::default(),
            checkpoint: None,
            output: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!("unsupported config version {}", self.version));
        }
        self.segmentation.validate().map_err(|e| e.to_string())?;
        self.classifier.validate()?;
        self.model.validate().map_err(|e| e.to_string())?;
        self.matching.validate()?;
        if !(0.0..1.0).contains(&self.heuristic.top_bar_fraction) || !(0.0..1.0).contains(&self.heuristic.bottom_bar_fraction) {
            return Err("heuristic band fractions must lie in [0, 1)".into());
        }
        if self.heuristic.top_bar_fraction + self.heuristic.bottom_bar_fraction >= 1.0 {
            return Err("heuristic bands cover the whole screen".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Config,
    Load,
    Segment,
    Classify,
    Localize,
    Output,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Config => "config",
            Self::Load => "load",
            Self::Segment => "segment",
            Self::Classify => "classify",
            Self::Localize => "localize",
            Self::Output => "output",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("load: {0}")]
    Load(#[from] RecordingError),
    #[error("segment: {0}")]
    Segment(#[from] SegError),
    #[error("classify: {0}")]
    Classify(String),
    #[error("localize: interaction {index} (frames {}..={}): {source}", clip.start, clip.end)]
    Localize { index: usize, clip: Clip, source: LocError },
    #[error("output {path}: {message}")]
    Output { path: String, message: String },
}

impl PipelineError {
    pub fn phase(&self) -> Phase {
        match self {
            Self::Config(_) => Phase::Config,
            Self::Load(_) => Phase::Load,
            Self::Segment(_) => Phase::Segment,
            Self::Classify(_) => Phase::Classify,
            Self::Localize { .. } => Phase::Localize,
            Self::Output { .. } => Phase::Output,
        }
    }
}

/// How one tap point was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapLocalization {
    pub index: usize,
    pub clip: Clip,
    pub point_px: Point,
    pub method: LocMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title_match: Option<TitleMatch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<String>,
}

/// Everything the pipeline produced, before anything is written.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub segmentation: Segmentation,
    pub classifications: Vec<Classification>,
    pub localizations: Vec<TapLocalization>,
    /// Model heatmaps keyed by interaction index, `[1, H, W]`.
    pub heatmaps: Vec<(usize, vid2trace_nn::Tensor<f32>)>,
    /// Target crops keyed by interaction index.
    pub crops: Vec<(usize, Raster)>,
    pub trace: InteractionTrace,
}

fn crop_name(index: usize) -> String {
    format!("{CROP_DIR}/{index:03}.png")
}

fn heatmap_name(index: usize) -> String {
    format!("{HEATMAP_DIR}/{index:03}.png")
}

fn fallback_box(p: Point, dims: ScreenDims) -> Rect {
    let h = FALLBACK_BOX_PX / 2.0;
    Rect::new(p.x - h, p.y - h, FALLBACK_BOX_PX, FALLBACK_BOX_PX).clipped(&dims.rect())
}

/// Element under `point` on `raster`: the smallest detection containing it,
/// labeled with the nearest OCR text inside.
pub fn tap_target(point: Point, raster: &Raster, tokens: &[crate::recording::OcrToken], dims: ScreenDims, cfg: &DetectorConfig) -> Target {
    let dets = fallback_detect(raster, tokens, cfg);
    match select_target_detection(point, &dets) {
        Some(d) => {
            let text = match d.kind {
                DetectionKind::Text => d.text.clone(),
                DetectionKind::NonText => nearest_text_inside(point, &d.bbox, tokens),
            };
            Target { bbox: d.bbox, text, crop: None }
        }
        None => Target { bbox: fallback_box(point, dims), text: None, crop: None },
    }
}

/// Run all phases in memory over a loaded recording.
pub fn run_pipeline(
    rec: &Recording,
    source: &str,
    cfg: &PipelineConfig,
    model: Option<&LocModel<f32>>,
) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let dims = rec.dims();
    let rasters = rec.frames.rasters();
    let segmentation = segment_video(&rasters, &cfg.segmentation)?;

    let classifications: Vec<Classification> =
        segmentation.clips.iter().map(|&clip| classify_interaction(clip, &rec.tokens, dims, &cfg.classifier)).collect();

    let empty = Vec::new();
    let tokens_at = |i: usize| rec.tokens.get(i).unwrap_or(&empty).as_slice();
    let mut trace = InteractionTrace::new(dims, source);
    let mut localizations = Vec::new();
    let mut heatmaps = Vec::new();
    let mut crops = Vec::new();
    for (index, c) in classifications.iter().enumerate() {
        let mut it = c.interaction.clone();
        let clip = it.clip;
        match it.kind {
            InteractionType::Tap => {
                let loc = localize_tap(clip, &rasters, &rec.tokens, dims, model, &cfg.heuristic)
                    .map_err(|source| PipelineError::Localize { index, clip, source })?;
                let point_px = clamp_to(loc.point, dims);
                it.point = Some(normalize_point(point_px, dims).expect("clamped into the screen"));
                let keyframe = rasters[clip.start];
                let mut target = tap_target(point_px, keyframe, tokens_at(clip.start), dims, &cfg.detector);
                crops.push((index, keyframe.crop(&target.bbox)));
                target.crop = Some(crop_name(index));
                it.target = Some(target);
                let heatmap = loc.heatmap.map(|h| {
                    heatmaps.push((index, h));
                    heatmap_name(index)
                });
                localizations.push(TapLocalization { index, clip, point_px, method: loc.method, title_match: loc.title_match, heatmap });
            }
            InteractionType::Type => {
                if let Some(kb) = &c.evidence.keyboard_end {
                    let typed = typed_candidates(tokens_at(clip.start), tokens_at(clip.end), kb);
                    if let Some(bbox) = typed.iter().map(|t| t.bbox).min_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x))) {
                        it.point = normalize_point(clamp_to(bbox.center(), dims), dims).ok();
                        it.target = Some(Target { bbox, text: None, crop: None });
                    }
                }
            }
            _ => {}
        }
        trace.interactions.push(it);
    }
    trace.validate().map_err(|e| PipelineError::Classify(e.to_string()))?;
    Ok(PipelineOutput { segmentation, classifications, localizations, heatmaps, crops, trace })
}

fn clamp_to(p: Point, dims: ScreenDims) -> Point {
    Point::new(p.x.clamp(0.0, dims.width as f64), p.y.clamp(0.0, dims.height as f64))
}

/// Grayscale rendering of a `[.., H, W]` heatmap.
pub fn heatmap_raster(h: &vid2trace_nn::Tensor<f32>) -> Raster {
    let s = h.shape();
    let (rows, cols) = (s[s.len() - 2], s[s.len() - 1]);
    let data = h.data()[..rows * cols].iter().flat_map(|&v| [v.clamp(0.0, 1.0); 3]).collect();
    Raster::from_data(cols, rows, data).expect("heatmap extents match")
}

fn output_err(path: &Path, e: impl ToString) -> PipelineError {
    PipelineError::Output { path: path.display().to_string(), message: e.to_string() }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let doc = to_canonical_string(value).map_err(|e: TraceError| output_err(path, e))?;
    fs::write(path, doc + "\n").map_err(|e| output_err(path, e))
}

/// Write the trace and all intermediate artifacts into `out`.
pub fn write_output(out: &Path, result: &PipelineOutput) -> Result<PathBuf, PipelineError> {
    for dir in [out.to_path_buf(), out.join(CROP_DIR), out.join(HEATMAP_DIR)] {
        fs::create_dir_all(&dir).map_err(|e| output_err(&dir, e))?;
    }
    write_json(&out.join(SEGMENTATION_FILE), &result.segmentation)?;
    write_json(&out.join(CLASSIFICATION_FILE), &result.classifications)?;
    write_json(&out.join(LOCALIZATION_FILE), &result.localizations)?;
    for (i, crop) in &result.crops {
        let path = out.join(crop_name(*i));
        crop.save_png(&path).map_err(|e| output_err(&path, e))?;
    }
    for (i, h) in &result.heatmaps {
        let path = out.join(heatmap_name(*i));
        heatmap_raster(h).save_png(&path).map_err(|e| output_err(&path, e))?;
    }
    let path = out.join(TRACE_FILE);
    result.trace.save(&path).map_err(|e| output_err(&path, e))?;
    Ok(path)
}

/// Load `recording_dir`, run every phase, write into `out`.
pub fn extract(recording_dir: &Path, out: &Path, cfg: &PipelineConfig, model: Option<&LocModel<f32>>) -> Result<PipelineOutput, PipelineError> {
    let rec = crate::recording::load_recording(recording_dir)?;
    let source = recording_dir.file_name().and_then(|s| s.to_str()).unwrap_or("recording").to_string();
    let result = run_pipeline(&rec, &source, cfg, model)?;
    write_output(out, &result)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster;
    use crate::recording::{FrameSequence, OcrToken};

    fn still(n: usize) -> Recording {
        let dims = ScreenDims::new(32, 64);
        let frames = FrameSequence::new(dims, 10.0, vec![Raster::filled(32, 64, [0.5; 3]); n]).unwrap();
        Recording { frames, tokens: vec![Vec::new(); n] }
    }

    #[test]
    fn unchanging_recording_has_no_interactions() {
        let out = run_pipeline(&still(12), "still", &PipelineConfig::default(), None).unwrap();
        assert_eq!(out.segmentation.keyframes.len(), 1);
        assert!(out.trace.interactions.is_empty());
    }

    #[test]
    fn heuristic_miss_without_model_is_a_localize_error() {
        let mut rec = still(20);
        for f in &mut rec.frames.frames[10..] {
            for y in 20..40 {
                for x in 4..28 {
                    f.raster.set(x, y, [0.1; 3]);
                }
            }
        }
        let err = run_pipeline(&rec, "dark", &PipelineConfig::default(), None).unwrap_err();
        assert_eq!(err.phase(), Phase::Localize, "{err}");
    }

    #[test]
    fn target_prefers_smallest_detection_and_labels_it() {
        let mut r = Raster::filled(60, 60, [0.9; 3]);
        for y in 10..30 {
            for x in 10..50 {
                r.set(x, y, [0.2, 0.4, 0.8]);
            }
        }
        let dims = ScreenDims::new(60, 60);
        let tokens = vec![OcrToken::new("Go", Rect::new(20.0, 15.0, 10.0, 7.0), 0)];
        let t = tap_target(Point::new(40.0, 25.0), &r, &tokens, dims, &DetectorConfig::default());
        assert_eq!(t.bbox, Rect::new(10.0, 10.0, 40.0, 20.0));
        assert_eq!(t.text.as_deref(), Some("Go"));
        let miss = tap_target(Point::new(2.0, 58.0), &r, &tokens, dims, &DetectorConfig::default());
        assert_eq!(miss.bbox, Rect::new(0.0, 46.0, 14.0, 14.0));
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let cfg = PipelineConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&json).unwrap(), cfg);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus":1}"#).is_err());
        let bad = PipelineConfig { heuristic: HeuristicConfig { top_bar_fraction: 0.6, bottom_bar_fraction: 0.5 }, ..cfg };
        assert!(bad.validate().is_err());
    }
}
