//! UI detections: the external file format, target selection, and a
//! built-in detector for screenshots that come without one.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Rect};
use crate::raster::Raster;
use crate::recording::OcrToken;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionKind {
    Text,
    NonText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub bbox: Rect,
    pub kind: DetectionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Detection {
    pub fn text(bbox: Rect, text: impl Into<String>) -> Self {
        Self { bbox, kind: DetectionKind::Text, text: Some(text.into()) }
    }

    pub fn non_text(bbox: Rect) -> Self {
        Self { bbox, kind: DetectionKind::NonText, text: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DetectionError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

pub fn load_detections(path: &Path) -> Result<Vec<Detection>, DetectionError> {
    let err = |message: String| DetectionError::File { path: path.display().to_string(), message };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| err(format!("{}: {}", e.path(), e.inner())))
}

pub fn save_detections(path: &Path, dets: &[Detection]) -> Result<(), DetectionError> {
    let err = |message: String| DetectionError::File { path: path.display().to_string(), message };
    let doc = crate::trace::to_canonical_string(&dets).map_err(|e| err(e.to_string()))?;
    fs::write(path, doc + "\n").map_err(|e| err(e.to_string()))
}

/// Smallest-area detection containing `point`; ties go to the smaller `(x, y)`.
pub fn select_target_detection(point: Point, dets: &[Detection]) -> Option<&Detection> {
    dets.iter()
        .filter(|d| d.bbox.contains(point))
        .min_by(|a, b| {
            a.bbox
                .area()
                .total_cmp(&b.bbox.area())
                .then(a.bbox.x.total_cmp(&b.bbox.x))
                .then(a.bbox.y.total_cmp(&b.bbox.y))
        })
}

/// Text of the token inside `bbox` whose center is nearest to `point`.
pub fn nearest_text_inside(point: Point, bbox: &Rect, tokens: &[OcrToken]) -> Option<String> {
    tokens
        .iter()
        .filter(|t| bbox.contains_rect(&t.bbox))
        .min_by(|a, b| a.bbox.center().distance(point).total_cmp(&b.bbox.center().distance(point)))
        .map(|t| t.text.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Channel difference from the background that counts as foreground.
    pub tolerance: f32,
    /// Components with fewer pixels are dropped.
    pub min_pixels: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { tolerance: 0.03, min_pixels: 12 }
    }
}

/// Most frequent 8-bit color.
fn mode_color(r: &Raster) -> [u8; 3] {
    let mut counts: BTreeMap<[u8; 3], usize> = BTreeMap::new();
    for px in r.to_rgb8().chunks_exact(3) {
        *counts.entry([px[0], px[1], px[2]]).or_default() += 1;
    }
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(c, _)| c).unwrap_or([0; 3])
}

/// Bounding boxes of 4-connected foreground components, in scan order.
pub fn foreground_components(r: &Raster, cfg: &DetectorConfig) -> Vec<Rect> {
    let (w, h) = (r.width(), r.height());
    let bg = mode_color(r).map(|c| c as f32 / 255.0);
    let fg: Vec<bool> = r
        .data()
        .chunks_exact(3)
        .map(|px| px.iter().zip(&bg).any(|(a, b)| (a - b).abs() > cfg.tolerance))
        .collect();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !fg[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut x0, mut y0, mut x1, mut y1, mut n) = (w, h, 0, 0, 0);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            n += 1;
            (x0, y0, x1, y1) = (x0.min(x), y0.min(y), x1.max(x), y1.max(y));
            let mut visit = |j: usize| {
                if fg[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if n >= cfg.min_pixels {
            out.push(Rect::new(x0 as f64, y0 as f64, (x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64));
        }
    }
    out
}

/// Text detections from OCR tokens plus non-text foreground components that
/// are not inside any text box.
pub fn fallback_detect(r: &Raster, tokens: &[OcrToken], cfg: &DetectorConfig) -> Vec<Detection> {
    let mut dets: Vec<Detection> = tokens.iter().map(|t| Detection::text(t.bbox, t.text.clone())).collect();
    for c in foreground_components(r, cfg) {
        if !tokens.iter().any(|t| t.bbox.inflated(1.0).contains_rect(&c)) {
            dets.push(Detection::non_text(c));
        }
    }
    dets
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_containing_detection_wins() {
        let dets = vec![Detection::non_text(Rect::new(0.0, 0.0, 100.0, 100.0)), Detection::non_text(Rect::new(10.0, 10.0, 40.0, 20.0))];
        assert_eq!(select_target_detection(Point::new(20.0, 20.0), &dets).unwrap().bbox.w, 40.0);
        assert!(select_target_detection(Point::new(200.0, 20.0), &dets).is_none());
        let tie = vec![Detection::non_text(Rect::new(5.0, 0.0, 10.0, 10.0)), Detection::non_text(Rect::new(0.0, 0.0, 10.0, 10.0))];
        assert_eq!(select_target_detection(Point::new(6.0, 5.0), &tie).unwrap().bbox.x, 0.0);
    }

    #[test]
    fn components_of_drawn_boxes() {
        let mut r = Raster::filled(40, 30, [0.9; 3]);
        for y in 2..8 {
            for x in 3..13 {
                r.set(x, y, [0.2, 0.3, 0.8]);
            }
        }
        for y in 20..25 {
            for x in 20..35 {
                r.set(x, y, [0.1; 3]);
            }
        }
        r.set(38, 28, [0.0; 3]);
        let comps = foreground_components(&r, &DetectorConfig::default());
        assert_eq!(comps, vec![Rect::new(3.0, 2.0, 10.0, 6.0), Rect::new(20.0, 20.0, 15.0, 5.0)]);
        let tokens = vec![OcrToken::new("hi", Rect::new(20.0, 20.0, 15.0, 5.0), 0)];
        let dets = fallback_detect(&r, &tokens, &DetectorConfig::default());
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[1].kind, DetectionKind::NonText);
    }

    #[test]
    fn detections_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let dets = vec![Detection::text(Rect::new(1.0, 2.0, 3.0, 4.0), "OK"), Detection::non_text(Rect::new(0.0, 0.0, 5.0, 5.0))];
        save_detections(&path, &dets).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"nontext\""));
        assert_eq!(load_detections(&path).unwrap(), dets);
        fs::write(&path, r#"[{"bbox":[0,0,1,1],"kind":"button"}]"#).unwrap();
        let err = load_detections(&path).unwrap_err().to_string();
        assert!(err.contains("kind"), "{err}");
    }
}
