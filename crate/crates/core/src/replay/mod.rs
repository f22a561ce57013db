//! Map recorded interactions onto a new screenshot.
//!
//! Type and swipe interactions replay directly from their normalized points.
//! Taps look for their target text among text detections, then for their
//! crop inside non-text detections, and scan the whole screenshot only when
//! neither succeeds.

pub mod detect;
pub mod template;
pub mod text;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, ScreenDims};
use crate::raster::Raster;
use crate::trace::{denormalize_point, Interaction, InteractionType, Swipe};

pub use detect::{
    fallback_detect, load_detections, nearest_text_inside, save_detections, select_target_detection, Detection,
    DetectionError, DetectionKind, DetectorConfig,
};
pub use template::{template_match, LumaImage, TemplateHit};
pub use text::{fuzzy_text_score, normalize_text};

pub const DEFAULT_SCALES: [f64; 9] = [0.5, 0.625, 0.75, 0.875, 1.0, 1.25, 1.5, 1.75, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub scales: Vec<f64>,
    pub min_text_score: f64,
    pub min_ncc: f64,
    /// Slack (px) around a detection within which its template may be placed.
    pub region_margin: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { scales: DEFAULT_SCALES.to_vec(), min_text_score: 0.6, min_ncc: 0.5, region_margin: 4.0 }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.scales.is_empty() {
            return Err("at least one template scale is required".into());
        }
        if let Some(s) = self.scales.iter().find(|s| !(0.5..=2.0).contains(*s)) {
            return Err(format!("template scale {s} outside [0.5, 2.0]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMethod {
    TextMatch,
    TemplateMatch,
    FullScreenTemplate,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayAction {
    pub kind: InteractionType,
    /// Pixels on the new screenshot.
    pub point: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<Detection>,
    pub score: f64,
    pub method: ReplayMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swipe: Option<Swipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typed_text: Option<String>,
}

/// Instrumentation of the template search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchStats {
    pub region_passes: usize,
    pub full_screen_passes: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("{kind} interaction has no point to replay")]
    MissingPoint { kind: InteractionType },
    #[error("tap has neither target text nor a crop")]
    NoTarget,
    #[error("no match (best text {best_text:?}, best region NCC {best_region:?}, best full-screen NCC {best_full:?})")]
    NoMatch { best_text: Option<f64>, best_region: Option<f64>, best_full: Option<f64> },
}

/// New screenshot plus its detections, with the luma tables built once.
pub struct ReplayScreen<'a> {
    pub raster: &'a Raster,
    pub detections: &'a [Detection],
    luma: LumaImage,
}

impl<'a> ReplayScreen<'a> {
    pub fn new(raster: &'a Raster, detections: &'a [Detection]) -> Self {
        Self { raster, detections, luma: LumaImage::new(raster) }
    }

    pub fn dims(&self) -> ScreenDims {
        ScreenDims::new(self.raster.width() as u32, self.raster.height() as u32)
    }
}

fn clamp_point(p: Point, d: ScreenDims) -> Point {
    Point::new(p.x.clamp(0.0, d.width as f64), p.y.clamp(0.0, d.height as f64))
}

/// Where and how to replay `interaction` (recorded on a `recorded` screen) on `screen`.
pub fn match_interaction(
    interaction: &Interaction,
    recorded: ScreenDims,
    crop: Option<&Raster>,
    screen: &ReplayScreen<'_>,
    cfg: &MatchConfig,
    stats: &mut MatchStats,
) -> Result<ReplayAction, MatchError> {
    let dims = screen.dims();
    let kind = interaction.kind;
    let direct_point = || interaction.point.map(|p| clamp_point(denormalize_point(p, dims), dims)).ok_or(MatchError::MissingPoint { kind });
    let direct = |point: Point| ReplayAction {
        kind,
        point,
        matched: None,
        score: 1.0,
        method: ReplayMethod::Direct,
        swipe: None,
        typed_text: interaction.typed_text.clone(),
    };
    match kind {
        InteractionType::Type => {
            let field = interaction.target.as_ref().map(|t| {
                let c = t.bbox.center();
                clamp_point(Point::new(c.x * dims.width as f64 / recorded.width as f64, c.y * dims.height as f64 / recorded.height as f64), dims)
            });
            Ok(direct(direct_point().or(field.ok_or(MatchError::MissingPoint { kind }))?))
        }
        k if k.is_swipe() => {
            let mut action = direct(direct_point()?);
            action.swipe = interaction.swipe.as_ref().map(|s| {
                let ratio = if s.direction.is_vertical() {
                    dims.height as f64 / recorded.height as f64
                } else {
                    dims.width as f64 / recorded.width as f64
                };
                Swipe { direction: s.direction, distance_px: s.distance_px * ratio }
            });
            Ok(action)
        }
        _ => match_tap(interaction, crop, screen, cfg, stats),
    }
}

fn match_tap(
    interaction: &Interaction,
    crop: Option<&Raster>,
    screen: &ReplayScreen<'_>,
    cfg: &MatchConfig,
    stats: &mut MatchStats,
) -> Result<ReplayAction, MatchError> {
    let dims = screen.dims();
    let target_text = interaction.target.as_ref().and_then(|t| t.text.as_deref()).filter(|t| !normalize_text(t).is_empty());
    if target_text.is_none() && crop.is_none() {
        return Err(MatchError::NoTarget);
    }
    let anchor = interaction.point.unwrap_or(Point::new(0.5, 0.5));
    let found = |d: &Detection, score: f64, method: ReplayMethod| ReplayAction {
        kind: interaction.kind,
        point: clamp_point(d.bbox.center(), dims),
        matched: Some(d.clone()),
        score,
        method,
        swipe: None,
        typed_text: None,
    };

    let mut best_text = None;
    if let Some(text) = target_text {
        let mut best: Option<(&Detection, f64, f64)> = None;
        for d in screen.detections.iter().filter(|d| d.kind == DetectionKind::Text) {
            let Some(label) = d.text.as_deref() else { continue };
            let score = fuzzy_text_score(text, label);
            let c = d.bbox.center();
            let dist = Point::new(c.x / dims.width as f64, c.y / dims.height as f64).distance(anchor);
            if best.map_or(true, |(_, s, bd)| score > s || (score == s && dist < bd)) {
                best = Some((d, score, dist));
            }
        }
        best_text = best.map(|b| b.1);
        if let Some((d, score, _)) = best.filter(|b| b.1 >= cfg.min_text_score) {
            return Ok(found(d, score, ReplayMethod::TextMatch));
        }
    }

    let no_match = |best_region, best_full| MatchError::NoMatch { best_text, best_region, best_full };
    let Some(crop) = crop else { return Err(no_match(None, None)) };
    let mut best: Option<(&Detection, TemplateHit)> = None;
    for d in screen.detections.iter().filter(|d| d.kind == DetectionKind::NonText) {
        stats.region_passes += 1;
        let region = d.bbox.inflated(cfg.region_margin);
        if let Some(hit) = template_match(crop, &screen.luma, &cfg.scales, Some(&region)) {
            if best.map_or(true, |(_, b)| hit.score > b.score) {
                best = Some((d, hit));
            }
        }
    }
    let best_region = best.map(|b| b.1.score);
    if let Some((d, hit)) = best.filter(|b| b.1.score >= cfg.min_ncc) {
        return Ok(found(d, hit.score, ReplayMethod::TemplateMatch));
    }
    stats.full_screen_passes += 1;
    match template_match(crop, &screen.luma, &cfg.scales, None) {
        Some(hit) if hit.score >= cfg.min_ncc => Ok(ReplayAction {
            kind: interaction.kind,
            point: clamp_point(hit.rect.center(), dims),
            matched: None,
            score: hit.score,
            method: ReplayMethod::FullScreenTemplate,
            swipe: None,
            typed_text: None,
        }),
        other => Err(no_match(best_region, other.map(|h| h.score))),
    }
}

/// One row of a replay plan: the action, or why none was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub index: usize,
    pub kind: InteractionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ReplayAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayPlan {
    pub screen: ScreenDims,
    pub entries: Vec<ReplayEntry>,
    pub stats: MatchStats,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::trace::{normalize_point, Clip, Direction, Target};

    fn tap_with(text: Option<&str>, at: Point, dims: ScreenDims) -> Interaction {
        let mut i = Interaction::tap(Clip { start: 0, end: 5 }, normalize_point(at, dims).unwrap());
        i.target = Some(Target { bbox: Rect::new(at.x - 5.0, at.y - 5.0, 10.0, 10.0), text: text.map(str::to_string), crop: None });
        i
    }

    fn icon_screen() -> (Raster, Rect) {
        let mut r = Raster::filled(80, 120, [0.95; 3]);
        let icon = Rect::new(50.0, 70.0, 16.0, 16.0);
        for y in 70..86 {
            for x in 50..66 {
                let v = if (x - 50) * (y - 70) % 7 < 3 { [0.1, 0.2, 0.7] } else { [0.9, 0.5, 0.1] };
                r.set(x, y, v);
            }
        }
        (r, icon)
    }

    #[test]
    fn text_target_follows_moved_label() {
        let dims = ScreenDims::new(80, 120);
        let raster = Raster::filled(80, 120, [1.0; 3]);
        let dets = vec![Detection::text(Rect::new(10.0, 90.0, 42.0, 7.0), "History"), Detection::text(Rect::new(10.0, 30.0, 30.0, 7.0), "Home")];
        let screen = ReplayScreen::new(&raster, &dets);
        let mut stats = MatchStats::default();
        let a = match_interaction(&tap_with(Some("History"), Point::new(20.0, 40.0), dims), dims, None, &screen, &MatchConfig::default(), &mut stats).unwrap();
        assert_eq!(a.method, ReplayMethod::TextMatch);
        assert_eq!(a.point, Point::new(31.0, 93.5));
        assert_eq!(stats, MatchStats::default());
    }

    #[test]
    fn icon_found_inside_detection_without_full_screen_pass() {
        let (raster, icon) = icon_screen();
        let dims = ScreenDims::new(80, 120);
        let crop = raster.crop(&icon);
        let dets = vec![Detection::non_text(icon), Detection::non_text(Rect::new(2.0, 2.0, 20.0, 10.0))];
        let screen = ReplayScreen::new(&raster, &dets);
        let mut stats = MatchStats::default();
        let a = match_interaction(&tap_with(None, Point::new(10.0, 10.0), dims), dims, Some(&crop), &screen, &MatchConfig::default(), &mut stats).unwrap();
        assert_eq!(a.method, ReplayMethod::TemplateMatch);
        assert!((a.score - 1.0).abs() < 1e-6);
        assert_eq!(a.point, icon.center());
        assert_eq!(stats.full_screen_passes, 0);
        assert_eq!(stats.region_passes, 2);
    }

    #[test]
    fn full_screen_fallback_runs_only_when_regions_fail() {
        let (raster, icon) = icon_screen();
        let dims = ScreenDims::new(80, 120);
        let crop = raster.crop(&icon);
        let dets = vec![Detection::non_text(Rect::new(2.0, 2.0, 20.0, 20.0))];
        let screen = ReplayScreen::new(&raster, &dets);
        let mut stats = MatchStats::default();
        let a = match_interaction(&tap_with(None, Point::new(10.0, 10.0), dims), dims, Some(&crop), &screen, &MatchConfig::default(), &mut stats).unwrap();
        assert_eq!(a.method, ReplayMethod::FullScreenTemplate);
        assert_eq!(stats.full_screen_passes, 1);
        assert!(icon.contains(a.point));
    }

    #[test]
    fn absent_content_is_a_no_match() {
        let (raster, icon) = icon_screen();
        let dims = ScreenDims::new(80, 120);
        let crop = raster.crop(&icon);
        let blank = Raster::filled(80, 120, [0.95; 3]);
        let screen = ReplayScreen::new(&blank, &[]);
        let mut stats = MatchStats::default();
        let err = match_interaction(&tap_with(Some("Album art"), icon.center(), dims), dims, Some(&crop), &screen, &MatchConfig::default(), &mut stats).unwrap_err();
        assert!(matches!(err, MatchError::NoMatch { .. }), "{err}");
    }

    #[test]
    fn swipe_distance_rescales_with_screen() {
        let rec = ScreenDims::new(100, 200);
        let new_raster = Raster::filled(200, 400, [1.0; 3]);
        let screen = ReplayScreen::new(&new_raster, &[]);
        let mut i = Interaction::tap(Clip { start: 0, end: 4 }, Point::new(0.5, 0.75));
        i.kind = InteractionType::SwipeUp;
        i.swipe = Some(Swipe { direction: Direction::Up, distance_px: 60.0 });
        let a = match_interaction(&i, rec, None, &screen, &MatchConfig::default(), &mut MatchStats::default()).unwrap();
        assert_eq!(a.point, Point::new(100.0, 300.0));
        assert_eq!(a.swipe.unwrap().distance_px, 120.0);
        assert_eq!(a.method, ReplayMethod::Direct);
    }

    #[test]
    fn config_rejects_out_of_range_scales() {
        assert!(MatchConfig::default().validate().is_ok());
        assert!(MatchConfig { scales: vec![0.25], ..MatchConfig::default() }.validate().is_err());
    }
}
