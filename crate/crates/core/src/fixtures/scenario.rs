//! Scripted recordings: a start screen, a list of actions, and the frames,
//! OCR tokens and ground truth they render to.

use serde::{Deserialize, Serialize};

use super::screen::{magnify, render_base, render_screen, scale_tokens, Screen, BASE_H, BASE_W};
use crate::geometry::{Point, Rect, ScreenDims};
use crate::raster::Raster;
use crate::recording::{FrameSequence, OcrToken, Recording};
use crate::segmentation::StableInterval;
use crate::trace::{normalize_point, Clip, Direction, Interaction, InteractionTrace, InteractionType, Swipe, Target};

/// Touch-feedback animation drawn on the old screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cue {
    Ripple,
    Expand,
    ColorChange,
}

pub const CUE_FRAMES: usize = 3;
pub const FADE_FRAMES: usize = 3;
pub const SWIPE_FRAMES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Tap {
        /// Tapped element, base pixels.
        element: Rect,
        point: Point,
        cue: Cue,
        next: Box<Screen>,
        /// True when the new title repeats an element label of the old content area.
        #[serde(default)]
        title_match: bool,
        #[serde(default)]
        tab: bool,
    },
    Type {
        text: String,
        suggestions: Vec<String>,
    },
    Swipe {
        direction: Direction,
        distance: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub initial: Screen,
    pub actions: Vec<Action>,
    pub hold: usize,
    pub fps: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario {name}: {message}")]
    Invalid { name: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtInteraction {
    pub kind: InteractionType,
    pub clip: Clip,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_px: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typed_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swipe: Option<Swipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue: Option<Cue>,
    /// Where a correct replay lands on the pre-action screen, in recording pixels.
    pub replay_bbox: Rect,
    pub title_match: bool,
    pub tab: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub name: String,
    pub screen: ScreenDims,
    pub scale: usize,
    pub stable_intervals: Vec<StableInterval>,
    pub keyframes: Vec<usize>,
    pub interactions: Vec<GtInteraction>,
    pub trace: InteractionTrace,
    /// Screen shown before each interaction, for re-rendering at other scales.
    pub screens: Vec<Screen>,
}

pub struct Rendered {
    pub recording: Recording,
    pub ground_truth: GroundTruth,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Ripple radius at cue step `k` (1-based); strictly increasing in `k`.
pub fn ripple_radius(element: &Rect, k: usize) -> f64 {
    let full = (element.w.max(element.h) * 0.6).max(8.0);
    full * k as f64 / CUE_FRAMES as f64
}

fn draw_cue(base: &Raster, element: &Rect, point: Point, cue: Cue, k: usize) -> Raster {
    let mut r = base.clone();
    let t = k as f64 / CUE_FRAMES as f64;
    let x0 = element.x.max(0.0) as i64;
    let y0 = element.y.max(0.0) as i64;
    let x1 = element.right().min(BASE_W as f64) as i64;
    let y1 = element.bottom().min(BASE_H as f64) as i64;
    match cue {
        Cue::Ripple => {
            let radius = ripple_radius(element, k);
            let alpha = 0.55 * (1.0 - 0.25 * (k - 1) as f64);
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = ((x as f64 + 0.5 - point.x).powi(2) + (y as f64 + 0.5 - point.y).powi(2)).sqrt();
                    if d <= radius {
                        r.blend(x, y, [0.15, 0.15, 0.2], alpha as f32);
                    }
                }
            }
        }
        Cue::Expand => {
            let hw = (element.w / 2.0 + 2.0) * t;
            let hh = (element.h / 2.0 + 2.0) * t;
            for y in y0..y1 {
                for x in x0..x1 {
                    if (x as f64 + 0.5 - point.x).abs() <= hw && (y as f64 + 0.5 - point.y).abs() <= hh {
                        r.blend(x, y, [0.1, 0.5, 0.9], 0.5);
                    }
                }
            }
        }
        Cue::ColorChange => {
            for y in y0..y1 {
                for x in x0..x1 {
                    r.blend(x, y, [0.95, 0.6, 0.1], (0.7 * t) as f32);
                }
            }
        }
    }
    r
}

fn crossfade(a: &Raster, b: &Raster, alpha: f32) -> Raster {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * (1.0 - alpha) + y * alpha).collect();
    Raster::from_data(a.width(), a.height(), data).expect("same size")
}

/// Label of the element a point hits, if it is a plain widget.
fn hit_label(screen: &Screen, element: &Rect) -> Option<String> {
    screen
        .widgets
        .iter()
        .chain(screen.visible_list_items().iter().map(|(w, _)| w))
        .find(|w| w.rect == *element)
        .and_then(|w| w.label.clone())
        .or_else(|| (0..screen.tabs.len()).find(|&i| screen.tab_rect(i) == *element).map(|i| screen.tabs[i].clone()))
}

/// Token the swipe initiation rule picks among labels visible at both ends.
fn initiation_token(start: &[OcrToken], end: &[OcrToken], dir: Direction, d: f64) -> Option<OcrToken> {
    let (ux, uy) = dir.unit();
    let moving: Vec<&OcrToken> = start
        .iter()
        .filter(|s| {
            end.iter().any(|e| {
                e.text == s.text && (e.bbox.x - s.bbox.x - ux * d).abs() < 0.5 && (e.bbox.y - s.bbox.y - uy * d).abs() < 0.5
            })
        })
        .collect();
    let key = |t: &&OcrToken| if dir.is_vertical() { t.bbox.center().y } else { t.bbox.center().x };
    match dir {
        Direction::Up | Direction::Left => moving.into_iter().max_by(|a, b| key(a).total_cmp(&key(b))),
        Direction::Down | Direction::Right => moving.into_iter().min_by(|a, b| key(a).total_cmp(&key(b))),
    }
    .cloned()
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |message: String| Err(ScenarioError::Invalid { name: self.name.clone(), message });
        if self.hold < 4 {
            return fail(format!("hold of {} frames is shorter than 4", self.hold));
        }
        let screen = Rect::new(0.0, 0.0, BASE_W as f64, BASE_H as f64);
        let mut state = self.initial.clone();
        for (i, a) in self.actions.iter().enumerate() {
            match a {
                Action::Tap { element, point, next, .. } => {
                    if !screen.contains(*point) || !element.contains(*point) {
                        return fail(format!("action {i}: tap point outside its element or the screen"));
                    }
                    state = (**next).clone();
                }
                Action::Type { text, .. } => {
                    if state.field.is_none() || !state.keyboard {
                        return fail(format!("action {i}: typing needs a field and an open keyboard"));
                    }
                    if text.is_empty() || !text.chars().all(super::font::supported) {
                        return fail(format!("action {i}: text {text:?} cannot be rendered"));
                    }
                    state = typed_state(&state, text, &[]);
                }
                Action::Swipe { direction, distance } => {
                    let Some(list) = &mut state.list else {
                        return fail(format!("action {i}: swipe needs a scroll list"));
                    };
                    if *distance <= 0 {
                        return fail(format!("action {i}: swipe distance must be positive"));
                    }
                    let (ux, uy) = direction.unit();
                    list.offset.0 += (ux * *distance as f64) as i64;
                    list.offset.1 += (uy * *distance as f64) as i64;
                }
            }
        }
        Ok(())
    }
}

fn typed_state(state: &Screen, text: &str, suggestions: &[String]) -> Screen {
    let mut s = state.clone();
    if let Some(f) = &mut s.field {
        f.text = text.to_string();
    }
    s.pressed = None;
    s.suggestions = suggestions.to_vec();
    s
}

/// Render every frame of `scenario` at integer `scale`.
pub fn render_scenario(scenario: &Scenario, scale: usize) -> Result<Rendered, ScenarioError> {
    scenario.validate()?;
    let mut frames: Vec<Raster> = Vec::new();
    let mut tokens: Vec<Vec<OcrToken>> = Vec::new();
    let mut holds: Vec<StableInterval> = Vec::new();
    let mut screens = Vec::new();
    let mut pending: Vec<(Action, Screen)> = Vec::new();

    let push_hold = |frames: &mut Vec<Raster>, tokens: &mut Vec<Vec<OcrToken>>, holds: &mut Vec<StableInterval>, s: &Screen| {
        let (r, t) = render_base(s);
        let start = frames.len();
        for _ in 0..scenario.hold {
            frames.push(r.clone());
            tokens.push(t.clone());
        }
        holds.push(StableInterval::new(start, frames.len() - 1));
    };

    let mut state = scenario.initial.clone();
    push_hold(&mut frames, &mut tokens, &mut holds, &state);
    for action in &scenario.actions {
        screens.push(state.clone());
        let next = match action {
            Action::Tap { element, point, cue, next, .. } => {
                let (old, old_tokens) = render_base(&state);
                let mut last = old.clone();
                for k in 1..=CUE_FRAMES {
                    last = draw_cue(&old, element, *point, *cue, k);
                    frames.push(last.clone());
                    tokens.push(old_tokens.clone());
                }
                let (new, new_tokens) = render_base(next);
                for k in 1..=FADE_FRAMES {
                    let alpha = k as f32 / (FADE_FRAMES + 1) as f32;
                    frames.push(crossfade(&last, &new, alpha));
                    tokens.push(if alpha < 0.5 { old_tokens.clone() } else { new_tokens.clone() });
                }
                (**next).clone()
            }
            Action::Type { text, suggestions } => {
                let chars: Vec<char> = text.chars().collect();
                for k in 1..=chars.len() {
                    let prefix: String = chars[..k].iter().collect();
                    let mut s = typed_state(&state, &prefix, &[]);
                    s.pressed = Some(chars[k - 1]);
                    let (r, t) = render_base(&s);
                    frames.push(r);
                    tokens.push(t);
                }
                typed_state(&state, text, suggestions)
            }
            Action::Swipe { direction, distance } => {
                let (ux, uy) = direction.unit();
                let origin = state.list.as_ref().expect("validated").offset;
                let mut s = state.clone();
                for k in 1..SWIPE_FRAMES {
                    let step = (*distance as f64 * smoothstep(k as f64 / SWIPE_FRAMES as f64)).round();
                    s.list.as_mut().unwrap().offset = (origin.0 + (ux * step) as i64, origin.1 + (uy * step) as i64);
                    let (r, t) = render_base(&s);
                    frames.push(r);
                    tokens.push(t);
                }
                s.list.as_mut().unwrap().offset =
                    (origin.0 + (ux * *distance as f64) as i64, origin.1 + (uy * *distance as f64) as i64);
                s
            }
        };
        pending.push((action.clone(), state.clone()));
        state = next;
        push_hold(&mut frames, &mut tokens, &mut holds, &state);
    }

    let keyframes: Vec<usize> = holds.iter().map(|h| h.keyframe).collect();
    let s = scale as f64;
    let dims = ScreenDims::new((BASE_W * scale) as u32, (BASE_H * scale) as u32);
    let mut gts = Vec::new();
    let mut trace = InteractionTrace::new(dims, scenario.name.clone());
    for (i, (action, before)) in pending.iter().enumerate() {
        let clip = Clip::new(keyframes[i], keyframes[i + 1]);
        let (gt, interaction) = match action {
            Action::Tap { element, point, cue, title_match, tab, .. } => {
                let p = Point::new(point.x * s, point.y * s);
                let label = hit_label(before, element);
                let bbox = element.scaled(s, s);
                let mut it = Interaction::tap(clip, normalize_point(p, dims).expect("validated tap point"));
                it.target = Some(Target { bbox, text: label.clone(), crop: None });
                let gt = GtInteraction {
                    kind: InteractionType::Tap,
                    clip,
                    point_px: Some(p),
                    element: Some(bbox),
                    label,
                    typed_text: None,
                    swipe: None,
                    cue: Some(*cue),
                    replay_bbox: bbox,
                    title_match: *title_match,
                    tab: *tab,
                };
                (gt, it)
            }
            Action::Type { text, .. } => {
                let field = before.field.as_ref().expect("validated").rect.scaled(s, s);
                let it = Interaction {
                    kind: InteractionType::Type,
                    clip,
                    point: None,
                    swipe: None,
                    typed_text: Some(text.clone()),
                    target: Some(Target { bbox: field, text: None, crop: None }),
                };
                let gt = GtInteraction {
                    kind: InteractionType::Type,
                    clip,
                    point_px: None,
                    element: Some(field),
                    label: None,
                    typed_text: Some(text.clone()),
                    swipe: None,
                    cue: None,
                    replay_bbox: field,
                    title_match: false,
                    tab: false,
                };
                (gt, it)
            }
            Action::Swipe { direction, distance } => {
                let d = *distance as f64 * s;
                let start = scale_tokens(&tokens[clip.start], scale);
                let end = scale_tokens(&tokens[clip.end], scale);
                let init = initiation_token(&start, &end, *direction, d).ok_or_else(|| ScenarioError::Invalid {
                    name: scenario.name.clone(),
                    message: format!("swipe {i}: no label stays visible"),
                })?;
                let swipe = Swipe { direction: *direction, distance_px: d };
                let viewport = before.list.as_ref().expect("validated").viewport.scaled(s, s);
                let it = Interaction {
                    kind: direction.interaction(),
                    clip,
                    point: Some(normalize_point(init.bbox.center(), dims).expect("token inside screen")),
                    swipe: Some(swipe.clone()),
                    typed_text: None,
                    target: None,
                };
                let gt = GtInteraction {
                    kind: direction.interaction(),
                    clip,
                    point_px: Some(init.bbox.center()),
                    element: Some(init.bbox),
                    label: Some(init.text.clone()),
                    typed_text: None,
                    swipe: Some(swipe),
                    cue: None,
                    replay_bbox: viewport,
                    title_match: false,
                    tab: false,
                };
                (gt, it)
            }
        };
        gts.push(gt);
        trace.interactions.push(interaction);
    }
    trace.validate().map_err(|e| ScenarioError::Invalid { name: scenario.name.clone(), message: e.to_string() })?;

    let rasters: Vec<Raster> = frames.iter().map(|f| magnify(f, scale)).collect();
    let frames = FrameSequence::new(dims, scenario.fps, rasters).expect("rendered frames are consistent");
    let tokens = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| scale_tokens(t, scale).into_iter().map(|tok| OcrToken { frame_index: i, ..tok }).collect())
        .collect();
    let stable_intervals = holds;
    Ok(Rendered {
        recording: Recording { frames, tokens },
        ground_truth: GroundTruth {
            name: scenario.name.clone(),
            screen: dims,
            scale,
            stable_intervals,
            keyframes,
            interactions: gts,
            trace,
            screens,
        },
    })
}

/// Screenshot of the screen preceding interaction `i`, at another scale.
pub fn replay_screen(gt: &GroundTruth, i: usize, scale: usize) -> (Raster, Vec<OcrToken>) {
    render_screen(&gt.screens[i], scale)
}
