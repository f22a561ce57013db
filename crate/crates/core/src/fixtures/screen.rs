//! Declarative synthetic screens and their rasterization.
//!
//! Screens are laid out on a 128×256 base grid; rendering at scale `s`
//! multiplies every coordinate by `s` with nearest-neighbour magnification,
//! so OCR boxes scale exactly.

use serde::{Deserialize, Serialize};

use super::font::{draw_text, text_extent, GLYPH_H};
use crate::classification::QWERTY_ROWS;
use crate::geometry::{Rect, ScreenDims};
use crate::raster::{Raster, Rgb};
use crate::recording::OcrToken;

pub const BASE_W: usize = 128;
pub const BASE_H: usize = 256;
pub const TITLE_H: f64 = 28.0;
pub const TAB_Y: f64 = 232.0;
pub const KEYBOARD_Y: f64 = 164.0;

pub const BACKGROUND: Rgb = [0.96, 0.96, 0.96];
pub const INK: Rgb = [0.1, 0.1, 0.15];
pub const WHITE: Rgb = [1.0, 1.0, 1.0];

pub fn base_dims() -> ScreenDims {
    ScreenDims::new(BASE_W as u32, BASE_H as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IconShape {
    Plus,
    Dot,
    Bars,
    Cross,
    Ring,
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Widget {
    pub rect: Rect,
    pub fill: Rgb,
    pub ink: Rgb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon: Option<IconShape>,
}

impl Widget {
    pub fn labeled(rect: Rect, fill: Rgb, label: impl Into<String>) -> Self {
        let ink = if luminance(fill) < 0.5 { WHITE } else { INK };
        Self { rect, fill, ink, label: Some(label.into()), icon: None }
    }

    pub fn icon(rect: Rect, fill: Rgb, shape: IconShape) -> Self {
        Self { rect, fill, ink: WHITE, label: None, icon: Some(shape) }
    }

    /// Layout box of the label, if any.
    pub fn label_box(&self) -> Option<Rect> {
        let label = self.label.as_ref()?;
        let (w, h) = text_extent(label, 1);
        let x = (self.rect.x + 4.0).floor();
        let y = (self.rect.y + (self.rect.h - h as f64) / 2.0).floor();
        Some(Rect::new(x, y, w as f64, h as f64))
    }
}

fn luminance(c: Rgb) -> f32 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

/// Scrollable content: items positioned in content coordinates, shown
/// translated by `offset` and clipped to `viewport`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrollList {
    pub viewport: Rect,
    pub items: Vec<Widget>,
    pub offset: (i64, i64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextField {
    pub rect: Rect,
    pub text: String,
    pub placeholder: String,
}

impl TextField {
    pub fn text_box(&self) -> Option<Rect> {
        let shown = if self.text.is_empty() { &self.placeholder } else { &self.text };
        if shown.is_empty() {
            return None;
        }
        let (w, h) = text_extent(shown, 1);
        Some(Rect::new(self.rect.x + 4.0, (self.rect.y + (self.rect.h - h as f64) / 2.0).floor(), w as f64, h as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub title: String,
    pub title_fill: Rgb,
    pub widgets: Vec<Widget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list: Option<ScrollList>,
    pub tabs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<TextField>,
    pub keyboard: bool,
    /// Key highlighted by the current keystroke.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressed: Option<char>,
    pub suggestions: Vec<String>,
}

impl Screen {
    pub fn new(title: impl Into<String>, title_fill: Rgb) -> Self {
        Self {
            title: title.into(),
            title_fill,
            widgets: Vec::new(),
            list: None,
            tabs: Vec::new(),
            field: None,
            keyboard: false,
            pressed: None,
            suggestions: Vec::new(),
        }
    }

    pub fn tab_rect(&self, i: usize) -> Rect {
        let w = BASE_W as f64 / self.tabs.len().max(1) as f64;
        Rect::new((i as f64 * w).floor(), TAB_Y, w.floor(), BASE_H as f64 - TAB_Y)
    }

    pub fn tab_label_box(&self, i: usize) -> Rect {
        let r = self.tab_rect(i);
        let (w, h) = text_extent(&self.tabs[i], 1);
        Rect::new((r.x + (r.w - w as f64) / 2.0).floor(), (r.y + (r.h - h as f64) / 2.0).floor(), w as f64, h as f64)
    }

    pub fn title_box(&self) -> Rect {
        let (w, h) = text_extent(&self.title, 1);
        Rect::new(6.0, ((TITLE_H - h as f64) / 2.0).floor(), w as f64, h as f64)
    }

    pub fn suggestion_rect(&self, i: usize) -> Rect {
        let top = self.field.as_ref().map_or(TITLE_H + 4.0, |f| f.rect.bottom() + 4.0);
        Rect::new(4.0, top + 20.0 * i as f64, BASE_W as f64 - 8.0, 18.0)
    }

    /// Items of the scroll list as currently shown, with their visible rects.
    pub fn visible_list_items(&self) -> Vec<(Widget, Rect)> {
        let Some(list) = &self.list else { return Vec::new() };
        list.items
            .iter()
            .map(|w| (w, w.rect.translated(list.offset.0 as f64, list.offset.1 as f64)))
            .filter(|(_, r)| r.intersects(&list.viewport))
            .map(|(w, r)| (Widget { rect: r, ..w.clone() }, r.clipped(&list.viewport)))
            .collect()
    }
}

/// Key rects of the on-screen keyboard, row-major, plus the space bar.
pub fn keyboard_keys() -> Vec<(char, Rect)> {
    let mut keys = Vec::new();
    for (r, row) in QWERTY_ROWS.iter().enumerate() {
        let n = row.len() as f64;
        let pitch = 12.6;
        let left = ((BASE_W as f64 - n * pitch) / 2.0).floor();
        for (i, c) in row.chars().enumerate() {
            keys.push((c, Rect::new((left + i as f64 * pitch).floor() + 1.0, KEYBOARD_Y + 6.0 + 21.0 * r as f64, 11.0, 17.0)));
        }
    }
    keys.push((' ', Rect::new(34.0, KEYBOARD_Y + 69.0, 60.0, 17.0)));
    keys
}

pub fn keyboard_rect() -> Rect {
    Rect::new(0.0, KEYBOARD_Y, BASE_W as f64, BASE_H as f64 - KEYBOARD_Y)
}

fn fill_rect(r: &mut Raster, rect: &Rect, c: Rgb) {
    let x0 = rect.x.max(0.0).floor() as i64;
    let y0 = rect.y.max(0.0).floor() as i64;
    let x1 = rect.right().min(r.width() as f64).ceil() as i64;
    let y1 = rect.bottom().min(r.height() as f64).ceil() as i64;
    for y in y0..y1 {
        for x in x0..x1 {
            r.blend(x, y, c, 1.0);
        }
    }
}

fn draw_icon(r: &mut Raster, rect: &Rect, shape: IconShape, ink: Rgb, clip: &Rect) {
    let c = rect.center();
    let s = rect.w.min(rect.h) * 0.3;
    for y in rect.y as i64..rect.bottom() as i64 {
        for x in rect.x as i64..rect.right() as i64 {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            if !clip.contains(crate::geometry::Point::new(px, py)) {
                continue;
            }
            let (dx, dy) = (px - c.x, py - c.y);
            let on = match shape {
                IconShape::Plus => (dx.abs() < s * 0.3 && dy.abs() < s) || (dy.abs() < s * 0.3 && dx.abs() < s),
                IconShape::Dot => dx * dx + dy * dy < s * s,
                IconShape::Bars => dx.abs() < s && ((dy / (s * 0.5)).round() as i64).rem_euclid(2) == 0 && dy.abs() < s,
                IconShape::Cross => ((dx - dy).abs() < s * 0.35 || (dx + dy).abs() < s * 0.35) && dx.abs() < s,
                IconShape::Ring => {
                    let d = (dx * dx + dy * dy).sqrt();
                    d < s && d > s * 0.55
                }
                IconShape::Triangle => dy < s && dy > -s && dx.abs() < (s - dy) * 0.5,
            };
            if on {
                r.blend(x, y, ink, 1.0);
            }
        }
    }
}

fn draw_widget(r: &mut Raster, w: &Widget, clip: &Rect, tokens: &mut Vec<OcrToken>) {
    fill_rect(r, &w.rect.clipped(clip), w.fill);
    if let Some(shape) = w.icon {
        draw_icon(r, &w.rect, shape, w.ink, clip);
    }
    if let (Some(label), Some(b)) = (&w.label, w.label_box()) {
        draw_text(r, label, b.x as i64, b.y as i64, 1, w.ink, clip);
        if clip.contains_rect(&b) {
            tokens.push(OcrToken::new(label.clone(), b, 0));
        }
    }
}

/// Rasterize `screen` at base resolution together with its OCR tokens.
pub fn render_base(screen: &Screen) -> (Raster, Vec<OcrToken>) {
    let mut r = Raster::filled(BASE_W, BASE_H, BACKGROUND);
    let mut tokens = Vec::new();
    let full = Rect::new(0.0, 0.0, BASE_W as f64, BASE_H as f64);

    fill_rect(&mut r, &Rect::new(0.0, 0.0, BASE_W as f64, TITLE_H), screen.title_fill);
    if !screen.title.is_empty() {
        let b = screen.title_box();
        draw_text(&mut r, &screen.title, b.x as i64, b.y as i64, 1, WHITE, &full);
        tokens.push(OcrToken::new(screen.title.clone(), b, 0));
    }

    if let Some(list) = &screen.list {
        for (w, _) in screen.visible_list_items() {
            draw_widget(&mut r, &w, &list.viewport, &mut tokens);
        }
    }
    for w in &screen.widgets {
        draw_widget(&mut r, w, &full, &mut tokens);
    }

    if let Some(f) = &screen.field {
        fill_rect(&mut r, &f.rect, [0.85, 0.86, 0.9]);
        fill_rect(&mut r, &f.rect.inflated(-1.0), WHITE);
        if let Some(b) = f.text_box() {
            let (text, ink) = if f.text.is_empty() { (&f.placeholder, [0.55, 0.55, 0.6]) } else { (&f.text, INK) };
            draw_text(&mut r, text, b.x as i64, b.y as i64, 1, ink, &f.rect);
            tokens.push(OcrToken::new(text.clone(), b, 0));
        }
    }
    for (i, s) in screen.suggestions.iter().enumerate() {
        let w = Widget::labeled(screen.suggestion_rect(i), [0.9, 0.92, 0.96], s.clone());
        draw_widget(&mut r, &w, &full, &mut tokens);
    }

    if screen.keyboard {
        fill_rect(&mut r, &keyboard_rect(), [0.8, 0.82, 0.86]);
        for (c, rect) in keyboard_keys() {
            let pressed = screen.pressed.map(|p| p.to_ascii_lowercase()) == Some(c)
                || (c == ' ' && screen.pressed.is_some_and(|p| !p.is_ascii_alphabetic()));
            fill_rect(&mut r, &rect, if pressed { [0.25, 0.35, 0.7] } else { WHITE });
            if c != ' ' {
                let label = c.to_string();
                let (w, h) = text_extent(&label, 1);
                let b = Rect::new(rect.x + ((rect.w - w as f64) / 2.0).floor(), rect.y + ((rect.h - h as f64) / 2.0).floor(), w as f64, h as f64);
                draw_text(&mut r, &label, b.x as i64, b.y as i64, 1, if pressed { WHITE } else { INK }, &full);
                tokens.push(OcrToken::new(label, b, 0));
            }
        }
        if let Some(p) = screen.pressed {
            // magnified key preview above the pressed key
            let anchor = keyboard_keys()
                .into_iter()
                .find(|(c, _)| *c == p.to_ascii_lowercase())
                .map_or(Rect::new(54.0, KEYBOARD_Y + 69.0, 20.0, 17.0), |(_, r)| r);
            let (w, h) = text_extent(&p.to_string(), 3);
            let bubble = Rect::new((anchor.center().x - w as f64 / 2.0 - 4.0).floor(), anchor.y - h as f64 - 12.0, w as f64 + 8.0, h as f64 + 8.0);
            let bubble = bubble.translated((-bubble.x).max(0.0) - (bubble.right() - BASE_W as f64).max(0.0), 0.0);
            fill_rect(&mut r, &bubble, [0.25, 0.35, 0.7]);
            draw_text(&mut r, &p.to_string(), bubble.x as i64 + 4, bubble.y as i64 + 4, 3, WHITE, &full);
        }
    } else if !screen.tabs.is_empty() {
        fill_rect(&mut r, &Rect::new(0.0, TAB_Y, BASE_W as f64, BASE_H as f64 - TAB_Y), [0.88, 0.89, 0.92]);
        fill_rect(&mut r, &Rect::new(0.0, TAB_Y, BASE_W as f64, 1.0), [0.7, 0.7, 0.75]);
        for i in 0..screen.tabs.len() {
            let b = screen.tab_label_box(i);
            draw_text(&mut r, &screen.tabs[i], b.x as i64, b.y as i64, 1, INK, &full);
            tokens.push(OcrToken::new(screen.tabs[i].clone(), b, 0));
        }
    }
    debug_assert!(tokens.iter().all(|t| t.bbox.h == GLYPH_H as f64));
    (r, tokens)
}

/// Nearest-neighbour magnification by an integer factor.
pub fn magnify(r: &Raster, scale: usize) -> Raster {
    if scale == 1 {
        return r.clone();
    }
    let (w, h) = (r.width() * scale, r.height() * scale);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            data.extend_from_slice(&r.get(x / scale, y / scale));
        }
    }
    Raster::from_data(w, h, data).expect("sized buffer")
}

pub fn scale_tokens(tokens: &[OcrToken], scale: usize) -> Vec<OcrToken> {
    let s = scale as f64;
    tokens.iter().map(|t| OcrToken { bbox: t.bbox.scaled(s, s), ..t.clone() }).collect()
}

pub fn render_screen(screen: &Screen, scale: usize) -> (Raster, Vec<OcrToken>) {
    let (r, t) = render_base(screen);
    (magnify(&r, scale), scale_tokens(&t, scale))
}
