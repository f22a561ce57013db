//! Interaction type from OCR token evidence.
//!
//! Decision order: a keyboard on both clip endpoints plus new text outside it
//! is [`InteractionType::Type`]; at least `N` tokens translating together is a
//! swipe; everything else is a [`InteractionType::Tap`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Rect, ScreenDims};
use crate::recording::OcrToken;
use crate::trace::{normalize_point, Clip, Direction, Interaction, InteractionType, Swipe};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub min_comoving_texts: usize,
    pub drift_px: f64,
    pub drift_fraction: f64,
    pub keyboard_row_fraction: f64,
    pub top_bar_fraction: f64,
    pub bottom_bar_fraction: f64,
    /// Smallest translation (px) that counts as movement.
    pub min_movement_px: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            min_comoving_texts: 3,
            drift_px: 20.0,
            drift_fraction: 0.15,
            keyboard_row_fraction: 0.7,
            top_bar_fraction: 0.12,
            bottom_bar_fraction: 0.10,
            min_movement_px: 1.0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_comoving_texts < 2 {
            return Err(format!("min_comoving_texts {} must be >= 2", self.min_comoving_texts));
        }
        if !(0.0..=1.0).contains(&self.keyboard_row_fraction) {
            return Err("keyboard_row_fraction must lie in [0, 1]".into());
        }
        if !(0.0..0.5).contains(&self.top_bar_fraction) || !(0.0..0.5).contains(&self.bottom_bar_fraction) {
            return Err("bar fractions must lie in [0, 0.5)".into());
        }
        Ok(())
    }
}

pub const QWERTY_ROWS: [&str; 3] = ["qwertyuiop", "asdfghjkl", "zxcvbnm"];
pub const NUMPAD_ROWS: [&str; 4] = ["123", "456", "789", "0"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyboardLayout {
    Qwerty,
    NumberPad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyboardRegion {
    pub bbox: Rect,
    pub layout: KeyboardLayout,
    pub matched_rows: usize,
}

/// Horizontal rows of tokens in the bottom half, top to bottom.
fn token_rows<'a>(tokens: &'a [OcrToken], dims: ScreenDims) -> Vec<Vec<&'a OcrToken>> {
    let half = dims.height as f64 / 2.0;
    let mut lower: Vec<&OcrToken> = tokens.iter().filter(|t| t.bbox.center().y >= half).collect();
    lower.sort_by(|a, b| {
        let (ca, cb) = (a.bbox.center(), b.bbox.center());
        ca.y.total_cmp(&cb.y).then(ca.x.total_cmp(&cb.x)).then(a.text.cmp(&b.text))
    });
    let mut rows: Vec<Vec<&OcrToken>> = Vec::new();
    for t in lower {
        let cy = t.bbox.center().y;
        let fits = rows.last().is_some_and(|row| {
            let mean = row.iter().map(|r| r.bbox.center().y).sum::<f64>() / row.len() as f64;
            let h = row.iter().map(|r| r.bbox.h).fold(t.bbox.h, f64::max);
            (cy - mean).abs() <= h / 2.0
        });
        if fits {
            rows.last_mut().unwrap().push(t);
        } else {
            rows.push(vec![t]);
        }
    }
    rows
}

/// Fraction of `pattern` characters covered by row tokens that are substrings of it.
fn row_coverage<'a>(row: &[&'a OcrToken], pattern: &str) -> (f64, Vec<&'a OcrToken>) {
    let mut covered = vec![false; pattern.len()];
    let mut used = Vec::new();
    for t in row {
        let text = t.text.trim().to_lowercase();
        if text.is_empty() {
            continue;
        }
        if let Some(pos) = pattern.find(&text) {
            covered[pos..pos + text.len()].iter_mut().for_each(|c| *c = true);
            used.push(*t);
        }
    }
    (covered.iter().filter(|&&c| c).count() as f64 / pattern.len() as f64, used)
}

pub fn detect_keyboard(tokens: &[OcrToken], dims: ScreenDims, cfg: &ClassifierConfig) -> Option<KeyboardRegion> {
    let rows = token_rows(tokens, dims);
    let layouts: [(KeyboardLayout, &[&str], usize); 2] =
        [(KeyboardLayout::Qwerty, &QWERTY_ROWS, 2), (KeyboardLayout::NumberPad, &NUMPAD_ROWS, 3)];
    for (layout, patterns, needed) in layouts {
        let mut bbox: Option<Rect> = None;
        let mut matched = 0;
        for pattern in patterns {
            let best = rows
                .iter()
                .map(|row| row_coverage(row, pattern))
                .filter(|(cov, _)| *cov >= cfg.keyboard_row_fraction)
                .max_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((_, used)) = best {
                matched += 1;
                for t in used {
                    bbox = Some(bbox.map_or(t.bbox, |b| b.union(&t.bbox)));
                }
            }
        }
        if matched >= needed {
            return Some(KeyboardRegion { bbox: bbox.expect("matched rows have tokens"), layout, matched_rows: matched });
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenMatch {
    pub prev: OcrToken,
    pub next: OcrToken,
    pub movement: (f64, f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenMatching {
    pub matches: Vec<TokenMatch>,
    pub added: Vec<OcrToken>,
    pub removed: Vec<OcrToken>,
}

/// Greedy pairing on equal trimmed text, closest centers first.
pub fn match_tokens(prev: &[OcrToken], next: &[OcrToken]) -> TokenMatching {
    let mut by_text: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, t) in prev.iter().enumerate() {
        by_text.entry(t.text.trim()).or_default().0.push(i);
    }
    for (j, t) in next.iter().enumerate() {
        by_text.entry(t.text.trim()).or_default().1.push(j);
    }
    let mut prev_used = vec![false; prev.len()];
    let mut next_used = vec![false; next.len()];
    let mut pairs = Vec::new();
    for (is, js) in by_text.values() {
        let mut cands: Vec<(f64, usize, usize)> = is
            .iter()
            .flat_map(|&i| js.iter().map(move |&j| (i, j)))
            .map(|(i, j)| (prev[i].bbox.center().distance(next[j].bbox.center()), i, j))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, i, j) in cands {
            if !prev_used[i] && !next_used[j] {
                prev_used[i] = true;
                next_used[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    let matches = pairs
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (prev[i].bbox.center(), next[j].bbox.center());
            TokenMatch { prev: prev[i].clone(), next: next[j].clone(), movement: (b.x - a.x, b.y - a.y) }
        })
        .collect();
    TokenMatching {
        matches,
        added: next.iter().zip(&next_used).filter(|(_, &u)| !u).map(|(t, _)| t.clone()).collect(),
        removed: prev.iter().zip(&prev_used).filter(|(_, &u)| !u).map(|(t, _)| t.clone()).collect(),
    }
}

fn consistent(m: (f64, f64), dir: Direction, cfg: &ClassifierConfig) -> bool {
    let (ux, uy) = dir.unit();
    let along = m.0 * ux + m.1 * uy;
    let across = if dir.is_vertical() { m.0 } else { m.1 };
    along >= cfg.min_movement_px && across.abs() <= cfg.drift_px.max(cfg.drift_fraction * along)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwipeParams {
    pub direction: Direction,
    /// Median movement magnitude of the co-moving tokens.
    pub distance_px: f64,
    /// Start-frame center of the initiating token, in pixels.
    pub initiation: Point,
    pub comoving: usize,
}

/// Dominant co-moving direction and its consistent matches, if any tokens moved.
fn dominant_direction<'a>(matches: &'a [TokenMatch], cfg: &ClassifierConfig) -> Option<(Direction, Vec<&'a TokenMatch>)> {
    [Direction::Up, Direction::Down, Direction::Left, Direction::Right]
        .into_iter()
        .map(|d| (d, matches.iter().filter(|m| consistent(m.movement, d, cfg)).collect::<Vec<_>>()))
        .filter(|(_, ms)| !ms.is_empty())
        // first direction wins ties
        .fold(None, |best: Option<(Direction, Vec<&TokenMatch>)>, cur| match best {
            Some(b) if b.1.len() >= cur.1.len() => Some(b),
            _ => Some(cur),
        })
}

pub fn swipe_params(matches: &[TokenMatch], cfg: &ClassifierConfig) -> Option<SwipeParams> {
    let (direction, moving) = dominant_direction(matches, cfg)?;
    if moving.len() < cfg.min_comoving_texts {
        return None;
    }
    let mut mags: Vec<f64> = moving.iter().map(|m| m.movement.0.hypot(m.movement.1)).collect();
    let centers = moving.iter().map(|m| m.prev.bbox.center());
    let key = |p: &Point| if direction.is_vertical() { p.y } else { p.x };
    let initiation = match direction {
        Direction::Up | Direction::Left => centers.max_by(|a, b| key(a).total_cmp(&key(b))),
        Direction::Down | Direction::Right => centers.min_by(|a, b| key(a).total_cmp(&key(b))),
    }
    .expect("at least N matches");
    Some(SwipeParams { direction, distance_px: median(&mut mags), initiation, comoving: moving.len() })
}

/// Sum of per-pair median movements along `direction` over consecutive frames.
pub fn swipe_distance(frames: &[&[OcrToken]], direction: Direction, cfg: &ClassifierConfig) -> f64 {
    frames
        .windows(2)
        .map(|w| {
            let m = match_tokens(w[0], w[1]);
            let mut mags: Vec<f64> = m
                .matches
                .iter()
                .filter(|t| consistent(t.movement, direction, cfg))
                .map(|t| t.movement.0.hypot(t.movement.1))
                .collect();
            median(&mut mags)
        })
        .sum()
}

/// Topmost token added or changed outside the keyboard, or `""`.
pub fn extract_typed_text(first: &[OcrToken], last: &[OcrToken], kb: &KeyboardRegion) -> String {
    typed_candidates(first, last, kb)
        .into_iter()
        .min_by(|a, b| a.bbox.y.total_cmp(&b.bbox.y).then(a.bbox.x.total_cmp(&b.bbox.x)))
        .map(|t| t.text.trim().to_string())
        .unwrap_or_default()
}

/// Tokens added between `first` and `last` outside the keyboard.
pub fn typed_candidates(first: &[OcrToken], last: &[OcrToken], kb: &KeyboardRegion) -> Vec<OcrToken> {
    match_tokens(first, last)
        .added
        .into_iter()
        .filter(|t| !kb.bbox.contains(t.bbox.center()))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub keyboard_start: Option<KeyboardRegion>,
    pub keyboard_end: Option<KeyboardRegion>,
    pub changed_outside_keyboard: usize,
    pub comoving: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    pub matched_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub interaction: Interaction,
    /// Swipe initiation in pixels of the recording.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initiation_px: Option<Point>,
    pub evidence: Evidence,
}

/// `tokens[i]` holds the OCR tokens of frame `i`. Tap points are left empty.
pub fn classify_interaction(
    clip: Clip,
    tokens: &[Vec<OcrToken>],
    dims: ScreenDims,
    cfg: &ClassifierConfig,
) -> Classification {
    let empty: Vec<OcrToken> = Vec::new();
    let at = |i: usize| tokens.get(i).unwrap_or(&empty).as_slice();
    let (first, last) = (at(clip.start), at(clip.end));
    let mut evidence = Evidence {
        keyboard_start: detect_keyboard(first, dims, cfg),
        keyboard_end: detect_keyboard(last, dims, cfg),
        ..Evidence::default()
    };
    let base = Interaction { kind: InteractionType::Tap, clip, point: None, swipe: None, typed_text: None, target: None };

    if let (Some(_), Some(kb)) = (&evidence.keyboard_start, &evidence.keyboard_end) {
        let changed = typed_candidates(first, last, kb);
        evidence.changed_outside_keyboard = changed.len();
        if !changed.is_empty() {
            let text = extract_typed_text(first, last, kb);
            return Classification {
                interaction: Interaction { kind: InteractionType::Type, typed_text: Some(text), ..base },
                initiation_px: None,
                evidence,
            };
        }
    }

    let matching = match_tokens(first, last);
    evidence.matched_tokens = matching.matches.len();
    if let Some((dir, moving)) = dominant_direction(&matching.matches, cfg) {
        evidence.comoving = moving.len();
        evidence.direction = Some(dir);
    }
    if let Some(sp) = swipe_params(&matching.matches, cfg) {
        let frames: Vec<&[OcrToken]> = clip.frames().map(at).collect();
        let mut distance = swipe_distance(&frames, sp.direction, cfg);
        if distance <= 0.0 {
            distance = sp.distance_px;
        }
        let point = normalize_point(clamp_to(sp.initiation, dims), dims).ok();
        return Classification {
            interaction: Interaction {
                kind: sp.direction.interaction(),
                point,
                swipe: Some(Swipe { direction: sp.direction, distance_px: distance }),
                ..base
            },
            initiation_px: Some(sp.initiation),
            evidence,
        };
    }
    Classification { interaction: base, initiation_px: None, evidence }
}

fn clamp_to(p: Point, dims: ScreenDims) -> Point {
    Point::new(p.x.clamp(0.0, dims.width as f64), p.y.clamp(0.0, dims.height as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIMS: ScreenDims = ScreenDims { width: 400, height: 800 };

    fn tok(text: &str, x: f64, y: f64) -> OcrToken {
        OcrToken::new(text, Rect::new(x, y, 20.0, 16.0), 0)
    }

    fn qwerty(y0: f64) -> Vec<OcrToken> {
        QWERTY_ROWS
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.chars().enumerate().map(move |(i, c)| tok(&c.to_string(), 10.0 + 36.0 * i as f64, y0 + 50.0 * r as f64))
            })
            .collect()
    }

    #[test]
    fn full_qwerty_is_detected() {
        let kb = detect_keyboard(&qwerty(600.0), DIMS, &ClassifierConfig::default()).unwrap();
        assert_eq!(kb.layout, KeyboardLayout::Qwerty);
        assert_eq!(kb.matched_rows, 3);
        assert!(kb.bbox.y >= 400.0);
    }

    #[test]
    fn uppercase_and_merged_keys_count() {
        let mut toks: Vec<OcrToken> = "QWERTYUIOP".chars().enumerate().map(|(i, c)| tok(&c.to_string(), 36.0 * i as f64, 600.0)).collect();
        toks.push(tok("asdf", 0.0, 650.0));
        toks.push(tok("ghjkl", 150.0, 650.0));
        let kb = detect_keyboard(&toks, DIMS, &ClassifierConfig::default()).unwrap();
        assert_eq!(kb.matched_rows, 2);
    }

    #[test]
    fn keyboard_in_top_half_is_ignored() {
        assert!(detect_keyboard(&qwerty(50.0), DIMS, &ClassifierConfig::default()).is_none());
    }

    #[test]
    fn digit_grid_is_a_number_pad() {
        let mut toks = Vec::new();
        for (r, row) in NUMPAD_ROWS.iter().enumerate() {
            for (i, c) in row.chars().enumerate() {
                toks.push(tok(&c.to_string(), 60.0 + 100.0 * i as f64, 500.0 + 60.0 * r as f64));
            }
        }
        let kb = detect_keyboard(&toks, DIMS, &ClassifierConfig::default()).unwrap();
        assert_eq!(kb.layout, KeyboardLayout::NumberPad);
        assert_eq!(kb.matched_rows, 4);
    }

    #[test]
    fn sentences_are_not_a_keyboard() {
        let toks = vec![tok("Hello world", 10.0, 500.0), tok("Another line", 10.0, 560.0), tok("qwe rty", 10.0, 620.0)];
        assert!(detect_keyboard(&toks, DIMS, &ClassifierConfig::default()).is_none());
    }

    #[test]
    fn identical_and_shifted_sets() {
        let a = vec![tok("A", 0.0, 100.0), tok("B", 50.0, 200.0), tok("C", 90.0, 300.0)];
        let m = match_tokens(&a, &a);
        assert_eq!(m.matches.len(), 3);
        assert!(m.matches.iter().all(|t| t.movement == (0.0, 0.0)));
        let b: Vec<OcrToken> = a.iter().map(|t| OcrToken::new(&t.text, t.bbox.translated(0.0, -50.0), 1)).collect();
        let m = match_tokens(&a, &b);
        assert!(m.matches.iter().all(|t| t.movement == (0.0, -50.0)));
        assert!(m.added.is_empty() && m.removed.is_empty());
    }

    #[test]
    fn duplicate_texts_pair_by_minimal_total_distance() {
        let prev = vec![tok("Item", 10.0, 100.0), tok("Item", 10.0, 300.0)];
        let next = vec![tok("Item", 10.0, 310.0), tok("Item", 10.0, 100.0)];
        let m = match_tokens(&prev, &next);
        let total: f64 = m.matches.iter().map(|t| t.movement.0.hypot(t.movement.1)).sum();
        // brute force over both pairings
        let cost = |p: [usize; 2]| -> f64 {
            (0..2).map(|i| prev[i].bbox.center().distance(next[p[i]].bbox.center())).sum()
        };
        let best = cost([0, 1]).min(cost([1, 0]));
        assert!((total - best).abs() < 1e-9);
    }

    fn moves(n_moving: usize, n_static: usize, d: (f64, f64)) -> Vec<TokenMatch> {
        let mut out = Vec::new();
        for i in 0..n_moving + n_static {
            let prev = tok(&format!("t{i}"), 20.0 + 30.0 * i as f64, 100.0 + 40.0 * i as f64);
            let delta = if i < n_moving { d } else { (0.0, 0.0) };
            let next = OcrToken::new(prev.text.clone(), prev.bbox.translated(delta.0, delta.1), 1);
            out.push(TokenMatch { prev, next, movement: delta });
        }
        out
    }

    #[test]
    fn unanimous_upward_movement() {
        let sp = swipe_params(&moves(4, 0, (0.0, -200.0)), &ClassifierConfig::default()).unwrap();
        assert_eq!(sp.direction, Direction::Up);
        assert_eq!(sp.distance_px, 200.0);
        // last by y
        assert_eq!(sp.initiation.y, 100.0 + 40.0 * 3.0 + 8.0);
    }

    #[test]
    fn snackbar_pair_is_not_a_swipe() {
        assert!(swipe_params(&moves(2, 5, (0.0, -100.0)), &ClassifierConfig::default()).is_none());
    }

    #[test]
    fn summed_medians() {
        // three frame pairs with medians 100, 120, 80
        let mk = |dys: [f64; 3]| -> Vec<OcrToken> {
            dys.iter().enumerate().map(|(i, &y)| tok(&format!("r{i}"), 50.0, 500.0 + y + 60.0 * i as f64)).collect()
        };
        let f0 = mk([0.0, 0.0, 0.0]);
        let f1 = mk([-90.0, -100.0, -130.0]);
        let f2 = mk([-210.0, -220.0, -250.0]);
        let f3 = mk([-300.0, -300.0, -300.0]);
        let frames: Vec<&[OcrToken]> = vec![&f0, &f1, &f2, &f3];
        let total = swipe_distance(&frames, Direction::Up, &ClassifierConfig::default());
        assert!((total - 300.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn typed_text_is_topmost_addition_outside_keyboard() {
        let kb = KeyboardRegion { bbox: Rect::new(0.0, 500.0, 400.0, 300.0), layout: KeyboardLayout::Qwerty, matched_rows: 3 };
        let first = vec![tok("Search", 10.0, 60.0), tok("q", 10.0, 600.0)];
        let last = vec![
            tok("Hamish & Andy", 10.0, 60.0),
            tok("Hamish & Andy podcast", 10.0, 120.0),
            tok("q", 10.0, 600.0),
            tok("w", 40.0, 600.0),
        ];
        assert_eq!(extract_typed_text(&first, &last, &kb), "Hamish & Andy");
        assert_eq!(extract_typed_text(&first, &first, &kb), "");
        let two = vec![tok("x", 10.0, 400.0), tok("y", 10.0, 100.0)];
        assert_eq!(extract_typed_text(&[], &two, &kb), "y");
    }

    #[test]
    fn decision_order() {
        let clip = Clip::new(0, 1);
        let cfg = ClassifierConfig::default();
        let mut first = qwerty(600.0);
        first.push(tok("Search", 10.0, 60.0));
        let mut last = qwerty(600.0);
        last.push(tok("cats", 10.0, 60.0));
        let c = classify_interaction(clip, &[first, last], DIMS, &cfg);
        assert_eq!(c.interaction.kind, InteractionType::Type);
        assert_eq!(c.interaction.typed_text.as_deref(), Some("cats"));

        let start: Vec<OcrToken> = (0..5).map(|i| tok(&format!("L{i}"), 320.0, 100.0 + 80.0 * i as f64)).collect();
        let end: Vec<OcrToken> =
            start.iter().map(|t| OcrToken::new(&t.text, t.bbox.translated(-300.0, 0.0), 1)).collect();
        let c = classify_interaction(clip, &[start, end], DIMS, &cfg);
        assert_eq!(c.interaction.kind, InteractionType::SwipeLeft);
        assert_eq!(c.interaction.swipe.as_ref().unwrap().distance_px, 300.0);
        c.interaction.validate().unwrap();

        let c = classify_interaction(clip, &[vec![], vec![]], DIMS, &cfg);
        assert_eq!(c.interaction.kind, InteractionType::Tap);
    }

    #[test]
    fn keyboard_opening_tap_is_a_tap() {
        let first = vec![tok("Search", 10.0, 60.0)];
        let mut last = qwerty(600.0);
        last.push(tok("Search", 10.0, 60.0));
        last.push(tok("Recent", 10.0, 120.0));
        let c = classify_interaction(Clip::new(0, 1), &[first, last], DIMS, &ClassifierConfig::default());
        assert_eq!(c.interaction.kind, InteractionType::Tap);
    }
}
