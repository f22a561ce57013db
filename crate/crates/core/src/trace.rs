//! Interaction traces and their canonical on-disk document (`trace.json`).
//!
//! Persisted points are normalized to `[0, 1]²` so a trace replays on screens
//! of any resolution. Swipe distances stay in source-device pixels; the
//! recording's [`ScreenDims`] travel with the trace to rescale them.
//!
//! Serialization is byte-deterministic: object keys are sorted and every real
//! number is written with exactly six decimals.

use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::geometry::{Point, Rect, ScreenDims};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionType {
    Tap,
    Type,
    SwipeUp,
    SwipeDown,
    SwipeLeft,
    SwipeRight,
}

impl InteractionType {
    pub const ALL: [InteractionType; 6] = [
        InteractionType::Tap,
        InteractionType::Type,
        InteractionType::SwipeUp,
        InteractionType::SwipeDown,
        InteractionType::SwipeLeft,
        InteractionType::SwipeRight,
    ];

    pub fn swipe_direction(self) -> Option<Direction> {
        match self {
            Self::SwipeUp => Some(Direction::Up),
            Self::SwipeDown => Some(Direction::Down),
            Self::SwipeLeft => Some(Direction::Left),
            Self::SwipeRight => Some(Direction::Right),
            Self::Tap | Self::Type => None,
        }
    }

    pub fn is_swipe(self) -> bool {
        self.swipe_direction().is_some()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tap => "tap",
            Self::Type => "type",
            Self::SwipeUp => "swipe_up",
            Self::SwipeDown => "swipe_down",
            Self::SwipeLeft => "swipe_left",
            Self::SwipeRight => "swipe_right",
        }
    }
}

impl fmt::Display for InteractionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub fn interaction(self) -> InteractionType {
        match self {
            Self::Up => InteractionType::SwipeUp,
            Self::Down => InteractionType::SwipeDown,
            Self::Left => InteractionType::SwipeLeft,
            Self::Right => InteractionType::SwipeRight,
        }
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Self::Up | Self::Down)
    }

    /// Unit vector of content translation in screen coordinates.
    pub fn unit(self) -> (f64, f64) {
        match self {
            Self::Up => (0.0, -1.0),
            Self::Down => (0.0, 1.0),
            Self::Left => (-1.0, 0.0),
            Self::Right => (1.0, 0.0),
        }
    }
}

/// Frame span `[start, end]` bounded by two keyframes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Clip {
    pub start: usize,
    pub end: usize,
}

impl Clip {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

impl From<[usize; 2]> for Clip {
    fn from(v: [usize; 2]) -> Self {
        Self { start: v[0], end: v[1] }
    }
}

impl From<Clip> for [usize; 2] {
    fn from(c: Clip) -> Self {
        [c.start, c.end]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Swipe {
    pub direction: Direction,
    pub distance_px: f64,
}

/// The recorded UI element an interaction acted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Pixels on the recording's screen.
    pub bbox: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Path of a PNG crop, relative to the trace file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub kind: InteractionType,
    pub clip: Clip,
    /// Normalized tap or swipe-initiation point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swipe: Option<Swipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typed_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
}

impl Interaction {
    pub fn tap(clip: Clip, point: Point) -> Self {
        Self { kind: InteractionType::Tap, clip, point: Some(point), swipe: None, typed_text: None, target: None }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let fail = |msg: String| Err(TraceError::Validation(msg));
        if self.clip.start >= self.clip.end {
            return fail(format!("clip [{}, {}] must have start < end", self.clip.start, self.clip.end));
        }
        match (self.kind.swipe_direction(), &self.swipe) {
            (Some(dir), Some(s)) if s.direction != dir => {
                return fail(format!("{} carries swipe direction {:?}", self.kind, s.direction));
            }
            (Some(_), Some(s)) if !(s.distance_px >= 0.0 && s.distance_px.is_finite()) => {
                return fail(format!("swipe distance {} must be finite and >= 0", s.distance_px));
            }
            (Some(_), None) => return fail(format!("{} requires swipe parameters", self.kind)),
            (None, Some(_)) => return fail(format!("{} must not carry swipe parameters", self.kind)),
            _ => {}
        }
        match (self.kind == InteractionType::Type, &self.typed_text) {
            (true, None) => return fail("type interaction requires typed_text".into()),
            (false, Some(_)) => return fail(format!("{} must not carry typed_text", self.kind)),
            _ => {}
        }
        if self.kind != InteractionType::Type && self.point.is_none() {
            return fail(format!("{} requires a point", self.kind));
        }
        if let Some(p) = self.point {
            if !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y) {
                return fail(format!("point ({}, {}) outside the unit square", p.x, p.y));
            }
        }
        if let Some(t) = &self.target {
            if !(t.bbox.w > 0.0 && t.bbox.h > 0.0) {
                return fail("target bbox must have positive extent".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTrace {
    pub screen: ScreenDims,
    pub interactions: Vec<Interaction>,
    pub source: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("coordinate ({x}, {y}) outside screen {width}x{height}")]
    CoordinateRange { x: f64, y: f64, width: u32, height: u32 },
    #[error("trace parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid trace: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl InteractionTrace {
    pub fn new(screen: ScreenDims, source: impl Into<String>) -> Self {
        Self { screen, interactions: Vec::new(), source: source.into() }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if !self.screen.is_valid() {
            return Err(TraceError::Validation(format!(
                "screen {}x{} must be at least 1x1",
                self.screen.width, self.screen.height
            )));
        }
        for (i, it) in self.interactions.iter().enumerate() {
            it.validate()
                .map_err(|e| TraceError::Validation(format!("interaction {i}: {e}")))?;
        }
        for (i, pair) in self.interactions.windows(2).enumerate() {
            let (a, b) = (pair[0].clip, pair[1].clip);
            if b.start < a.end {
                return Err(TraceError::Validation(format!(
                    "interactions {i} and {} overlap: [{}, {}] then [{}, {}]",
                    i + 1,
                    a.start,
                    a.end,
                    b.start,
                    b.end
                )));
            }
        }
        Ok(())
    }

    /// Canonical document: sorted keys, six-decimal reals, trailing newline.
    pub fn to_canonical_json(&self) -> Result<String, TraceError> {
        self.validate()?;
        #[derive(Serialize)]
        struct Doc<'a> {
            version: u32,
            #[serde(flatten)]
            trace: &'a InteractionTrace,
        }
        let value = serde_json::to_value(Doc { version: TRACE_VERSION, trace: self })
            .map_err(|e| TraceError::Validation(e.to_string()))?;
        let mut out = to_canonical_string(&value)?;
        out.push('\n');
        Ok(out)
    }

    pub fn parse(doc: &str) -> Result<Self, TraceError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            version: u32,
            screen: ScreenDims,
            interactions: Vec<Interaction>,
            source: String,
        }
        let mut de = serde_json::Deserializer::from_str(doc);
        let parsed: Doc = serde_path_to_error::deserialize(&mut de).map_err(|e| TraceError::Parse {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
        if parsed.version != TRACE_VERSION {
            return Err(TraceError::Validation(format!("unsupported trace version {}", parsed.version)));
        }
        let trace = InteractionTrace {
            screen: parsed.screen,
            interactions: parsed.interactions,
            source: parsed.source,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TraceError> {
        std::fs::write(path, self.to_canonical_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TraceError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Serialize any serde value with sorted keys and fixed six-decimal reals.
pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String, TraceError> {
    // Round-trip through `Value` so map keys come out sorted.
    let value = serde_json::to_value(value).map_err(|e| TraceError::Validation(e.to_string()))?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter::default());
    value.serialize(&mut ser).map_err(|e| TraceError::Validation(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Round to the six decimals the canonical document keeps.
pub fn quantize(v: f64) -> f64 {
    let q = (v * 1e6).round() / 1e6;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

struct CanonicalFormatter {
    inner: PrettyFormatter<'static>,
}

impl Default for CanonicalFormatter {
    fn default() -> Self {
        Self { inner: PrettyFormatter::with_indent(b"  ") }
    }
}

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        let s = format!("{:.6}", quantize(value));
        writer.write_all(s.as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Pixel coordinates → unit coordinates.
pub fn normalize_point(p: Point, dims: ScreenDims) -> Result<Point, TraceError> {
    if !dims.contains(p) || !p.x.is_finite() || !p.y.is_finite() {
        return Err(TraceError::CoordinateRange { x: p.x, y: p.y, width: dims.width, height: dims.height });
    }
    Ok(Point::new(p.x / dims.width as f64, p.y / dims.height as f64))
}

pub fn denormalize_point(u: Point, dims: ScreenDims) -> Point {
    Point::new(u.x * dims.width as f64, u.y * dims.height as f64)
}
