//! Pixel-only extraction of replayable interaction traces from mobile
//! screen recordings.
//!
//! The pipeline runs in four phases over a directory of pre-extracted frames:
//!
//! 1. [`segmentation`] splits the recording into stable UI states and keyframes.
//! 2. [`classification`] labels each clip between keyframes as tap, type or swipe.
//! 3. [`localization`] finds tap points with a title-match heuristic and a
//!    heatmap network.
//! 4. [`replay`] maps each recorded interaction onto a new screenshot.
//!
//! [`fixtures`] renders labelled synthetic recordings and [`eval`] scores every
//! phase against ground truth.

pub mod annotate;
pub mod classification;
pub mod eval;
pub mod fixtures;
pub mod geometry;
pub mod harness;
pub mod localization;
pub mod pipeline;
pub mod raster;
pub mod recording;
pub mod replay;
pub mod segmentation;
pub mod trace;

pub use geometry::{Point, Rect, ScreenDims};
pub use raster::Raster;
pub use recording::{Frame, FrameSequence, OcrToken, Recording};
pub use trace::{Clip, Direction, Interaction, InteractionTrace, InteractionType};
