//! Frame directories and OCR sidecars.
//!
//! ```text
//! recording/
//!   frames.json        { "width", "height", "fps", "frames": ["000000.png", ...] }
//!   000000.png ...
//!   ocr/000000.json    [ { "text": "History", "bbox": [x, y, w, h] }, ... ]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Rect, ScreenDims};
use crate::raster::{Raster, RasterError};

pub const MANIFEST: &str = "frames.json";
pub const OCR_DIR: &str = "ocr";

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub timestamp: f64,
    /// File stem the frame was loaded from; sidecars share it.
    pub name: String,
    pub raster: Raster,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub dims: ScreenDims,
    pub fps: f64,
    pub frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(dims: ScreenDims, fps: f64, rasters: Vec<Raster>) -> Result<Self, RecordingError> {
        let frames = rasters
            .into_iter()
            .enumerate()
            .map(|(i, raster)| Frame { index: i, timestamp: i as f64 / fps, name: frame_stem(i), raster })
            .collect();
        let seq = Self { dims, fps, frames };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn rasters(&self) -> Vec<&Raster> {
        self.frames.iter().map(|f| &f.raster).collect()
    }

    fn validate(&self) -> Result<(), RecordingError> {
        if !self.dims.is_valid() {
            return Err(RecordingError::Manifest(format!("screen {}x{} is empty", self.dims.width, self.dims.height)));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(RecordingError::Manifest(format!("fps {} must be positive", self.fps)));
        }
        for f in &self.frames {
            if f.raster.width() != self.dims.width as usize || f.raster.height() != self.dims.height as usize {
                return Err(RecordingError::Dimensions {
                    file: f.name.clone(),
                    expected: (self.dims.width, self.dims.height),
                    got: (f.raster.width() as u32, f.raster.height() as u32),
                });
            }
        }
        for pair in self.frames.windows(2) {
            if pair[1].index <= pair[0].index || pair[1].timestamp < pair[0].timestamp {
                return Err(RecordingError::Manifest(format!(
                    "frame {} does not follow frame {}",
                    pair[1].name, pair[0].name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrToken {
    pub text: String,
    pub bbox: Rect,
    #[serde(default)]
    pub frame_index: usize,
}

impl OcrToken {
    pub fn new(text: impl Into<String>, bbox: Rect, frame_index: usize) -> Self {
        Self { text: text.into(), bbox, frame_index }
    }
}

/// A loaded recording: frames plus the OCR tokens of every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub frames: FrameSequence,
    pub tokens: Vec<Vec<OcrToken>>,
}

impl Recording {
    pub fn dims(&self) -> ScreenDims {
        self.frames.dims
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordingError {
    #[error("missing manifest {0}")]
    MissingManifest(PathBuf),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("{file}: {message}")]
    File { file: PathBuf, message: String },
    #[error(transparent)]
    Image(#[from] RasterError),
    #[error("{file}: expected {}x{} pixels, found {}x{}", expected.0, expected.1, got.0, got.1)]
    Dimensions { file: String, expected: (u32, u32), got: (u32, u32) },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecordingError + '_ {
    move |source| RecordingError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SidecarEntry {
    text: String,
    bbox: Rect,
}

/// Source of OCR tokens for one frame.
pub trait OcrProvider: Sync {
    fn recognize(&self, recording_dir: &Path, frame: &Frame, dims: ScreenDims)
        -> Result<Vec<OcrToken>, RecordingError>;
}

/// Reads `ocr/<stem>.json`; a missing sidecar means no text on that frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct SidecarOcr;

impl OcrProvider for SidecarOcr {
    fn recognize(&self, dir: &Path, frame: &Frame, dims: ScreenDims) -> Result<Vec<OcrToken>, RecordingError> {
        let path = dir.join(OCR_DIR).join(format!("{}.json", frame.name));
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let entries: Vec<SidecarEntry> = serde_json::from_str(&text)
            .map_err(|e| RecordingError::File { file: path.clone(), message: e.to_string() })?;
        entries
            .into_iter()
            .map(|e| {
                let tok = OcrToken::new(e.text, e.bbox, frame.index);
                check_token(&tok, dims).map_err(|message| RecordingError::File { file: path.clone(), message })?;
                Ok(tok)
            })
            .collect()
    }
}

fn check_token(tok: &OcrToken, dims: ScreenDims) -> Result<(), String> {
    if tok.text.trim().is_empty() {
        return Err("OCR token with empty text".into());
    }
    if !(tok.bbox.w > 0.0 && tok.bbox.h > 0.0) {
        return Err(format!("OCR token {:?} has an empty bbox", tok.text));
    }
    if !dims.contains_rect(&tok.bbox) {
        return Err(format!("OCR token {:?} bbox {:?} leaves the screen", tok.text, tok.bbox));
    }
    Ok(())
}

pub fn frame_stem(index: usize) -> String {
    format!("{index:06}")
}

pub fn load_manifest(dir: &Path) -> Result<Manifest, RecordingError> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(RecordingError::MissingManifest(path));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| RecordingError::File { file: path.clone(), message: e.to_string() })?;
    Ok(manifest)
}

pub fn load_recording(dir: &Path) -> Result<Recording, RecordingError> {
    load_recording_with(dir, &SidecarOcr)
}

pub fn load_recording_with(dir: &Path, ocr: &dyn OcrProvider) -> Result<Recording, RecordingError> {
    let manifest = load_manifest(dir)?;
    let dims = ScreenDims::new(manifest.width, manifest.height);
    let mut named = manifest
        .frames
        .iter()
        .map(|file| {
            let stem = Path::new(file)
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| RecordingError::Manifest(format!("bad frame name {file:?}")))?;
            let index: usize = stem
                .parse()
                .map_err(|_| RecordingError::Manifest(format!("frame name {file:?} is not numbered")))?;
            Ok((index, stem.to_string(), dir.join(file)))
        })
        .collect::<Result<Vec<_>, RecordingError>>()?;
    named.sort_by_key(|(i, _, _)| *i);

    let frames = named
        .par_iter()
        .map(|(index, stem, path)| {
            if !path.is_file() {
                return Err(RecordingError::File { file: path.clone(), message: "frame image not found".into() });
            }
            let raster = Raster::load_png(path)?;
            Ok(Frame { index: *index, timestamp: *index as f64 / manifest.fps, name: stem.clone(), raster })
        })
        .collect::<Result<Vec<_>, RecordingError>>()?;
    let frames = FrameSequence { dims, fps: manifest.fps, frames };
    frames.validate()?;
    let tokens = frames
        .frames
        .par_iter()
        .map(|f| ocr.recognize(dir, f, dims))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Recording { frames, tokens })
}

/// Write frames, manifest and sidecars in the layout [`load_recording`] reads.
pub fn write_recording(dir: &Path, rec: &Recording) -> Result<(), RecordingError> {
    let ocr_dir = dir.join(OCR_DIR);
    fs::create_dir_all(&ocr_dir).map_err(io_err(&ocr_dir))?;
    let files: Vec<String> = rec.frames.frames.iter().map(|f| format!("{}.png", f.name)).collect();
    rec.frames
        .frames
        .par_iter()
        .zip(&files)
        .try_for_each(|(f, file)| f.raster.save_png(&dir.join(file)))?;
    for (f, toks) in rec.frames.frames.iter().zip(&rec.tokens) {
        let entries: Vec<SidecarEntry> =
            toks.iter().map(|t| SidecarEntry { text: t.text.clone(), bbox: t.bbox }).collect();
        let path = ocr_dir.join(format!("{}.json", f.name));
        let body = serde_json::to_string(&entries).expect("sidecar entries serialize");
        fs::write(&path, body).map_err(io_err(&path))?;
    }
    let manifest = Manifest { width: rec.frames.dims.width, height: rec.frames.dims.height, fps: rec.frames.fps, frames: files };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io_err(&path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(n: usize) -> Recording {
        let dims = ScreenDims::new(8, 6);
        let rasters = (0..n).map(|i| Raster::filled(8, 6, [i as f32 / n as f32, 0.5, 0.25])).collect();
        let frames = FrameSequence::new(dims, 10.0, rasters).unwrap();
        let tokens = (0..n)
            .map(|i| if i % 2 == 0 { vec![OcrToken::new("Ok", Rect::new(1.0, 1.0, 3.0, 2.0), i)] } else { vec![] })
            .collect();
        Recording { frames, tokens }
    }

    #[test]
    fn ten_frame_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = tiny(10);
        write_recording(dir.path(), &rec).unwrap();
        // a missing sidecar is not an error
        fs::remove_file(dir.path().join("ocr/000001.json")).unwrap();
        let back = load_recording(dir.path()).unwrap();
        assert_eq!(back.frames.len(), 10);
        assert_eq!(back.dims(), ScreenDims::new(8, 6));
        assert_eq!(back.tokens[0].len(), 1);
        assert!(back.tokens[1].is_empty());
        assert!((back.frames.frames[3].timestamp - 0.3).abs() < 1e-12);
    }

    #[test]
    fn corrupt_image_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_recording(dir.path(), &tiny(3)).unwrap();
        fs::write(dir.path().join("000002.png"), b"not a png").unwrap();
        let err = load_recording(dir.path()).unwrap_err().to_string();
        assert!(err.contains("000002.png"), "{err}");
    }

    #[test]
    fn missing_manifest_and_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_recording(dir.path()), Err(RecordingError::MissingManifest(_))));
        write_recording(dir.path(), &tiny(3)).unwrap();
        Raster::filled(4, 4, [0.0; 3]).save_png(&dir.path().join("000001.png")).unwrap();
        let err = load_recording(dir.path()).unwrap_err();
        assert!(matches!(err, RecordingError::Dimensions { ref file, .. } if file == "000001"), "{err}");
    }

    #[test]
    fn token_outside_screen_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_recording(dir.path(), &tiny(2)).unwrap();
        fs::write(dir.path().join("ocr/000000.json"), r#"[{"text":"x","bbox":[6,0,5,2]}]"#).unwrap();
        let err = load_recording(dir.path()).unwrap_err().to_string();
        assert!(err.contains("000000.json"), "{err}");
    }
}
