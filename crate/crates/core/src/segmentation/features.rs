//! Per-frame descriptors compared between consecutive frames.

use serde::{Deserialize, Serialize};

use super::{SegConfig, SegError};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Rgb,
    Yuv,
    Hist,
    Hog,
}

impl std::str::FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(Self::Rgb),
            "yuv" => Ok(Self::Yuv),
            "hist" => Ok(Self::Hist),
            "hog" => Ok(Self::Hog),
            other => Err(format!("unknown feature {other:?} (rgb, yuv, hist, hog)")),
        }
    }
}

/// Planar `channels × rows × cols` grid of reals in `[0, 1]`.
///
/// RGB/YUV: the downsampled frame. HIST: one `1 × 3·bins` strip.
/// HOG: one row per cell, one column per orientation bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub kind: FeatureKind,
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

impl FeatureMap {
    pub fn layout(&self) -> (usize, usize, usize) {
        (self.channels, self.rows, self.cols)
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.rows * self.cols;
        &self.values[c * n..(c + 1) * n]
    }

    /// Nominal value range used by the similarity metrics.
    pub fn range(&self) -> f64 {
        1.0
    }
}

pub fn extract_feature(frame: &Raster, cfg: &SegConfig) -> Result<FeatureMap, SegError> {
    match cfg.feature {
        FeatureKind::Rgb => Ok(planar(frame.resize_area(cfg.downsample.0, cfg.downsample.1), FeatureKind::Rgb, |p| p)),
        FeatureKind::Yuv => Ok(planar(frame.resize_area(cfg.downsample.0, cfg.downsample.1), FeatureKind::Yuv, rgb_to_yuv)),
        FeatureKind::Hist => Ok(histogram(frame, cfg.hist_bins)),
        FeatureKind::Hog => hog(frame, cfg.hog_cell, cfg.hog_bins),
    }
}

fn planar(small: Raster, kind: FeatureKind, convert: impl Fn([f32; 3]) -> [f32; 3]) -> FeatureMap {
    let (w, h) = (small.width(), small.height());
    let mut values = vec![0.0f32; 3 * w * h];
    for y in 0..h {
        for x in 0..w {
            let p = convert(small.get(x, y));
            for c in 0..3 {
                values[(c * h + y) * w + x] = p[c];
            }
        }
    }
    FeatureMap { kind, channels: 3, rows: h, cols: w, values }
}

/// BT.601 YUV with chroma shifted into `[0, 1]`.
pub fn rgb_to_yuv(p: [f32; 3]) -> [f32; 3] {
    let [r, g, b] = p;
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let u = -0.147_13 * r - 0.288_86 * g + 0.436 * b;
    let v = 0.615 * r - 0.514_99 * g - 0.100_01 * b;
    [y, (u / 0.872 + 0.5).clamp(0.0, 1.0), (v / 1.23 + 0.5).clamp(0.0, 1.0)]
}

fn histogram(frame: &Raster, bins: usize) -> FeatureMap {
    let mut values = vec![0.0f32; 3 * bins];
    let mut counts = vec![0u64; 3 * bins];
    for p in frame.data().chunks_exact(3) {
        for c in 0..3 {
            let b = ((p[c] * bins as f32) as usize).min(bins - 1);
            counts[c * bins + b] += 1;
        }
    }
    let n = (frame.width() * frame.height()).max(1) as f64;
    for (v, &k) in values.iter_mut().zip(&counts) {
        *v = (k as f64 / n) as f32;
    }
    FeatureMap { kind: FeatureKind::Hist, channels: 1, rows: 1, cols: 3 * bins, values }
}

const HOG_EPS: f64 = 1e-6;

fn hog(frame: &Raster, cell: usize, bins: usize) -> Result<FeatureMap, SegError> {
    let (w, h) = (frame.width(), frame.height());
    if cell == 0 || w < cell || h < cell {
        return Err(SegError::Config(format!("frame {w}x{h} is smaller than one {cell}px HOG cell")));
    }
    let luma = frame.luma();
    let (cw, ch) = (w / cell, h / cell);
    let mut cells = vec![0.0f64; cw * ch * bins];
    let at = |x: usize, y: usize| luma[y * w + x] as f64;
    for y in 0..ch * cell {
        for x in 0..cw * cell {
            let gx = at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y);
            let gy = at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1));
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let bin = ((angle / (180.0 / bins as f64)) as usize) % bins;
            cells[((y / cell) * cw + x / cell) * bins + bin] += mag;
        }
    }
    let energy: Vec<f64> = cells.chunks_exact(bins).map(|c| c.iter().map(|v| v * v).sum()).collect();
    let mut values = vec![0.0f32; cw * ch * bins];
    for cy in 0..ch {
        for cx in 0..cw {
            let mut block = 0.0;
            for ny in cy.saturating_sub(1)..=(cy + 1).min(ch - 1) {
                for nx in cx.saturating_sub(1)..=(cx + 1).min(cw - 1) {
                    block += energy[ny * cw + nx];
                }
            }
            let norm = (block + HOG_EPS * HOG_EPS).sqrt();
            let i = cy * cw + cx;
            for b in 0..bins {
                values[i * bins + b] = (cells[i * bins + b] / norm) as f32;
            }
        }
    }
    Ok(FeatureMap { kind: FeatureKind::Hog, channels: 1, rows: cw * ch, cols: bins, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: FeatureKind) -> SegConfig {
        SegConfig { feature: kind, ..SegConfig::default() }
    }

    #[test]
    fn constant_frame_hog_is_zero() {
        let f = Raster::filled(64, 48, [0.5; 3]);
        let m = extract_feature(&f, &cfg(FeatureKind::Hog)).unwrap();
        assert_eq!((m.rows, m.cols), (12, 9));
        assert!(m.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_frame_hist_has_one_bin_per_channel() {
        let f = Raster::filled(20, 10, [0.2, 0.5, 1.0]);
        let m = extract_feature(&f, &cfg(FeatureKind::Hist)).unwrap();
        for c in 0..3 {
            let chan = &m.values[c * 32..(c + 1) * 32];
            assert!((chan.iter().sum::<f32>() - 1.0).abs() < 1e-6);
            assert_eq!(chan.iter().filter(|&&v| v == 1.0).count(), 1);
        }
    }

    #[test]
    fn vertical_edge_peaks_in_horizontal_gradient_bin() {
        let mut f = Raster::filled(16, 16, [0.0; 3]);
        for y in 0..16 {
            for x in 8..16 {
                f.set(x, y, [1.0; 3]);
            }
        }
        // 2x2 patch straddling the edge: gx = 1 - 0, gy = 0, so the angle is 0°
        let luma = f.luma();
        let (x, y) = (7usize, 4usize);
        let gx = luma[y * 16 + x + 1] as f64 - luma[y * 16 + x - 1] as f64;
        let gy = luma[(y + 1) * 16 + x] as f64 - luma[(y - 1) * 16 + x] as f64;
        let expected_bin = (gy.atan2(gx).to_degrees().rem_euclid(180.0) / 20.0) as usize;
        assert_eq!(expected_bin, 0);

        let m = extract_feature(&f, &cfg(FeatureKind::Hog)).unwrap();
        let dominant = (0..9).max_by(|&a, &b| m.values[a].total_cmp(&m.values[b])).unwrap();
        assert_eq!(dominant, expected_bin);
        assert!(m.values[0] > 0.9);
    }

    #[test]
    fn tiny_frame_is_a_config_error() {
        let f = Raster::filled(8, 40, [0.0; 3]);
        assert!(matches!(extract_feature(&f, &cfg(FeatureKind::Hog)), Err(SegError::Config(_))));
    }

    #[test]
    fn rgb_and_yuv_layouts() {
        let f = Raster::filled(128, 256, [0.3, 0.6, 0.9]);
        for kind in [FeatureKind::Rgb, FeatureKind::Yuv] {
            let m = extract_feature(&f, &cfg(kind)).unwrap();
            assert_eq!(m.layout(), (3, 128, 64));
            assert!(m.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let gray = rgb_to_yuv([0.5; 3]);
        assert!((gray[1] - 0.5).abs() < 1e-3 && (gray[2] - 0.5).abs() < 1e-3);
    }
}
