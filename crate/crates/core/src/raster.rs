//! RGB rasters with channel values in `[0, 1]`.

use std::path::Path;

use crate::geometry::Rect;

pub type Rgb = [f32; 3];

#[derive(Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Raster({}x{})", self.width, self.height)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("cannot read image {path}: {source}")]
    Read { path: String, source: image::ImageError },
    #[error("cannot write image {path}: {source}")]
    Write { path: String, source: image::ImageError },
    #[error("raster buffer of {got} values does not fit {width}x{height}x3")]
    Size { width: usize, height: usize, got: usize },
}

impl Raster {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Self { width, height, data }
    }

    /// Build from interleaved RGB values; out-of-range values are clamped.
    pub fn from_data(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self, RasterError> {
        if data.len() != width * height * 3 {
            return Err(RasterError::Size { width, height, got: data.len() });
        }
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(Self { width, height, data })
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self, RasterError> {
        if bytes.len() != width * height * 3 {
            return Err(RasterError::Size { width, height, got: bytes.len() });
        }
        Ok(Self { width, height, data: bytes.iter().map(|&b| b as f32 / 255.0).collect() })
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }

    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path)
            .map_err(|source| RasterError::Read { path: path.display().to_string(), source })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_rgb8(w as usize, h as usize, img.as_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| RasterError::Write { path: path.display().to_string(), source })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i] = c[0].clamp(0.0, 1.0);
        self.data[i + 1] = c[1].clamp(0.0, 1.0);
        self.data[i + 2] = c[2].clamp(0.0, 1.0);
    }

    /// Alpha-composite `c` over the pixel at `(x, y)`; ignores out-of-bounds.
    pub fn blend(&mut self, x: i64, y: i64, c: Rgb, alpha: f32) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let (x, y) = (x as usize, y as usize);
        let old = self.get(x, y);
        let a = alpha.clamp(0.0, 1.0);
        self.set(x, y, [0, 1, 2].map(|k| old[k] * (1.0 - a) + c[k] * a));
    }

    /// ITU-R BT.601 luma plane.
    pub fn luma(&self) -> Vec<f32> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    /// Bilinear resampling with half-pixel centres.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Raster {
        let sx = self.width as f32 / width as f32;
        let sy = self.height as f32 / height as f32;
        let mut out = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f32);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f32;
            for x in 0..width {
                let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f32);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f32;
                let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
                for k in 0..3 {
                    let top = a[k] * (1.0 - tx) + b[k] * tx;
                    let bot = c[k] * (1.0 - tx) + d[k] * tx;
                    out.push(top * (1.0 - ty) + bot * ty);
                }
            }
        }
        Raster { width, height, data: out }
    }

    /// Box-filter (area-average) downsampling; falls back to bilinear when enlarging.
    pub fn resize_area(&self, width: usize, height: usize) -> Raster {
        if width >= self.width || height >= self.height {
            return self.resize_bilinear(width, height);
        }
        let xw = area_weights(self.width, width);
        let yw = area_weights(self.height, height);
        // horizontal pass
        let mut tmp = vec![0.0f32; width * self.height * 3];
        for y in 0..self.height {
            for (x, taps) in xw.iter().enumerate() {
                let mut acc = [0.0f32; 3];
                for &(sx, w) in taps {
                    let p = self.get(sx, y);
                    for k in 0..3 {
                        acc[k] += p[k] * w;
                    }
                }
                tmp[(y * width + x) * 3..(y * width + x) * 3 + 3].copy_from_slice(&acc);
            }
        }
        let mut out = vec![0.0f32; width * height * 3];
        for (y, taps) in yw.iter().enumerate() {
            for x in 0..width {
                let mut acc = [0.0f32; 3];
                for &(sy, w) in taps {
                    let i = (sy * width + x) * 3;
                    for k in 0..3 {
                        acc[k] += tmp[i + k] * w;
                    }
                }
                out[(y * width + x) * 3..(y * width + x) * 3 + 3].copy_from_slice(&acc);
            }
        }
        Raster { width, height, data: out }
    }

    /// Copy of the pixels covered by `rect` (clipped to the raster).
    pub fn crop(&self, rect: &Rect) -> Raster {
        let x0 = rect.x.max(0.0).floor() as usize;
        let y0 = rect.y.max(0.0).floor() as usize;
        let x1 = ((rect.x + rect.w).ceil() as usize).min(self.width).max(x0 + 1).min(self.width);
        let y1 = ((rect.y + rect.h).ceil() as usize).min(self.height).max(y0 + 1).min(self.height);
        let x0 = x0.min(x1.saturating_sub(1));
        let y0 = y0.min(y1.saturating_sub(1));
        let (w, h) = (x1 - x0, y1 - y0);
        let mut data = Vec::with_capacity(w * h * 3);
        for y in y0..y1 {
            data.extend_from_slice(&self.data[(y * self.width + x0) * 3..(y * self.width + x1) * 3]);
        }
        Raster { width: w, height: h, data }
    }

    /// Paste `src` with its top-left corner at `(x, y)`, clipping at the borders.
    pub fn paste(&mut self, src: &Raster, x: i64, y: i64) {
        for sy in 0..src.height {
            for sx in 0..src.width {
                let (dx, dy) = (x + sx as i64, y + sy as i64);
                if dx >= 0 && dy >= 0 && (dx as usize) < self.width && (dy as usize) < self.height {
                    self.set(dx as usize, dy as usize, src.get(sx, sy));
                }
            }
        }
    }
}

/// For each destination pixel, the overlapping source pixels and their weights.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f32)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let lo = d as f64 * scale;
            let hi = lo + scale;
            let mut taps = Vec::new();
            let mut s = lo.floor() as usize;
            while (s as f64) < hi && s < src {
                let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((s, (overlap / scale) as f32));
                }
                s += 1;
            }
            taps
        })
        .collect()
}
