//! Multi-scale zero-mean normalized cross-correlation on luma.

use crate::geometry::Rect;
use crate::raster::Raster;

/// Single-channel f64 image with summed-area tables for window statistics.
pub struct LumaImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl LumaImage {
    pub fn new(r: &Raster) -> Self {
        let (w, h) = (r.width(), r.height());
        let values: Vec<f64> = r.luma().into_iter().map(f64::from).collect();
        let mut sum = vec![0.0; (w + 1) * (h + 1)];
        let mut sq = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let (mut rs, mut rq) = (0.0, 0.0);
            for x in 0..w {
                let v = values[y * w + x];
                rs += v;
                rq += v * v;
                sum[(y + 1) * (w + 1) + x + 1] = sum[y * (w + 1) + x + 1] + rs;
                sq[(y + 1) * (w + 1) + x + 1] = sq[y * (w + 1) + x + 1] + rq;
            }
        }
        Self { width: w, height: h, values, sum, sq }
    }

    fn window(&self, table: &[f64], x: usize, y: usize, w: usize, h: usize) -> f64 {
        let s = self.width + 1;
        table[(y + h) * s + x + w] - table[y * s + x + w] - table[(y + h) * s + x] + table[y * s + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateHit {
    /// Placement of the scaled template on the screenshot.
    pub rect: Rect,
    pub scale: f64,
    /// Zero-mean NCC in [-1, 1].
    pub score: f64,
}

/// Integer search window `(x0, y0, x1, y1)`, exclusive ends, inside the image.
fn search_window(img: &LumaImage, region: Option<&Rect>) -> (usize, usize, usize, usize) {
    match region {
        None => (0, 0, img.width, img.height),
        Some(r) => {
            let x0 = r.x.floor().max(0.0) as usize;
            let y0 = r.y.floor().max(0.0) as usize;
            let x1 = (r.right().ceil().max(0.0) as usize).min(img.width);
            let y1 = (r.bottom().ceil().max(0.0) as usize).min(img.height);
            (x0.min(x1), y0.min(y1), x1, y1)
        }
    }
}

/// Best NCC over `scales` (tried in order; earlier scales win ties) with the
/// template placed fully inside `region`. `None` when every scale is skipped.
pub fn template_match(template: &Raster, screen: &LumaImage, scales: &[f64], region: Option<&Rect>) -> Option<TemplateHit> {
    let (x0, y0, x1, y1) = search_window(screen, region);
    let mut best: Option<TemplateHit> = None;
    for &s in scales {
        let tw = ((template.width() as f64 * s).round() as usize).max(1);
        let th = ((template.height() as f64 * s).round() as usize).max(1);
        if tw > x1 - x0 || th > y1 - y0 {
            continue;
        }
        let scaled = if tw == template.width() && th == template.height() { template.clone() } else { template.resize_bilinear(tw, th) };
        let t: Vec<f64> = scaled.luma().into_iter().map(f64::from).collect();
        let n = t.len() as f64;
        let mean = t.iter().sum::<f64>() / n;
        let tz: Vec<f64> = t.iter().map(|v| v - mean).collect();
        let t_norm = tz.iter().map(|v| v * v).sum::<f64>().sqrt();
        for y in y0..=y1 - th {
            for x in x0..=x1 - tw {
                let score = if t_norm < 1e-9 {
                    0.0
                } else {
                    let s1 = screen.window(&screen.sum, x, y, tw, th);
                    let s2 = screen.window(&screen.sq, x, y, tw, th);
                    let var = s2 - s1 * s1 / n;
                    if var <= 1e-9 {
                        0.0
                    } else {
                        let mut num = 0.0;
                        for (row, trow) in tz.chunks_exact(tw).enumerate() {
                            let off = (y + row) * screen.width + x;
                            num += trow.iter().zip(&screen.values[off..off + tw]).map(|(a, b)| a * b).sum::<f64>();
                        }
                        (num / (t_norm * var.sqrt())).clamp(-1.0, 1.0)
                    }
                };
                if best.map_or(true, |b| score > b.score) {
                    best = Some(TemplateHit { rect: Rect::new(x as f64, y as f64, tw as f64, th as f64), scale: s, score });
                }
            }
        }
    }
    best
}
