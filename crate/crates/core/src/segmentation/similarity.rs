//! Similarity between feature maps, higher meaning more alike.

use serde::{Deserialize, Serialize};

use super::features::FeatureMap;
use super::SegError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    L2,
    Ssim,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            "ssim" => Ok(Self::Ssim),
            other => Err(format!("unknown metric {other:?} (l1, l2, ssim)")),
        }
    }
}

pub const SSIM_WINDOW: usize = 7;

pub fn similarity(a: &FeatureMap, b: &FeatureMap, metric: Metric) -> Result<f64, SegError> {
    if a.kind != b.kind || a.layout() != b.layout() {
        return Err(SegError::Layout(format!(
            "{:?} {:?} vs {:?} {:?}",
            a.kind,
            a.layout(),
            b.kind,
            b.layout()
        )));
    }
    let range = a.range();
    let n = a.values.len().max(1) as f64;
    Ok(match metric {
        Metric::L1 => {
            let d: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum();
            1.0 - d / n / range
        }
        Metric::L2 => {
            let d: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
            1.0 - (d / n).sqrt() / range
        }
        Metric::Ssim => {
            let total: f64 = (0..a.channels)
                .map(|c| ssim_plane(a.plane(c), b.plane(c), a.rows, a.cols, range))
                .sum();
            total / a.channels as f64
        }
    })
}

/// Mean SSIM over every `7×7` window (shrunk to the plane when smaller).
pub fn ssim_plane(a: &[f32], b: &[f32], rows: usize, cols: usize, range: f64) -> f64 {
    let wr = SSIM_WINDOW.min(rows);
    let wc = SSIM_WINDOW.min(cols);
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let stride = cols + 1;
    let mut sa = vec![0.0f64; (rows + 1) * stride];
    let mut sb = sa.clone();
    let mut saa = sa.clone();
    let mut sbb = sa.clone();
    let mut sab = sa.clone();
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = (a[r * cols + c] as f64, b[r * cols + c] as f64);
            let i = (r + 1) * stride + c + 1;
            let (up, left, diag) = (i - stride, i - 1, i - stride - 1);
            for (t, v) in [(&mut sa, x), (&mut sb, y), (&mut saa, x * x), (&mut sbb, y * y), (&mut sab, x * y)] {
                t[i] = v + t[up] + t[left] - t[diag];
            }
        }
    }
    let area = (wr * wc) as f64;
    let box_sum = |t: &[f64], r: usize, c: usize| {
        t[(r + wr) * stride + c + wc] - t[r * stride + c + wc] - t[(r + wr) * stride + c] + t[r * stride + c]
    };
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=rows - wr {
        for c in 0..=cols - wc {
            let mx = box_sum(&sa, r, c) / area;
            let my = box_sum(&sb, r, c) / area;
            let vx = (box_sum(&saa, r, c) / area - mx * mx).max(0.0);
            let vy = (box_sum(&sbb, r, c) / area - my * my).max(0.0);
            let cov = box_sum(&sab, r, c) / area - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::features::FeatureKind;

    fn map(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f32) -> FeatureMap {
        let values = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        FeatureMap { kind: FeatureKind::Rgb, channels: 1, rows, cols, values }
    }

    #[test]
    fn identical_maps_score_one() {
        let m = map(9, 11, |r, c| ((r * 7 + c * 3) % 10) as f32 / 10.0);
        for metric in [Metric::L1, Metric::L2, Metric::Ssim] {
            assert!((similarity(&m, &m, metric).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zeros_vs_ones_l1_is_zero() {
        let z = map(4, 4, |_, _| 0.0);
        let o = map(4, 4, |_, _| 1.0);
        assert_eq!(similarity(&z, &o, Metric::L1).unwrap(), 0.0);
        assert_eq!(similarity(&z, &o, Metric::L2).unwrap(), 0.0);
    }

    /// Straight-line SSIM of one window, no integral images.
    fn window_ssim(a: &FeatureMap, b: &FeatureMap, r0: usize, c0: usize) -> f64 {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in r0..r0 + 7 {
            for c in c0..c0 + 7 {
                xs.push(a.values[r * a.cols + c] as f64);
                ys.push(b.values[r * b.cols + c] as f64);
            }
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n;
        let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n;
        let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        let (c1, c2) = (0.0001, 0.0009);
        ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    }

    #[test]
    fn ssim_matches_direct_windowed_evaluation() {
        let a = map(8, 8, |r, c| ((r * 13 + c * 5) % 17) as f32 / 16.0);
        let b = map(8, 8, |r, c| ((r * 3 + c * 11 + 4) % 19) as f32 / 18.0);
        let expected = (0..2).flat_map(|r| (0..2).map(move |c| (r, c))).map(|(r, c)| window_ssim(&a, &b, r, c)).sum::<f64>() / 4.0;
        let got = similarity(&a, &b, Metric::Ssim).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        assert!((-1.0..=1.0).contains(&got));
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let a = map(4, 4, |_, _| 0.0);
        let b = map(4, 5, |_, _| 0.0);
        assert!(matches!(similarity(&a, &b, Metric::L1), Err(SegError::Layout(_))));
    }
}
