//! Overlays for human inspection: interaction markers on keyframes and a
//! plot of the similarity series.

use crate::fixtures::font::draw_text;
use crate::geometry::{Point, Rect};
use crate::raster::{Raster, Rgb};
use crate::trace::{denormalize_point, InteractionTrace, InteractionType};

fn kind_color(kind: InteractionType) -> Rgb {
    match kind {
        InteractionType::Tap => [0.9, 0.1, 0.1],
        InteractionType::Type => [0.1, 0.6, 0.1],
        _ => [0.1, 0.2, 0.9],
    }
}

pub fn draw_line(r: &mut Raster, a: Point, b: Point, color: Rgb) {
    let steps = a.distance(b).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let (x, y) = (a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
        r.blend(x.round() as i64, y.round() as i64, color, 1.0);
    }
}

pub fn draw_rect(r: &mut Raster, rect: &Rect, color: Rgb) {
    let (x0, y0, x1, y1) = (rect.x, rect.y, rect.right() - 1.0, rect.bottom() - 1.0);
    for (a, b) in [((x0, y0), (x1, y0)), ((x1, y0), (x1, y1)), ((x1, y1), (x0, y1)), ((x0, y1), (x0, y0))] {
        draw_line(r, Point::new(a.0, a.1), Point::new(b.0, b.1), color);
    }
}

/// Cross with a ring around it.
pub fn draw_marker(r: &mut Raster, p: Point, color: Rgb) {
    let s = 5.0;
    draw_line(r, Point::new(p.x - s, p.y), Point::new(p.x + s, p.y), color);
    draw_line(r, Point::new(p.x, p.y - s), Point::new(p.x, p.y + s), color);
    for k in 0..32 {
        let a = k as f64 * std::f64::consts::TAU / 32.0;
        r.blend((p.x + 1.6 * s * a.cos()).round() as i64, (p.y + 1.6 * s * a.sin()).round() as i64, color, 1.0);
    }
}

/// One annotated copy of each interaction's starting keyframe, in trace order.
pub fn annotate_keyframes(frames: &[&Raster], trace: &InteractionTrace) -> Vec<(usize, Raster)> {
    let dims = trace.screen;
    trace
        .interactions
        .iter()
        .enumerate()
        .filter_map(|(i, it)| {
            let mut r = (*frames.get(it.clip.start)?).clone();
            let color = kind_color(it.kind);
            if let Some(t) = &it.target {
                draw_rect(&mut r, &t.bbox, color);
            }
            if let Some(p) = it.point.map(|u| denormalize_point(u, dims)) {
                draw_marker(&mut r, p, color);
                if let Some(s) = &it.swipe {
                    let (ux, uy) = s.direction.unit();
                    let end = Point::new(p.x + ux * s.distance_px, p.y + uy * s.distance_px);
                    draw_line(&mut r, p, end, color);
                    let back = Point::new(end.x - ux * 6.0 - uy * 4.0, end.y - uy * 6.0 - ux * 4.0);
                    let back2 = Point::new(end.x - ux * 6.0 + uy * 4.0, end.y - uy * 6.0 + ux * 4.0);
                    draw_line(&mut r, end, back, color);
                    draw_line(&mut r, end, back2, color);
                }
            }
            let label = format!("{} {}", i, it.kind.as_str().to_uppercase().replace('_', " "));
            let bounds = Rect::new(0.0, 0.0, r.width() as f64, r.height() as f64);
            let y = r.height() as i64 - 10;
            draw_text(&mut r, &label, 2, y, 1, color, &bounds);
            Some((i, r))
        })
        .collect()
}

/// Line plot of `series` with the threshold in red and keyframes as ticks.
pub fn plot_series(series: &[f64], threshold: f64, keyframes: &[usize]) -> Raster {
    let (w, h, pad) = ((series.len() * 4).max(200), 120usize, 6.0);
    let mut r = Raster::filled(w, h, [1.0; 3]);
    if series.is_empty() {
        return r;
    }
    let lo = series.iter().copied().fold(threshold, f64::min);
    let hi = series.iter().copied().fold(threshold, f64::max);
    let span = (hi - lo).max(1e-9);
    let y_of = |v: f64| pad + (hi - v) / span * (h as f64 - 2.0 * pad);
    let x_of = |i: usize| pad + i as f64 * (w as f64 - 2.0 * pad) / series.len().saturating_sub(1).max(1) as f64;
    draw_line(&mut r, Point::new(0.0, y_of(threshold)), Point::new(w as f64 - 1.0, y_of(threshold)), [0.9, 0.2, 0.2]);
    for &k in keyframes {
        let x = x_of(k.min(series.len() - 1));
        draw_line(&mut r, Point::new(x, h as f64 - 5.0), Point::new(x, h as f64 - 1.0), [0.1, 0.6, 0.1]);
    }
    for i in 1..series.len() {
        draw_line(&mut r, Point::new(x_of(i - 1), y_of(series[i - 1])), Point::new(x_of(i), y_of(series[i])), [0.1, 0.1, 0.1]);
    }
    r
}
