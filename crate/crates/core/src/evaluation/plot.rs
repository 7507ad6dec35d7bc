//! Minimal line plots of step curves, for eyeballing a sweep.

use super::{ResponseTrace, Variant};
use crate::raster::Image;
use crate::Result;

const MARGIN: i64 = 12;

fn color(trace: &ResponseTrace, variant: Variant) -> [u8; 3] {
    use super::Direction::*;
    match (trace.direction, variant) {
        (Insertion, Variant::Clue) => [200, 30, 30],
        (Insertion, Variant::Class) => [240, 140, 40],
        (Insertion, Variant::Iou) => [230, 200, 60],
        (Deletion, Variant::Clue) => [30, 60, 200],
        (Deletion, Variant::Class) => [60, 160, 220],
        (Deletion, Variant::Iou) => [90, 190, 120],
    }
}

fn line(img: &mut Image, (x0, y0): (i64, i64), (x1, y1): (i64, i64), rgb: [u8; 3]) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            let idx = img.index(x as u32, y as u32);
            img.set_pixel_at(idx, rgb);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Draws every variant of every trace on one white canvas, x = step count,
/// y = response in `[0, 1]`. Insertion curves are warm, deletion cool.
pub fn render_curves_png(traces: &[&ResponseTrace], width: u32, height: u32) -> Result<Vec<u8>> {
    let mut img = Image::filled(width.max(2 * MARGIN as u32 + 2), height.max(2 * MARGIN as u32 + 2), [255; 3])?;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (left, right, top, bottom) = (MARGIN, w - MARGIN, MARGIN, h - MARGIN);
    line(&mut img, (left, bottom), (right, bottom), [0; 3]);
    line(&mut img, (left, bottom), (left, top), [0; 3]);

    for trace in traces {
        let last = trace.steps.last().map_or(1, |s| s.count.max(1)) as f64;
        for variant in Variant::ALL {
            let to_px = |count: usize, v: f64| {
                let x = left + ((count as f64 / last) * (right - left) as f64).round() as i64;
                let y = bottom - (v.clamp(0.0, 1.0) * (bottom - top) as f64).round() as i64;
                (x, y)
            };
            let rgb = color(trace, variant);
            for pair in trace.steps.windows(2) {
                let a = to_px(pair[0].count, pair[0].value(variant));
                let b = to_px(pair[1].count, pair[1].value(variant));
                line(&mut img, a, b, rgb);
            }
        }
    }
    img.to_png_bytes()
}
