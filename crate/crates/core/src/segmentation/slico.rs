//! SLICO: SLIC superpixels with per-cluster adaptive color normalization.
//!
//! Seeds start on a regular grid, are nudged to the lowest-gradient pixel of
//! their 3×3 neighbourhood, and are refined by local k-means in
//! (L, a, b, x, y). The color term of each cluster is divided by the largest
//! color distance seen in that cluster on the previous iteration, so no
//! compactness parameter has to be chosen. Fragments smaller than a quarter
//! of the nominal region size are merged into their largest neighbour, and
//! on heavily textured images the smallest remaining fragments keep merging
//! until at most 1.3× the requested count is left.

use std::collections::VecDeque;

use super::lab::rgb_to_lab;
use super::{neighbors4, RegionPartition};
use crate::raster::Image;
use crate::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlicoParams {
    pub target_regions: usize,
    pub iterations: usize,
}

impl SlicoParams {
    pub fn new(target_regions: usize) -> Self {
        Self {
            target_regions,
            iterations: DEFAULT_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

const UNASSIGNED: u32 = u32::MAX;

pub fn segment_slico(image: &Image, target_regions: usize, iterations: usize) -> Result<RegionPartition> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let n = w * h;
    if w < 2 || h < 2 {
        return Err(Error::invalid(format!(
            "SLICO needs at least a 2×2 image, got {w}×{h}"
        )));
    }
    if target_regions < 2 || target_regions > n {
        return Err(Error::invalid(format!(
            "target region count {target_regions} outside [2, {n}]"
        )));
    }
    if iterations == 0 {
        return Err(Error::invalid("SLICO needs at least one iteration"));
    }

    let lab: Vec<[f64; 3]> = (0..n).map(|i| rgb_to_lab(image.pixel_at(i))).collect();
    let mut centers = seed_centers(&lab, w, h, target_regions);
    let k = centers.len();

    let step = (n as f64 / target_regions as f64).sqrt();
    let inv_spatial = 1.0 / (step * step);
    let (rows, cols) = grid_dims(w, h, target_regions);
    let cell = (w as f64 / cols as f64).max(h as f64 / rows as f64);
    let radius = cell.ceil() as i64;

    let mut max_color = vec![100.0f64; k];
    let mut labels = vec![UNASSIGNED; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut color_dist = vec![0.0f64; n];

    for _ in 0..iterations {
        labels.fill(UNASSIGNED);
        dist.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.round() as i64, c.y.round() as i64);
            let x0 = (cx - radius).max(0) as usize;
            let x1 = ((cx + radius) as usize).min(w - 1);
            let y0 = (cy - radius).max(0) as usize;
            let y1 = ((cy + radius) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * w + x;
                    let dc = sq_dist(&lab[i], &c.lab);
                    let ds = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                    let d = dc / max_color[ci] + ds * inv_spatial;
                    // strict comparison: ties go to the lowest cluster id
                    if d < dist[i] {
                        dist[i] = d;
                        labels[i] = ci as u32;
                        color_dist[i] = dc;
                    }
                }
            }
        }

        // adaptive color normalization, floored at 1 for flat clusters
        max_color.fill(1.0);
        let mut sums = vec![[0.0f64; 6]; k];
        for i in 0..n {
            let l = labels[i];
            if l == UNASSIGNED {
                continue;
            }
            let l = l as usize;
            max_color[l] = max_color[l].max(color_dist[i]);
            let s = &mut sums[l];
            s[0] += lab[i][0];
            s[1] += lab[i][1];
            s[2] += lab[i][2];
            s[3] += (i % w) as f64;
            s[4] += (i / w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                c.lab = [s[0] / s[5], s[1] / s[5], s[2] / s[5]];
                c.x = s[3] / s[5];
                c.y = s[4] / s[5];
            }
        }
    }

    let min_size = (n as f64 / target_regions as f64) / 4.0;
    let max_regions = (target_regions as f64 * 1.3).floor() as usize;
    let relabeled = enforce_connectivity(&labels, w, h, min_size, max_regions);
    RegionPartition::from_labels(w as u32, h as u32, relabeled)
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// `(rows, cols)` of the seed grid, chosen so cells are near-square and
/// `rows · cols ≈ target`.
fn grid_dims(w: usize, h: usize, target: usize) -> (usize, usize) {
    let cols = ((target as f64 * w as f64 / h as f64).sqrt().round() as usize).clamp(1, w);
    let rows = ((target as f64 / cols as f64).round() as usize).clamp(1, h);
    (rows, cols)
}

fn gradient(lab: &[[f64; 3]], w: usize, h: usize, x: usize, y: usize) -> f64 {
    let at = |x: usize, y: usize| &lab[y * w + x];
    let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
    let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
    sq_dist(at(xr, y), at(xl, y)) + sq_dist(at(x, yd), at(x, yu))
}

fn seed_centers(lab: &[[f64; 3]], w: usize, h: usize, target: usize) -> Vec<Center> {
    let (rows, cols) = grid_dims(w, h, target);
    let (sx, sy) = (w as f64 / cols as f64, h as f64 / rows as f64);
    let mut centers = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let x = (c as f64 + 0.5) * sx - 0.5;
            let y = (r as f64 + 0.5) * sy - 0.5;
            let (px, py) = (
                (x.round() as usize).min(w - 1),
                (y.round() as usize).min(h - 1),
            );
            let mut best = (gradient(lab, w, h, px, py), px, py);
            // on cells narrower than 3 px a nudge could land on a neighbour's seed
            let nudge = sx >= 3.0 && sy >= 3.0;
            for ny in py.saturating_sub(1)..=(py + 1).min(h - 1) {
                for nx in px.saturating_sub(1)..=(px + 1).min(w - 1) {
                    let g = gradient(lab, w, h, nx, ny);
                    if nudge && g < best.0 {
                        best = (g, nx, ny);
                    }
                }
            }
            let (gx, gy) = if (best.1, best.2) == (px, py) {
                (x, y)
            } else {
                (best.1 as f64, best.2 as f64)
            };
            centers.push(Center {
                lab: lab[best.2 * w + best.1],
                x: gx,
                y: gy,
            });
        }
    }
    centers
}

/// Splits clusters into 4-connected components, merges components smaller
/// than `min_size` (and unassigned pixels) into their largest adjacent
/// component, keeps merging the smallest component while more than
/// `max_regions` remain, and relabels densely in row-major order of first
/// pixel.
fn enforce_connectivity(labels: &[u32], w: usize, h: usize, min_size: f64, max_regions: usize) -> Vec<u32> {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut pixels: Vec<Vec<usize>> = Vec::new();
    let mut unassigned: Vec<bool> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = pixels.len();
        let mut members = Vec::new();
        comp[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for nb in neighbors4(i % w, i / w, w, h) {
                if comp[nb] == usize::MAX && labels[nb] == labels[start] {
                    comp[nb] = id;
                    queue.push_back(nb);
                }
            }
        }
        pixels.push(members);
        unassigned.push(labels[start] == UNASSIGNED);
    }

    let count = pixels.len();
    let mut parent: Vec<usize> = (0..count).collect();
    let find = |parent: &mut [usize], mut c: usize| {
        while parent[c] != c {
            parent[c] = parent[parent[c]];
            c = parent[c];
        }
        c
    };

    // smallest first, so fragments grow into their surroundings gradually
    let mut order: Vec<usize> = (0..count)
        .filter(|&c| unassigned[c] || (pixels[c].len() as f64) < min_size)
        .collect();
    order.sort_by_key(|&c| (pixels[c].len(), c));
    let mut live = count;
    for c in order {
        let root = find(&mut parent, c);
        if !unassigned[root] && pixels[root].len() as f64 >= min_size {
            continue;
        }
        if merge_into_neighbor(root, &comp, &mut pixels, &mut parent, &find, w, h) {
            live -= 1;
        }
    }
    while live > max_regions {
        let smallest = (0..count)
            .filter(|&c| parent[c] == c)
            .min_by_key(|&c| (pixels[c].len(), c))
            .expect("live components remain");
        if !merge_into_neighbor(smallest, &comp, &mut pixels, &mut parent, &find, w, h) {
            break;
        }
        live -= 1;
    }

    let mut dense = vec![u32::MAX; count];
    let mut next = 0u32;
    let mut out = vec![0u32; n];
    for i in 0..n {
        let r = find(&mut parent, comp[i]);
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
        }
        out[i] = dense[r];
    }
    out
}

/// Moves every pixel of component `root` into its largest adjacent
/// component (lowest id on ties). Returns false if it has no neighbour.
fn merge_into_neighbor(
    root: usize,
    comp: &[usize],
    pixels: &mut [Vec<usize>],
    parent: &mut [usize],
    find: &impl Fn(&mut [usize], usize) -> usize,
    w: usize,
    h: usize,
) -> bool {
    let mut best: Option<usize> = None;
    for &i in &pixels[root] {
        for nb in neighbors4(i % w, i / w, w, h) {
            let r = find(parent, comp[nb]);
            if r == root {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let (ls, lb) = (pixels[r].len(), pixels[b].len());
                    ls > lb || (ls == lb && r < b)
                }
            };
            if better {
                best = Some(r);
            }
        }
    }
    let Some(target) = best else {
        return false;
    };
    let moved = std::mem::take(&mut pixels[root]);
    pixels[target].extend(moved);
    parent[root] = target;
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_keeps_grid() {
        let img = Image::filled(60, 60, [128, 128, 128]).unwrap();
        let p = segment_slico(&img, 9, DEFAULT_ITERATIONS).unwrap();
        assert_eq!(p.region_count(), 9);
        let mut seeds: Vec<(f64, f64)> = (0..3)
            .flat_map(|r| (0..3).map(move |c| (c as f64 * 20.0 + 9.5, r as f64 * 20.0 + 9.5)))
            .collect();
        for r in 0..9 {
            let (cx, cy) = p.centroid(r);
            let (i, d) = seeds
                .iter()
                .enumerate()
                .map(|(i, s)| (i, ((s.0 - cx).powi(2) + (s.1 - cy).powi(2)).sqrt()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d <= 2.0, "region {r} centroid ({cx}, {cy}) is {d} px from seed");
            seeds.remove(i);
            assert!((p.region_size(r) as i64 - 400).abs() <= 40);
        }
    }

    #[test]
    fn two_tone_splits_at_edge() {
        let (w, h) = (40u32, 20u32);
        let img = Image::from_fn(w, h, |x, _| if x < w / 2 { [220, 40, 40] } else { [30, 60, 200] }).unwrap();
        let p = segment_slico(&img, 2, DEFAULT_ITERATIONS).unwrap();
        assert_eq!(p.region_count(), 2);
        for y in 0..h {
            let boundary = (1..w).find(|&x| p.label(x, y) != p.label(x - 1, y)).unwrap();
            assert!((boundary as i64 - (w / 2) as i64).abs() <= 1, "row {y} boundary {boundary}");
        }
    }

    #[test]
    fn one_region_per_pixel() {
        let img = Image::from_fn(5, 4, |x, y| [(x * 40) as u8, (y * 60) as u8, 7]).unwrap();
        let p = segment_slico(&img, 20, 3).unwrap();
        assert_eq!(p.region_count(), 20);
        assert!((0..20).all(|r| p.region_size(r) == 1));
        assert!(segment_slico(&img, 21, 3).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let tiny = Image::filled(1, 5, [1, 2, 3]).unwrap();
        assert!(segment_slico(&tiny, 2, 1).is_err());
        let img = Image::filled(8, 8, [1, 2, 3]).unwrap();
        assert!(segment_slico(&img, 1, 1).is_err());
        assert!(segment_slico(&img, 4, 0).is_err());
    }

    #[test]
    fn textured_image_count_and_determinism() {
        let img = Image::from_fn(96, 80, |x, y| {
            let v = ((x / 12 + y / 10) % 3) as u8;
            [40 + v * 80, 200 - v * 60, ((x * 3 + y * 5) % 50) as u8 + 20]
        })
        .unwrap();
        for m in [16usize, 40, 100] {
            let a = segment_slico(&img, m, DEFAULT_ITERATIONS).unwrap();
            let b = segment_slico(&img, m, DEFAULT_ITERATIONS).unwrap();
            assert_eq!(a, b);
            let k = a.region_count() as f64;
            assert!((k - m as f64).abs() <= 0.3 * m as f64, "m={m} got {k}");
        }
    }
}
