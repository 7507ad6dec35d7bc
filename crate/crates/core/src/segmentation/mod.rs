//! Sparsification of an image into connected sub-regions.
//!
//! A [`RegionPartition`] assigns every pixel to exactly one of `m` regions.
//! Partitions come from SLICO ([`segment_slico`]), from a regular grid
//! ([`grid_partition`]) or from a label file ([`io`]).

pub mod io;
mod lab;
mod region_set;
mod slico;

use std::collections::VecDeque;

pub use region_set::RegionSet;
pub use slico::{segment_slico, SlicoParams, DEFAULT_ITERATIONS};

use crate::raster::Image;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPartition {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    members: Vec<Vec<u32>>,
}

impl RegionPartition {
    /// Builds a partition from a row-major label map. Labels must be dense
    /// (every id below the maximum used) and each region 4-connected.
    pub fn from_labels(width: u32, height: u32, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("partition must be at least 1×1"));
        }
        let n = width as usize * height as usize;
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "label map has {} entries, expected {n}",
                labels.len()
            )));
        }
        let m = labels.iter().copied().max().unwrap_or(0) as usize + 1;
        let mut members = vec![Vec::new(); m];
        for (i, &l) in labels.iter().enumerate() {
            members[l as usize].push(i as u32);
        }
        if let Some(empty) = members.iter().position(|r| r.is_empty()) {
            return Err(Error::invalid(format!("region {empty} has no pixels")));
        }
        let p = Self {
            width,
            height,
            labels,
            members,
        };
        if let Some(r) = p.first_disconnected_region() {
            return Err(Error::invalid(format!("region {r} is not 4-connected")));
        }
        Ok(p)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn region_count(&self) -> usize {
        self.members.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Row-major pixel indices of region `r`, ascending.
    pub fn region_pixels(&self, r: usize) -> &[u32] {
        &self.members[r]
    }

    pub fn region_size(&self, r: usize) -> usize {
        self.members[r].len()
    }

    pub fn all(&self) -> RegionSet {
        RegionSet::full(self.region_count())
    }

    /// Mean `(x, y)` of a region's pixel indices.
    pub fn centroid(&self, r: usize) -> (f64, f64) {
        let w = self.width as usize;
        let (sx, sy) = self.members[r].iter().fold((0.0, 0.0), |(sx, sy), &i| {
            (sx + (i as usize % w) as f64, sy + (i as usize / w) as f64)
        });
        let n = self.members[r].len() as f64;
        (sx / n, sy / n)
    }

    fn first_disconnected_region(&self) -> Option<usize> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut seen = vec![false; w * h];
        let mut queue = VecDeque::new();
        for (r, pixels) in self.members.iter().enumerate() {
            let start = pixels[0] as usize;
            seen[start] = true;
            queue.push_back(start);
            let mut reached = 0usize;
            while let Some(i) = queue.pop_front() {
                reached += 1;
                let (x, y) = (i % w, i / w);
                for n in neighbors4(x, y, w, h) {
                    if !seen[n] && self.labels[n] as usize == r {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
            if reached != pixels.len() {
                return Some(r);
            }
        }
        None
    }
}

pub(crate) fn neighbors4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let left = (x > 0).then(|| y * w + x - 1);
    let up = (y > 0).then(|| (y - 1) * w + x);
    let right = (x + 1 < w).then(|| y * w + x + 1);
    let down = (y + 1 < h).then(|| (y + 1) * w + x);
    [left, up, right, down].into_iter().flatten()
}

/// Regular `rows × cols` grid; region ids are row-major.
pub fn grid_partition(width: u32, height: u32, rows: u32, cols: u32) -> Result<RegionPartition> {
    if rows == 0 || cols == 0 || rows > height || cols > width {
        return Err(Error::invalid(format!(
            "{rows}×{cols} grid does not fit a {width}×{height} image"
        )));
    }
    let col_of = |x: u32| ((x as u64 * cols as u64) / width as u64) as u32;
    let row_of = |y: u32| ((y as u64 * rows as u64) / height as u64) as u32;
    let mut labels = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        for x in 0..width {
            labels.push(row_of(y) * cols + col_of(x));
        }
    }
    RegionPartition::from_labels(width, height, labels)
}

/// Copy of `image` where only pixels of regions in `subset` keep their
/// values; every other pixel is set to `baseline` on all channels.
pub fn reveal(image: &Image, partition: &RegionPartition, subset: &RegionSet, baseline: u8) -> Result<Image> {
    if image.width() != partition.width() || image.height() != partition.height() {
        return Err(Error::invalid(format!(
            "partition is {}×{} but image is {}×{}",
            partition.width(),
            partition.height(),
            image.width(),
            image.height()
        )));
    }
    if let Some(max) = subset.max() {
        if max >= partition.region_count() {
            return Err(Error::invalid(format!(
                "region id {max} out of range for {} regions",
                partition.region_count()
            )));
        }
    }
    let mut out = Image::filled(image.width(), image.height(), [baseline; 3])?;
    for r in subset.iter() {
        for &i in partition.region_pixels(r) {
            out.set_pixel_at(i as usize, image.pixel_at(i as usize));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn textured(w: u32, h: u32) -> Image {
        Image::from_fn(w, h, |x, y| [(x * 7 + 1) as u8, (y * 11 + 3) as u8, 200]).unwrap()
    }

    #[test]
    fn grid_covers_every_pixel_once() {
        let p = grid_partition(60, 60, 3, 3).unwrap();
        assert_eq!(p.region_count(), 9);
        let total: usize = (0..9).map(|r| p.region_size(r)).sum();
        assert_eq!(total, 3600);
        assert!((0..9).all(|r| p.region_size(r) == 400));
        assert_eq!(p.label(59, 0), 2);
        assert_eq!(p.label(0, 59), 6);
    }

    #[test]
    fn uneven_grid() {
        let p = grid_partition(10, 7, 3, 4).unwrap();
        assert_eq!(p.region_count(), 12);
        assert!(grid_partition(3, 3, 4, 1).is_err());
    }

    #[test]
    fn from_labels_rejects_gaps_and_disconnection() {
        assert!(RegionPartition::from_labels(2, 1, vec![0, 2]).is_err());
        assert!(RegionPartition::from_labels(3, 1, vec![0, 1, 0]).is_err());
        assert!(RegionPartition::from_labels(3, 1, vec![0, 0, 1]).is_ok());
    }

    #[test]
    fn reveal_identity_and_empty() {
        let img = textured(60, 60);
        let p = grid_partition(60, 60, 3, 3).unwrap();
        assert_eq!(reveal(&img, &p, &p.all(), 0).unwrap(), img);
        let blank = reveal(&img, &p, &RegionSet::new(), 0).unwrap();
        assert_eq!(blank, Image::filled(60, 60, [0; 3]).unwrap());
    }

    #[test]
    fn reveal_single_region_counts() {
        let img = textured(60, 60);
        let p = grid_partition(60, 60, 3, 3).unwrap();
        for r in 0..9 {
            let out = reveal(&img, &p, &RegionSet::from_ids([r]), 0).unwrap();
            let visible = (0..out.pixel_count()).filter(|&i| out.is_visible_at(i, 0)).count();
            assert_eq!(visible, p.region_size(r));
        }
    }

    #[test]
    fn reveal_rejects_out_of_range() {
        let img = textured(6, 6);
        let p = grid_partition(6, 6, 2, 2).unwrap();
        assert!(reveal(&img, &p, &RegionSet::from_ids([4]), 0).is_err());
    }

    proptest! {
        #[test]
        fn reveal_is_local_and_complementary(
            a in proptest::collection::btree_set(0usize..16, 0..16),
            b in proptest::collection::btree_set(0usize..16, 0..16),
        ) {
            let img = textured(16, 16);
            let p = grid_partition(16, 16, 4, 4).unwrap();
            let sa: RegionSet = a.iter().copied().collect();
            let sab: RegionSet = a.iter().chain(b.iter()).copied().collect();
            let ra = reveal(&img, &p, &sa, 0).unwrap();
            let rab = reveal(&img, &p, &sab, 0).unwrap();
            for r in sa.iter() {
                for &i in p.region_pixels(r) {
                    prop_assert_eq!(ra.pixel_at(i as usize), rab.pixel_at(i as usize));
                }
            }
            let rc = reveal(&img, &p, &sa.complement(16), 0).unwrap();
            for i in 0..img.pixel_count() {
                let orig = img.pixel_at(i);
                let hits = (ra.pixel_at(i) == orig) as u8 + (rc.pixel_at(i) == orig) as u8;
                prop_assert_eq!(hits, 1);
            }
        }
    }
}
