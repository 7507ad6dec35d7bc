//! Analytic stand-in detector.
//!
//! Each object reports the fraction `v` of its box that is visible (any
//! channel differs from the baseline). The emitted box is the tight box of
//! the visible object pixels and the confidence is `v^p · (1 - w·u)`, where
//! `u` is the visible fraction of an optional inhibitor region. Objects with
//! nothing visible emit no detection.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Detector, DEFAULT_N_MAX};
use crate::detection::{Category, Detection, DetectionSet};
use crate::geometry::BBox;
use crate::raster::Image;
use crate::{DetectorError, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inhibitor {
    pub region: BBox,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobObject {
    pub region: BBox,
    pub category: Category,
    #[serde(default = "unit_exponent")]
    pub exponent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inhibitor: Option<Inhibitor>,
}

fn unit_exponent() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobWorld {
    pub objects: Vec<BlobObject>,
    #[serde(default)]
    pub baseline: u8,
}

impl BlobWorld {
    pub fn single(region: BBox, category: impl Into<Category>, exponent: f64) -> Self {
        Self {
            objects: vec![BlobObject {
                region,
                category: category.into(),
                exponent,
                inhibitor: None,
            }],
            baseline: 0,
        }
    }

    pub fn with_inhibitor(mut self, region: BBox, weight: f64) -> Self {
        if let Some(o) = self.objects.last_mut() {
            o.inhibitor = Some(Inhibitor { region, weight });
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, o) in self.objects.iter().enumerate() {
            if !o.exponent.is_finite() || o.exponent < 0.0 {
                return Err(Error::invalid(format!(
                    "object {i}: exponent {} must be finite and ≥ 0",
                    o.exponent
                )));
            }
            if let Some(inh) = &o.inhibitor {
                if !(0.0..=1.0).contains(&inh.weight) {
                    return Err(Error::invalid(format!(
                        "object {i}: inhibitor weight {} outside [0, 1]",
                        inh.weight
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that every object region lies inside a `width × height` image.
    pub fn validate_bounds(&self, width: u32, height: u32) -> Result<()> {
        for (i, o) in self.objects.iter().enumerate() {
            if o.region.x2() > width as f64 || o.region.y2() > height as f64 {
                return Err(Error::invalid(format!(
                    "object {i} region {} exceeds the {width}×{height} image",
                    o.region
                )));
            }
        }
        Ok(())
    }

    pub fn categories(&self) -> BTreeSet<Category> {
        self.objects.iter().map(|o| o.category.clone()).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let world: BlobWorld = serde_json::from_slice(&bytes)?;
        world.validate()?;
        Ok(world)
    }
}

struct Visibility {
    fraction: f64,
    extent: Option<(u32, u32, u32, u32)>,
}

fn visibility(image: &Image, region: &BBox, baseline: u8) -> Visibility {
    let Some((x0, y0, x1, y1)) = region.pixel_span(image.width(), image.height()) else {
        return Visibility {
            fraction: 0.0,
            extent: None,
        };
    };
    let total = (x1 - x0 + 1) as usize * (y1 - y0 + 1) as usize;
    let mut visible = 0usize;
    let mut extent: Option<(u32, u32, u32, u32)> = None;
    for y in y0..=y1 {
        for x in x0..=x1 {
            if image.is_visible_at(image.index(x, y), baseline) {
                visible += 1;
                extent = Some(match extent {
                    None => (x, y, x, y),
                    Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                });
            }
        }
    }
    Visibility {
        fraction: visible as f64 / total as f64,
        extent,
    }
}

pub struct BlobDetector {
    world: BlobWorld,
    categories: BTreeSet<Category>,
    n_max: usize,
}

impl BlobDetector {
    pub fn new(world: BlobWorld) -> Self {
        let categories = world.categories();
        Self {
            world,
            categories,
            n_max: DEFAULT_N_MAX,
        }
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max.max(1);
        self
    }

    pub fn world(&self) -> &BlobWorld {
        &self.world
    }
}

impl Detector for BlobDetector {
    fn detect(&self, image: &Image) -> Result<DetectionSet, DetectorError> {
        let baseline = self.world.baseline;
        let mut detections = Vec::new();
        for o in &self.world.objects {
            let vis = visibility(image, &o.region, baseline);
            let Some((x0, y0, x1, y1)) = vis.extent else {
                continue;
            };
            let damping = o.inhibitor.as_ref().map_or(1.0, |inh| {
                1.0 - inh.weight * visibility(image, &inh.region, baseline).fraction
            });
            let score = (vis.fraction.powf(o.exponent) * damping).clamp(0.0, 1.0);
            let mut scores: BTreeMap<Category, f64> =
                self.categories.iter().map(|c| (c.clone(), 0.0)).collect();
            scores.insert(o.category.clone(), score);
            detections.push(Detection {
                bbox: BBox::from_pixel_extent(x0, y0, x1, y1),
                scores,
            });
        }
        let mut set = DetectionSet::new(detections);
        set.truncate_to(self.n_max);
        Ok(set)
    }

    fn fingerprint(&self) -> String {
        let desc = serde_json::to_string(&self.world).unwrap_or_default();
        format!("blob:{:016x}", fnv1a(desc.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf29ce484222325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x100000001b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{grid_partition, reveal, RegionSet};
    use proptest::prelude::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn canvas(w: u32, h: u32) -> Image {
        Image::from_fn(w, h, |x, y| [(x % 200) as u8 + 20, (y % 200) as u8 + 20, 90]).unwrap()
    }

    fn score(set: &DetectionSet, cat: &str) -> f64 {
        set.detections[0].scores[&Category::from(cat)]
    }

    #[test]
    fn blank_image_detects_nothing() {
        let det = BlobDetector::new(BlobWorld::single(bx(10., 10., 30., 30.), "dog", 1.0));
        let blank = Image::filled(40, 40, [0; 3]).unwrap();
        assert!(det.detect(&blank).unwrap().is_empty());
    }

    #[test]
    fn full_and_half_visibility() {
        let det = BlobDetector::new(BlobWorld::single(bx(10., 10., 30., 30.), "dog", 1.0));
        let img = canvas(40, 40);
        let full = det.detect(&img).unwrap();
        assert_eq!(full.len(), 1);
        assert_eq!(full.detections[0].bbox, bx(10., 10., 30., 30.));
        assert_eq!(score(&full, "dog"), 1.0);

        // keep columns 0..20 (the blob's left half is columns 10..20)
        let p = grid_partition(40, 40, 1, 2).unwrap();
        let half = reveal(&img, &p, &RegionSet::from_ids([0]), 0).unwrap();
        let out = det.detect(&half).unwrap();
        assert_eq!(out.detections[0].bbox, bx(10., 10., 20., 30.));
        // 200 of 400 pixels visible
        assert_eq!(score(&out, "dog"), 200.0 / 400.0);
    }

    #[test]
    fn exponent_and_inhibitor() {
        let img = canvas(40, 40);
        let p = grid_partition(40, 40, 1, 2).unwrap();
        let half = reveal(&img, &p, &RegionSet::from_ids([0]), 0).unwrap();
        let det = BlobDetector::new(BlobWorld::single(bx(10., 10., 30., 30.), "dog", 2.0));
        assert_eq!(score(&det.detect(&half).unwrap(), "dog"), 0.25);

        let world = BlobWorld::single(bx(10., 10., 30., 30.), "dog", 1.0)
            .with_inhibitor(bx(0., 0., 5., 5.), 0.6);
        let det = BlobDetector::new(world);
        assert!((score(&det.detect(&img).unwrap(), "dog") - 0.4).abs() < 1e-12);
    }

    #[test]
    fn other_categories_score_zero() {
        let mut world = BlobWorld::single(bx(0., 0., 4., 4.), "dog", 1.0);
        world.objects.push(BlobObject {
            region: bx(5., 5., 9., 9.),
            category: "cat".into(),
            exponent: 1.0,
            inhibitor: None,
        });
        let out = BlobDetector::new(world).detect(&canvas(10, 10)).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.detections[0].scores[&Category::from("cat")], 0.0);
        assert_eq!(out.detections[1].scores[&Category::from("dog")], 0.0);
    }

    #[test]
    fn validation() {
        let w = BlobWorld::single(bx(0., 0., 50., 5.), "a", -1.0);
        assert!(w.validate().is_err());
        assert!(w.validate_bounds(40, 40).is_err());
        let w = BlobWorld::single(bx(0., 0., 5., 5.), "a", 1.0).with_inhibitor(bx(0., 0., 1., 1.), 2.0);
        assert!(w.validate().is_err());
    }

    proptest! {
        #[test]
        fn revealing_more_never_lowers_score(
            small in proptest::collection::btree_set(0usize..16, 0..16),
            extra in proptest::collection::btree_set(0usize..16, 0..16),
            p in 0.0f64..3.0,
        ) {
            let img = canvas(32, 32);
            let part = grid_partition(32, 32, 4, 4).unwrap();
            let det = BlobDetector::new(BlobWorld::single(bx(5., 7., 23., 26.), "dog", p));
            let a: RegionSet = small.iter().copied().collect();
            let b: RegionSet = small.iter().chain(extra.iter()).copied().collect();
            let sa = det.detect(&reveal(&img, &part, &a, 0).unwrap()).unwrap();
            let sb = det.detect(&reveal(&img, &part, &b, 0).unwrap()).unwrap();
            let s = |set: &DetectionSet| set.detections.first().map_or(0.0, |d| d.scores[&Category::from("dog")]);
            prop_assert!(s(&sb) >= s(&sa));
            prop_assert_eq!(sa.clone(), det.detect(&reveal(&img, &part, &a, 0).unwrap()).unwrap());
        }
    }
}
