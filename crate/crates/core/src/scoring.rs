//! The set function being maximized.
//!
//! For a subset `S` of regions:
//!
//! * clue score: best `IoU(b_target, b_i) · s_{c,i}` over the detections on
//!   the image with only `S` revealed (0 when nothing is detected);
//! * collaboration score: one minus the same quantity on the image with
//!   `V ∖ S` revealed (1 when nothing is detected);
//! * `F(S)` = clue + collaboration.
//!
//! Every candidate box participates in the max, however low its confidence.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::detection::{DetectionSet, ExplanationTarget};
use crate::detector::Detector;
use crate::raster::Image;
use crate::segmentation::{reveal, RegionPartition, RegionSet};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub clue: f64,
    pub collaboration: f64,
    pub total: f64,
}

impl ScoreBreakdown {
    pub fn new(clue: f64, collaboration: f64) -> Self {
        Self {
            clue,
            collaboration,
            total: clue + collaboration,
        }
    }
}

/// Which part of the objective drives the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    #[default]
    Combined,
    ClueOnly,
    CollaborationOnly,
}

impl ScoreMode {
    pub fn select(self, b: &ScoreBreakdown) -> f64 {
        match self {
            ScoreMode::Combined => b.total,
            ScoreMode::ClueOnly => b.clue,
            ScoreMode::CollaborationOnly => b.collaboration,
        }
    }
}

pub fn clue_score(detections: &DetectionSet, target: &ExplanationTarget, iou_only: bool) -> f64 {
    detections
        .best_response(target, iou_only)
        .map_or(0.0, |r| r.product())
}

pub fn collaboration_score(
    detections_on_complement: &DetectionSet,
    target: &ExplanationTarget,
    iou_only: bool,
) -> f64 {
    1.0 - clue_score(detections_on_complement, target, iou_only)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringOptions {
    pub baseline: u8,
    /// Treat every returned box of the target category as fully confident.
    pub iou_only: bool,
    pub mode: ScoreMode,
    /// Cache detector responses per revealed subset.
    pub memoize: bool,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        Self {
            baseline: 0,
            iou_only: false,
            mode: ScoreMode::Combined,
            memoize: false,
        }
    }
}

/// `F` bound to one image, partition, target and detector, with counters
/// for set-function evaluations and detector forward passes.
pub struct Objective<'a> {
    detector: &'a dyn Detector,
    image: &'a Image,
    partition: &'a RegionPartition,
    target: &'a ExplanationTarget,
    options: ScoringOptions,
    evaluations: AtomicUsize,
    detector_calls: AtomicUsize,
    cache: Option<Mutex<HashMap<RegionSet, DetectionSet>>>,
}

impl<'a> Objective<'a> {
    pub fn new(
        detector: &'a dyn Detector,
        image: &'a Image,
        partition: &'a RegionPartition,
        target: &'a ExplanationTarget,
        options: ScoringOptions,
    ) -> Self {
        Self {
            detector,
            image,
            partition,
            target,
            options,
            evaluations: AtomicUsize::new(0),
            detector_calls: AtomicUsize::new(0),
            cache: options.memoize.then(|| Mutex::new(HashMap::new())),
        }
    }

    pub fn region_count(&self) -> usize {
        self.partition.region_count()
    }

    pub fn options(&self) -> &ScoringOptions {
        &self.options
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn detector_calls(&self) -> usize {
        self.detector_calls.load(Ordering::Relaxed)
    }

    fn detect_revealed(&self, revealed: &RegionSet) -> Result<DetectionSet> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lock().expect("cache lock").get(revealed) {
                return Ok(hit.clone());
            }
        }
        let masked = reveal(self.image, self.partition, revealed, self.options.baseline)?;
        self.detector_calls.fetch_add(1, Ordering::Relaxed);
        let dets = self.detector.detect(&masked)?;
        if let Some(cache) = &self.cache {
            cache
                .lock()
                .expect("cache lock")
                .insert(revealed.clone(), dets.clone());
        }
        Ok(dets)
    }

    /// Clue and collaboration scores of `subset`; two detector passes unless cached.
    pub fn breakdown(&self, subset: &RegionSet) -> Result<ScoreBreakdown> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let iou_only = self.options.iou_only;
        let inside = self.detect_revealed(subset)?;
        let outside = self.detect_revealed(&subset.complement(self.region_count()))?;
        Ok(ScoreBreakdown::new(
            clue_score(&inside, self.target, iou_only),
            collaboration_score(&outside, self.target, iou_only),
        ))
    }

    /// The quantity the search maximizes under the configured [`ScoreMode`].
    pub fn value(&self, subset: &RegionSet) -> Result<f64> {
        Ok(self.options.mode.select(&self.breakdown(subset)?))
    }
}

/// `F(S)` with default options (baseline 0, all boxes, no cache).
pub fn submodular_value(
    detector: &dyn Detector,
    image: &Image,
    partition: &RegionPartition,
    subset: &RegionSet,
    target: &ExplanationTarget,
) -> Result<ScoreBreakdown> {
    Objective::new(detector, image, partition, target, ScoringOptions::default()).breakdown(subset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Detection;
    use crate::detector::blob::{BlobDetector, BlobWorld};
    use crate::detector::CountingDetector;
    use crate::geometry::{iou, BBox};
    use crate::segmentation::grid_partition;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn target() -> ExplanationTarget {
        ExplanationTarget::new(bx(0., 0., 10., 10.), "dog")
    }

    /// A box with the requested IoU against the 10×10 target: `(0,0,10,10q)`.
    fn det_with(iou_val: f64, score: f64) -> Detection {
        let d = Detection::single(bx(0., 0., 10., 10.0 * iou_val), "dog", score).unwrap();
        assert!((iou(&d.bbox, &target().target_box) - iou_val).abs() < 1e-12);
        d
    }

    #[test]
    fn clue_examples() {
        assert_eq!(clue_score(&DetectionSet::empty(), &target(), false), 0.0);
        let exact = DetectionSet::new(vec![Detection::single(bx(0., 0., 10., 10.), "dog", 0.8).unwrap()]);
        assert_eq!(clue_score(&exact, &target(), false), 0.8);
        let two = DetectionSet::new(vec![det_with(0.5, 0.9), det_with(0.9, 0.4)]);
        let expected = [0.5 * 0.9, 0.9 * 0.4].into_iter().fold(0.0, f64::max);
        assert!((clue_score(&two, &target(), false) - expected).abs() < 1e-12);
        assert!((expected - 0.45).abs() < 1e-12);
    }

    #[test]
    fn collaboration_examples() {
        assert_eq!(collaboration_score(&DetectionSet::empty(), &target(), false), 1.0);
        let perfect = DetectionSet::new(vec![Detection::single(bx(0., 0., 10., 10.), "dog", 1.0).unwrap()]);
        assert_eq!(collaboration_score(&perfect, &target(), false), 0.0);
        let one = DetectionSet::new(vec![det_with(0.6, 0.5)]);
        assert!((collaboration_score(&one, &target(), false) - 0.70).abs() < 1e-12);
    }

    #[test]
    fn iou_only_substitutes_unit_confidence() {
        let mut set = DetectionSet::new(vec![det_with(0.5, 0.1)]);
        set.scores_available = false;
        assert_eq!(clue_score(&set, &target(), false), 0.5);
        set.scores_available = true;
        assert!((clue_score(&set, &target(), true) - 0.5).abs() < 1e-12);
    }

    fn canvas() -> Image {
        Image::from_fn(40, 40, |x, y| [x as u8 + 30, y as u8 + 30, 77]).unwrap()
    }

    #[test]
    fn empty_full_and_half_subsets() {
        let blob = bx(10., 10., 30., 30.);
        let det = CountingDetector::new(BlobDetector::new(BlobWorld::single(blob, "dog", 1.0)));
        let img = canvas();
        let t = ExplanationTarget::new(blob, "dog");
        // two columns split at x = 20, which halves the blob
        let p = grid_partition(40, 40, 1, 2).unwrap();

        let empty = submodular_value(&det, &img, &p, &RegionSet::new(), &t).unwrap();
        assert_eq!((empty.clue, empty.collaboration, empty.total), (0.0, 0.0, 0.0));
        assert_eq!(det.calls(), 2);

        let full = submodular_value(&det, &img, &p, &p.all(), &t).unwrap();
        assert_eq!((full.clue, full.collaboration, full.total), (1.0, 1.0, 2.0));

        let half = submodular_value(&det, &img, &p, &RegionSet::from_ids([0]), &t).unwrap();
        let left = iou(&bx(10., 10., 20., 30.), &blob) * 0.5;
        let right = iou(&bx(20., 10., 30., 30.), &blob) * 0.5;
        assert!((half.clue - left).abs() < 1e-12);
        assert!((half.collaboration - (1.0 - right)).abs() < 1e-12);
        assert!((half.total - half.clue - half.collaboration).abs() < 1e-15);
    }

    #[test]
    fn memoization_skips_repeat_passes() {
        let blob = bx(10., 10., 30., 30.);
        let det = BlobDetector::new(BlobWorld::single(blob, "dog", 1.0));
        let img = canvas();
        let t = ExplanationTarget::new(blob, "dog");
        let p = grid_partition(40, 40, 2, 2).unwrap();
        let opts = ScoringOptions {
            memoize: true,
            ..Default::default()
        };
        let obj = Objective::new(&det, &img, &p, &t, opts);
        let s = RegionSet::from_ids([1]);
        let a = obj.breakdown(&s).unwrap();
        let b = obj.breakdown(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(obj.evaluations(), 2);
        assert_eq!(obj.detector_calls(), 2);
    }

    #[test]
    fn modes_select_components() {
        let b = ScoreBreakdown::new(0.25, 0.5);
        assert_eq!(ScoreMode::Combined.select(&b), 0.75);
        assert_eq!(ScoreMode::ClueOnly.select(&b), 0.25);
        assert_eq!(ScoreMode::CollaborationOnly.select(&b), 0.5);
    }
}
