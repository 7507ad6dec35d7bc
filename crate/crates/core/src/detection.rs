//! Detector outputs and the explanation target.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, BBox};
use crate::{Error, Result};

/// Opaque category key. For grounding-style detectors the prompt text doubles
/// as the category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Category(String);

impl Category {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Category {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for Category {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub scores: BTreeMap<Category, f64>,
}

impl Detection {
    pub fn new(bbox: BBox, scores: BTreeMap<Category, f64>) -> Result<Self> {
        let d = Self { bbox, scores };
        d.validate()?;
        Ok(d)
    }

    pub fn single(bbox: BBox, category: impl Into<Category>, score: f64) -> Result<Self> {
        Self::new(bbox, BTreeMap::from([(category.into(), score)]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::invalid("detection has no category scores"));
        }
        for (cat, &s) in &self.scores {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid(format!(
                    "confidence {s} for {cat:?} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Highest confidence over all categories.
    pub fn best_score(&self) -> f64 {
        self.scores.values().copied().fold(0.0, f64::max)
    }
}

/// One detector response. `scores_available = false` marks backends that
/// return boxes without meaningful confidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
    pub scores_available: bool,
}

impl Default for DetectionSet {
    fn default() -> Self {
        Self::empty()
    }
}

/// The box in a [`DetectionSet`] that responds most strongly to a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetResponse {
    pub index: usize,
    pub iou: f64,
    /// Target-category confidence, or 1 in IoU-only mode.
    pub class_score: f64,
}

impl TargetResponse {
    pub fn product(&self) -> f64 {
        self.iou * self.class_score
    }
}

impl DetectionSet {
    pub fn empty() -> Self {
        Self {
            detections: Vec::new(),
            scores_available: true,
        }
    }

    pub fn new(detections: Vec<Detection>) -> Self {
        Self {
            detections,
            scores_available: true,
        }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// Confidence of detection `i` for `category`. When scores are unavailable
    /// (or `iou_only` is forced) a box counts with confidence 1 if it names
    /// the category at all.
    pub fn confidence(&self, i: usize, category: &Category, iou_only: bool) -> f64 {
        let det = &self.detections[i];
        if iou_only || !self.scores_available {
            if det.scores.contains_key(category) {
                1.0
            } else {
                0.0
            }
        } else {
            det.scores.get(category).copied().unwrap_or(0.0)
        }
    }

    /// The detection maximizing `iou(target_box, b_i) · s_{c,i}`; the first one
    /// wins ties. `None` for an empty set.
    pub fn best_response(&self, target: &ExplanationTarget, iou_only: bool) -> Option<TargetResponse> {
        let mut best: Option<TargetResponse> = None;
        for (i, det) in self.detections.iter().enumerate() {
            let r = TargetResponse {
                index: i,
                iou: iou(&target.target_box, &det.bbox),
                class_score: self.confidence(i, &target.category, iou_only),
            };
            if best.is_none_or(|b| r.product() > b.product()) {
                best = Some(r);
            }
        }
        best
    }

    /// Keeps at most `n_max` detections, preferring higher best-category
    /// confidence. Order among kept detections is preserved.
    pub fn truncate_to(&mut self, n_max: usize) {
        if self.detections.len() <= n_max {
            return;
        }
        let mut ranked: Vec<usize> = (0..self.detections.len()).collect();
        ranked.sort_by(|&a, &b| {
            self.detections[b]
                .best_score()
                .total_cmp(&self.detections[a].best_score())
                .then(a.cmp(&b))
        });
        let mut keep = vec![false; self.detections.len()];
        for &i in &ranked[..n_max] {
            keep[i] = true;
        }
        let mut it = keep.into_iter();
        self.detections.retain(|_| it.next().unwrap_or(false));
    }
}

/// The `(b_target, c)` pair being explained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationTarget {
    pub target_box: BBox,
    pub category: Category,
}

impl ExplanationTarget {
    pub fn new(target_box: BBox, category: impl Into<Category>) -> Self {
        Self {
            target_box,
            category: category.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        assert!(Detection::single(bx(0., 0., 1., 1.), "a", 1.2).is_err());
        assert!(Detection::new(bx(0., 0., 1., 1.), BTreeMap::new()).is_err());
    }

    #[test]
    fn best_response_prefers_product() {
        let target = ExplanationTarget::new(bx(0., 0., 10., 10.), "cat");
        let set = DetectionSet::new(vec![
            Detection::single(bx(0., 0., 5., 10.), "cat", 0.9).unwrap(), // iou 0.5
            Detection::single(bx(0., 0., 10., 10.), "cat", 0.4).unwrap(),
        ]);
        let best = set.best_response(&target, false).unwrap();
        assert_eq!(best.index, 0);
        assert!((best.product() - 0.45).abs() < 1e-12);
        let iou_only = set.best_response(&target, true).unwrap();
        assert_eq!(iou_only.index, 1);
        assert_eq!(DetectionSet::empty().best_response(&target, false), None);
    }

    #[test]
    fn missing_category_counts_as_zero() {
        let target = ExplanationTarget::new(bx(0., 0., 10., 10.), "cat");
        let set = DetectionSet::new(vec![Detection::single(bx(0., 0., 10., 10.), "dog", 1.0).unwrap()]);
        assert_eq!(set.best_response(&target, false).unwrap().product(), 0.0);
        assert_eq!(set.best_response(&target, true).unwrap().product(), 0.0);
    }

    #[test]
    fn truncate_keeps_most_confident() {
        let mut set = DetectionSet::new(
            [0.1, 0.7, 0.3, 0.9]
                .iter()
                .map(|&s| Detection::single(bx(0., 0., 1., 1.), "a", s).unwrap())
                .collect(),
        );
        set.truncate_to(2);
        let kept: Vec<f64> = set.detections.iter().map(|d| d.best_score()).collect();
        assert_eq!(kept, vec![0.7, 0.9]);
    }
}
