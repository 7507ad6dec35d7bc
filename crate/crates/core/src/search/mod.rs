//! Greedy ordering of all sub-regions and the resulting attribution.
//!
//! Each rank adds the region whose inclusion maximizes `F`; all remaining
//! candidates of a rank are scored (possibly in parallel) before the winner
//! is chosen, and ties go to the lowest region id. Ordering all `m` regions
//! costs exactly `m(m+1)/2` evaluations of `F`.
//!
//! Attribution scores follow the marginal-effect recurrence
//! `A_1 = b_base`, `A_i = A_{i-1} - |F(S_[i]) - F(S_[i-1])|`, and are
//! min-max normalized into the saliency map.

mod exhaustive;
mod saliency;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exhaustive::{bound_check, brute_force_best, BoundReport, GREEDY_BOUND, MAX_EXHAUSTIVE_REGIONS};
pub use saliency::{normalize_attribution, rasterize, SaliencyMap};

use crate::detection::ExplanationTarget;
use crate::detector::Detector;
use crate::raster::Image;
use crate::scoring::{Objective, ScoreMode, ScoringOptions};
use crate::segmentation::{RegionPartition, RegionSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub scoring: ScoringOptions,
    /// Concurrent candidate evaluations per rank.
    pub workers: usize,
    pub b_base: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            scoring: ScoringOptions::default(),
            workers: 1,
            b_base: 0.0,
        }
    }
}

impl SearchOptions {
    pub fn with_mode(mut self, mode: ScoreMode) -> Self {
        self.scoring.mode = mode;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Evaluations of the set function.
    pub evaluations: usize,
    /// Detector forward passes actually issued.
    pub detector_calls: usize,
}

/// What was computed before a backend failure interrupted the search.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialTrace {
    pub region_count: usize,
    pub order: Vec<usize>,
    pub f_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub order: Vec<usize>,
    pub raw_scores: Vec<f64>,
    pub f_trace: Vec<f64>,
    pub normalized: Vec<f64>,
    pub saliency: SaliencyMap,
    pub target: ExplanationTarget,
    pub detector_fingerprint: String,
    pub stats: SearchStats,
}

/// JSON form of an [`AttributionResult`]; the saliency map is stored
/// separately and can be rebuilt from the partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub order: Vec<usize>,
    pub raw_scores: Vec<f64>,
    pub f_trace: Vec<f64>,
    pub normalized: Vec<f64>,
    pub m: usize,
    pub target: ExplanationTarget,
    pub detector_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<SearchStats>,
}

impl AttributionResult {
    pub fn region_count(&self) -> usize {
        self.order.len()
    }

    /// Rank (0-based) of each region id.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (rank, &r) in self.order.iter().enumerate() {
            ranks[r] = rank;
        }
        ranks
    }

    pub fn to_record(&self) -> AttributionRecord {
        AttributionRecord {
            order: self.order.clone(),
            raw_scores: self.raw_scores.clone(),
            f_trace: self.f_trace.clone(),
            normalized: self.normalized.clone(),
            m: self.order.len(),
            target: self.target.clone(),
            detector_fingerprint: self.detector_fingerprint.clone(),
            stats: Some(self.stats),
        }
    }
}

impl AttributionRecord {
    pub fn into_result(self, partition: &RegionPartition) -> Result<AttributionResult> {
        if self.m != partition.region_count() {
            return Err(Error::invalid(format!(
                "attribution covers {} regions, partition has {}",
                self.m,
                partition.region_count()
            )));
        }
        let saliency = rasterize(partition, &self.order, &self.normalized)?;
        Ok(AttributionResult {
            order: self.order,
            raw_scores: self.raw_scores,
            f_trace: self.f_trace,
            normalized: self.normalized,
            saliency,
            target: self.target,
            detector_fingerprint: self.detector_fingerprint,
            stats: self.stats.unwrap_or(SearchStats {
                evaluations: 0,
                detector_calls: 0,
            }),
        })
    }
}

/// `A_1 = b_base`, `A_i = A_{i-1} - |F_i - F_{i-1}|`.
pub fn attribution_scores(f_trace: &[f64], b_base: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f_trace.len());
    for i in 0..f_trace.len() {
        let a = if i == 0 {
            b_base
        } else {
            out[i - 1] - (f_trace[i] - f_trace[i - 1]).abs()
        };
        out.push(a);
    }
    out
}

pub fn greedy_search(
    detector: &dyn Detector,
    image: &Image,
    partition: &RegionPartition,
    target: &ExplanationTarget,
    options: &SearchOptions,
) -> Result<AttributionResult> {
    let objective = Objective::new(detector, image, partition, target, options.scoring);
    let (order, f_trace) = greedy_order(&objective, options.workers)?;
    let raw_scores = attribution_scores(&f_trace, options.b_base);
    let normalized = normalize_attribution(&raw_scores);
    let saliency = rasterize(partition, &order, &normalized)?;
    Ok(AttributionResult {
        order,
        raw_scores,
        f_trace,
        normalized,
        saliency,
        target: target.clone(),
        detector_fingerprint: detector.fingerprint(),
        stats: SearchStats {
            evaluations: objective.evaluations(),
            detector_calls: objective.detector_calls(),
        },
    })
}

/// Full greedy ordering under `objective`; returns the order and
/// `F(S_[i])` for every prefix.
pub fn greedy_order(objective: &Objective<'_>, workers: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let m = objective.region_count();
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
        )
    } else {
        None
    };

    let mut selected = RegionSet::new();
    let mut order = Vec::with_capacity(m);
    let mut f_trace = Vec::with_capacity(m);
    for _ in 0..m {
        let candidates: Vec<usize> = (0..m).filter(|&a| !selected.contains(a)).collect();
        let score = |&a: &usize| objective.value(&selected.with(a));
        let scored: Vec<Result<f64>> = match &pool {
            Some(pool) => pool.install(|| candidates.par_iter().map(score).collect()),
            None => candidates.iter().map(score).collect(),
        };

        let mut best: Option<(usize, f64)> = None;
        for (&a, value) in candidates.iter().zip(scored) {
            let value = match value {
                Ok(v) => v,
                Err(Error::Backend(source)) => {
                    return Err(Error::SearchAborted {
                        partial: Box::new(PartialTrace {
                            region_count: m,
                            order,
                            f_trace,
                        }),
                        source,
                    })
                }
                Err(other) => return Err(other),
            };
            if best.is_none_or(|(_, b)| value > b) {
                best = Some((a, value));
            }
        }
        let (winner, value) = best.expect("at least one candidate per rank");
        selected.insert(winner);
        order.push(winner);
        f_trace.push(value);
    }
    Ok((order, f_trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::DetectionSet;
    use crate::detector::blob::{BlobDetector, BlobWorld};
    use crate::geometry::BBox;
    use crate::segmentation::grid_partition;
    use crate::DetectorError;

    struct Silent;

    impl Detector for Silent {
        fn detect(&self, _: &Image) -> Result<DetectionSet, DetectorError> {
            Ok(DetectionSet::empty())
        }
        fn fingerprint(&self) -> String {
            "silent".into()
        }
    }

    struct FailsAfter(std::sync::atomic::AtomicUsize);

    impl Detector for FailsAfter {
        fn detect(&self, _: &Image) -> Result<DetectionSet, DetectorError> {
            let left = self.0.fetch_sub(1, std::sync::atomic::Ordering::SeqCst);
            if left == 0 {
                self.0.store(0, std::sync::atomic::Ordering::SeqCst);
                Err(DetectorError::Transport("connection reset".into()))
            } else {
                Ok(DetectionSet::empty())
            }
        }
        fn fingerprint(&self) -> String {
            "flaky".into()
        }
    }

    fn canvas(w: u32, h: u32) -> Image {
        Image::from_fn(w, h, |x, y| [(x % 200) as u8 + 20, (y % 200) as u8 + 20, 60]).unwrap()
    }

    #[test]
    fn recurrence() {
        let a = attribution_scores(&[0.5, 1.5, 1.2, 1.2], 0.0);
        let expected = [0.0, -1.0, -1.3, -1.3];
        for (x, y) in a.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(attribution_scores(&[], 0.0).is_empty());
    }

    #[test]
    fn constant_objective_gives_identity_order() {
        let img = canvas(12, 12);
        let p = grid_partition(12, 12, 3, 3).unwrap();
        let t = ExplanationTarget::new(BBox::new(0., 0., 4., 4.).unwrap(), "x");
        let r = greedy_search(&Silent, &img, &p, &t, &SearchOptions::default()).unwrap();
        assert_eq!(r.order, (0..9).collect::<Vec<_>>());
        assert!(r.raw_scores.iter().all(|&a| a == 0.0));
        assert!(r.normalized.iter().all(|&a| a == 1.0));
        assert_eq!(r.stats.evaluations, 45);
        assert_eq!(r.stats.detector_calls, 90);
    }

    #[test]
    fn backend_failure_carries_partial_trace() {
        let img = canvas(8, 8);
        let p = grid_partition(8, 8, 2, 2).unwrap();
        let t = ExplanationTarget::new(BBox::new(0., 0., 4., 4.).unwrap(), "x");
        // 4 + 3 candidates use 14 passes; fail during rank 3
        let det = FailsAfter(std::sync::atomic::AtomicUsize::new(15));
        match greedy_search(&det, &img, &p, &t, &SearchOptions::default()) {
            Err(Error::SearchAborted { partial, source }) => {
                assert_eq!(partial.order.len(), 2);
                assert_eq!(partial.f_trace.len(), 2);
                assert!(matches!(source, DetectorError::Transport(_)));
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let blob = BBox::new(5., 3., 27., 19.).unwrap();
        let det = BlobDetector::new(BlobWorld::single(blob, "dog", 1.5));
        let img = canvas(32, 24);
        let p = grid_partition(32, 24, 3, 4).unwrap();
        let t = ExplanationTarget::new(blob, "dog");
        let seq = greedy_search(&det, &img, &p, &t, &SearchOptions::default()).unwrap();
        let par = greedy_search(&det, &img, &p, &t, &SearchOptions::default().with_workers(4)).unwrap();
        assert_eq!(seq, par);
        let mut sorted = seq.order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..12).collect::<Vec<_>>());
        assert!(seq.raw_scores.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(seq.raw_scores[0], 0.0);
        assert_eq!(seq.normalized[0], 1.0);
    }

    #[test]
    fn record_roundtrip_rebuilds_saliency() {
        let blob = BBox::new(2., 2., 10., 9.).unwrap();
        let det = BlobDetector::new(BlobWorld::single(blob, "dog", 1.0));
        let img = canvas(16, 16);
        let p = grid_partition(16, 16, 2, 2).unwrap();
        let t = ExplanationTarget::new(blob, "dog");
        let r = greedy_search(&det, &img, &p, &t, &SearchOptions::default()).unwrap();
        let json = serde_json::to_string(&r.to_record()).unwrap();
        let back: AttributionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_result(&p).unwrap(), r);
    }
}
