//! Faithfulness and localization metrics for a region ordering.
//!
//! Insertion reveals the top-`T` regions on a baseline canvas; deletion
//! blanks them out of the full image. At every step the detection that
//! maximizes `IoU · s_c` against the target is selected, and three
//! variants of the response are tracked: the product itself (clue), that
//! box's class confidence, and its IoU. Steps advance one region at a time,
//! so a curve over `m` regions has `m + 1` points.

mod plot;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use plot::render_curves_png;

use crate::detection::{DetectionSet, ExplanationTarget};
use crate::detector::Detector;
use crate::geometry::{iou, BBox};
use crate::raster::Image;
use crate::search::SaliencyMap;
use crate::segmentation::{reveal, RegionPartition, RegionSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Insertion,
    Deletion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Clue,
    Class,
    Iou,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Clue, Variant::Class, Variant::Iou];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPoint {
    pub count: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    pub direction: Direction,
    pub variant: Variant,
    pub steps: Vec<StepPoint>,
}

impl StepCurve {
    /// Checks `T_0 = 0`, strictly increasing counts and values in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .steps
            .first()
            .ok_or_else(|| Error::invalid("curve has no steps"))?;
        if first.count != 0 {
            return Err(Error::invalid("curve must start at T = 0"));
        }
        if self.steps.len() < 2 {
            return Err(Error::invalid("curve needs at least two steps"));
        }
        if self.steps.windows(2).any(|w| w[1].count <= w[0].count) {
            return Err(Error::invalid("curve step counts must strictly increase"));
        }
        if let Some(p) = self.steps.iter().find(|p| !(0.0..=1.0).contains(&p.value)) {
            return Err(Error::invalid(format!("curve value {} outside [0, 1]", p.value)));
        }
        Ok(())
    }
}

/// Detector response at one step of an insertion or deletion sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseStep {
    pub count: usize,
    pub clue: f64,
    pub class_score: f64,
    pub iou: f64,
}

impl ResponseStep {
    fn from_detections(count: usize, dets: &DetectionSet, target: &ExplanationTarget, iou_only: bool) -> Self {
        match dets.best_response(target, iou_only) {
            Some(r) => Self {
                count,
                clue: r.product(),
                class_score: r.class_score,
                iou: r.iou,
            },
            None => Self {
                count,
                clue: 0.0,
                class_score: 0.0,
                iou: 0.0,
            },
        }
    }

    pub fn value(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Clue => self.clue,
            Variant::Class => self.class_score,
            Variant::Iou => self.iou,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTrace {
    pub direction: Direction,
    pub steps: Vec<ResponseStep>,
}

impl ResponseTrace {
    pub fn curve(&self, variant: Variant) -> StepCurve {
        StepCurve {
            direction: self.direction,
            variant,
            steps: self
                .steps
                .iter()
                .map(|s| StepPoint {
                    count: s.count,
                    value: s.value(variant),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub baseline: u8,
    pub iou_only: bool,
    /// Confidence a detection needs to count as a success for ESR.
    pub esr_threshold: f64,
    /// Largest prefix ESR may reveal; `None` sweeps all regions.
    pub esr_budget: Option<usize>,
    pub workers: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            baseline: 0,
            iou_only: false,
            esr_threshold: 0.35,
            esr_budget: None,
            workers: 1,
        }
    }
}

fn check_order(order: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    if order.len() != m {
        return Err(Error::invalid(format!(
            "ordering has {} entries for {m} regions",
            order.len()
        )));
    }
    for &r in order {
        if r >= m || std::mem::replace(&mut seen[r], true) {
            return Err(Error::invalid(format!("ordering is not a permutation (region {r})")));
        }
    }
    Ok(())
}

fn revealed_at(order: &[usize], count: usize, direction: Direction, m: usize) -> RegionSet {
    let top = RegionSet::from_ids(order[..count].iter().copied());
    match direction {
        Direction::Insertion => top,
        Direction::Deletion => top.complement(m),
    }
}

fn run_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Detector responses at every step `T = 0..=m` of one sweep.
pub fn response_trace(
    detector: &dyn Detector,
    image: &Image,
    partition: &RegionPartition,
    order: &[usize],
    target: &ExplanationTarget,
    direction: Direction,
    options: &EvalOptions,
) -> Result<ResponseTrace> {
    let m = partition.region_count();
    check_order(order, m)?;
    let step = |count: usize| -> Result<ResponseStep> {
        let masked = reveal(image, partition, &revealed_at(order, count, direction, m), options.baseline)?;
        let dets = detector.detect(&masked)?;
        Ok(ResponseStep::from_detections(count, &dets, target, options.iou_only))
    };
    let steps: Vec<Result<ResponseStep>> = run_pool(options.workers, || {
        if options.workers > 1 {
            (0..=m).into_par_iter().map(step).collect()
        } else {
            (0..=m).map(step).collect()
        }
    })?;
    Ok(ResponseTrace {
        direction,
        steps: steps.into_iter().collect::<Result<_>>()?,
    })
}

/// One insertion or deletion curve.
#[allow(clippy::too_many_arguments)]
pub fn curve(
    detector: &dyn Detector,
    image: &Image,
    partition: &RegionPartition,
    order: &[usize],
    target: &ExplanationTarget,
    direction: Direction,
    variant: Variant,
    options: &EvalOptions,
) -> Result<StepCurve> {
    Ok(response_trace(detector, image, partition, order, target, direction, options)?.curve(variant))
}

/// Trapezoidal area under the curve, normalized by the final step count.
pub fn auc(curve: &StepCurve) -> f64 {
    let Some(last) = curve.steps.last() else {
        return 0.0;
    };
    if last.count == 0 {
        return 0.0;
    }
    let area: f64 = curve
        .steps
        .windows(2)
        .map(|w| (w[1].value + w[0].value) * (w[1].count - w[0].count) as f64)
        .sum();
    area / (2.0 * last.count as f64)
}

/// Best class confidence over insertion steps whose selected box has
/// IoU > 0.5 with the target; 0 when no step qualifies.
pub fn average_highest_score(insertion: &ResponseTrace) -> f64 {
    insertion
        .steps
        .iter()
        .filter(|s| s.iou > 0.5)
        .map(|s| s.class_score)
        .fold(0.0, f64::max)
}

/// 1 when the most salient pixel (first in row-major order on ties) lies in
/// the box, edges included.
pub fn point_game(saliency: &SaliencyMap, gt_box: &BBox) -> u8 {
    let (mut best, mut at) = (f64::NEG_INFINITY, (0u32, 0u32));
    for y in 0..saliency.height() {
        for x in 0..saliency.width() {
            let v = saliency.get(x, y);
            if v > best {
                best = v;
                at = (x, y);
            }
        }
    }
    gt_box.contains_pixel(at.0, at.1) as u8
}

/// Share of total saliency mass that falls inside the box.
pub fn energy_point_game(saliency: &SaliencyMap, gt_box: &BBox) -> Result<f64> {
    let (mut inside, mut total) = (0.0, 0.0);
    for y in 0..saliency.height() {
        for x in 0..saliency.width() {
            let v = saliency.get(x, y);
            total += v;
            if gt_box.contains_pixel(x, y) {
                inside += v;
            }
        }
    }
    if total <= 0.0 {
        return Err(Error::UndefinedMetric("energy point game of an all-zero saliency map"));
    }
    Ok(inside / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EsrOutcome {
    pub success: bool,
    /// Smallest prefix size that made the detector succeed.
    pub minimal_prefix: Option<usize>,
}

/// Explaining-success check: does revealing only the top `T ≤ budget`
/// regions yield a detection with IoU > 0.5 and target confidence at least
/// `threshold`?
#[allow(clippy::too_many_arguments)]
pub fn esr(
    detector: &dyn Detector,
    image: &Image,
    partition: &RegionPartition,
    order: &[usize],
    target: &ExplanationTarget,
    threshold: f64,
    budget: usize,
    options: &EvalOptions,
) -> Result<EsrOutcome> {
    let m = partition.region_count();
    check_order(order, m)?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!("ESR threshold {threshold} outside (0, 1]")));
    }
    if budget > m {
        return Err(Error::invalid(format!("ESR budget {budget} exceeds {m} regions")));
    }
    for t in 1..=budget {
        let masked = reveal(image, partition, &revealed_at(order, t, Direction::Insertion, m), options.baseline)?;
        let dets = detector.detect(&masked)?;
        let hit = (0..dets.len()).any(|i| {
            iou(&target.target_box, &dets.detections[i].bbox) > 0.5
                && dets.confidence(i, &target.category, options.iou_only) >= threshold
        });
        if hit {
            return Ok(EsrOutcome {
                success: true,
                minimal_prefix: Some(t),
            });
        }
    }
    Ok(EsrOutcome {
        success: false,
        minimal_prefix: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantAucs {
    pub clue: f64,
    pub class: f64,
    pub iou: f64,
}

impl VariantAucs {
    pub fn from_trace(trace: &ResponseTrace) -> Self {
        Self {
            clue: auc(&trace.curve(Variant::Clue)),
            class: auc(&trace.curve(Variant::Class)),
            iou: auc(&trace.curve(Variant::Iou)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub insertion: VariantAucs,
    pub deletion: VariantAucs,
    pub avg_highest_score: f64,
    pub point_game: u8,
    pub energy_pg: f64,
    pub esr: EsrOutcome,
}

/// Both sweeps behind a [`MetricReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTraces {
    pub insertion: ResponseTrace,
    pub deletion: ResponseTrace,
}

/// Computes the whole metric battery for one ordering and its saliency map.
pub fn evaluate(
    detector: &dyn Detector,
    image: &Image,
    partition: &RegionPartition,
    order: &[usize],
    saliency: &SaliencyMap,
    target: &ExplanationTarget,
    options: &EvalOptions,
) -> Result<(MetricReport, SweepTraces)> {
    let ins = response_trace(detector, image, partition, order, target, Direction::Insertion, options)?;
    let del = response_trace(detector, image, partition, order, target, Direction::Deletion, options)?;
    let budget = options.esr_budget.unwrap_or(partition.region_count());
    let esr = esr(detector, image, partition, order, target, options.esr_threshold, budget, options)?;
    let report = MetricReport {
        insertion: VariantAucs::from_trace(&ins),
        deletion: VariantAucs::from_trace(&del),
        avg_highest_score: average_highest_score(&ins),
        point_game: point_game(saliency, &target.target_box),
        energy_pg: energy_point_game(saliency, &target.target_box)?,
        esr,
    };
    Ok((
        report,
        SweepTraces {
            insertion: ins,
            deletion: del,
        },
    ))
}
