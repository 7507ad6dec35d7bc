//! Exhaustive optimum over fixed-size subsets, for checking the greedy bound.

use serde::{Deserialize, Serialize};

use super::{greedy_order, SearchOptions};
use crate::detection::ExplanationTarget;
use crate::detector::Detector;
use crate::raster::Image;
use crate::scoring::{Objective, ScoringOptions};
use crate::segmentation::{RegionPartition, RegionSet};
use crate::{Error, Result};

/// Largest partition accepted by [`brute_force_best`].
pub const MAX_EXHAUSTIVE_REGIONS: usize = 16;

/// Lexicographic successor of a sorted k-combination of `0..m`.
fn next_combination(c: &mut [usize], m: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < m - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn best_of_size(objective: &Objective<'_>, k: usize) -> Result<(RegionSet, f64)> {
    let m = objective.region_count();
    if m > MAX_EXHAUSTIVE_REGIONS {
        return Err(Error::CostGuard {
            regions: m,
            limit: MAX_EXHAUSTIVE_REGIONS,
        });
    }
    if k > m {
        return Err(Error::invalid(format!("subset size {k} exceeds {m} regions")));
    }
    let mut comb: Vec<usize> = (0..k).collect();
    let mut best: Option<(RegionSet, f64)> = None;
    loop {
        let set = RegionSet::from_ids(comb.iter().copied());
        let v = objective.value(&set)?;
        // combinations arrive in lexicographic order, so the first maximum wins
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((set, v));
        }
        if !next_combination(&mut comb, m) {
            break;
        }
    }
    Ok(best.expect("at least one combination"))
}

/// Maximum of `F` over all subsets of size `k`; ties go to the
/// lexicographically smallest subset. Refused above
/// [`MAX_EXHAUSTIVE_REGIONS`] regions.
pub fn brute_force_best(
    detector: &dyn Detector,
    image: &Image,
    partition: &RegionPartition,
    target: &ExplanationTarget,
    k: usize,
    options: &ScoringOptions,
) -> Result<(RegionSet, f64)> {
    let objective = Objective::new(detector, image, partition, target, *options);
    best_of_size(&objective, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: usize,
    pub greedy_value: f64,
    pub optimum_value: f64,
    /// `greedy / optimum`, or 1 when the optimum is 0.
    pub ratio: f64,
    pub passes: bool,
}

pub const GREEDY_BOUND: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// Compares the greedy prefix of every size in `ks` with the exhaustive
/// optimum of the same size.
pub fn bound_check(
    detector: &dyn Detector,
    image: &Image,
    partition: &RegionPartition,
    target: &ExplanationTarget,
    ks: &[usize],
    options: &SearchOptions,
) -> Result<Vec<BoundReport>> {
    let m = partition.region_count();
    if m > MAX_EXHAUSTIVE_REGIONS {
        return Err(Error::CostGuard {
            regions: m,
            limit: MAX_EXHAUSTIVE_REGIONS,
        });
    }
    let objective = Objective::new(detector, image, partition, target, options.scoring);
    let (_, f_trace) = greedy_order(&objective, options.workers)?;
    ks.iter()
        .map(|&k| {
            let (_, optimum_value) = best_of_size(&objective, k)?;
            let greedy_value = if k == 0 {
                objective.value(&RegionSet::new())?
            } else {
                f_trace[k - 1]
            };
            let ratio = if optimum_value > 0.0 {
                greedy_value / optimum_value
            } else {
                1.0
            };
            Ok(BoundReport {
                k,
                greedy_value,
                optimum_value,
                ratio,
                passes: greedy_value >= GREEDY_BOUND * optimum_value,
            })
        })
        .collect()
}
