//! Seeded synthetic benchmark: single-blob worlds on grid partitions,
//! comparing the greedy ordering against random and reversed orderings.
//!
//! All randomness comes from one 64-bit seed. Sample `i` draws from its own
//! ChaCha stream, so tables are identical across runs and worker counts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::ExplanationTarget;
use crate::detector::blob::{BlobDetector, BlobWorld};
use crate::detector::Detector;
use crate::evaluation::{auc, response_trace, Direction, EvalOptions, Variant};
use crate::geometry::BBox;
use crate::raster::Image;
use crate::search::{greedy_search, SearchOptions};
use crate::segmentation::{grid_partition, RegionPartition};
use crate::{Error, Result};

pub const BLOB_CATEGORY: &str = "object";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    pub samples: usize,
    pub seed: u64,
    /// Random orderings drawn per sample.
    pub random_orderings: usize,
    pub width: u32,
    pub height: u32,
    /// Grid shapes `(rows, cols)`, cycled through by sample index.
    pub grids: Vec<(u32, u32)>,
    pub exponent_min: f64,
    pub exponent_max: f64,
    /// Smallest blob side in pixels.
    pub min_blob: u32,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            samples: 20,
            seed: 0,
            random_orderings: 10,
            width: 48,
            height: 48,
            grids: vec![(3, 3), (4, 4)],
            exponent_min: 0.5,
            exponent_max: 2.0,
            min_blob: 8,
        }
    }
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grids.is_empty() {
            return Err(Error::Config("suite needs at least one grid shape".into()));
        }
        if self.min_blob == 0 || self.min_blob > self.width.min(self.height) {
            return Err(Error::Config(format!(
                "min_blob {} does not fit a {}×{} image",
                self.min_blob, self.width, self.height
            )));
        }
        if !(self.exponent_min >= 0.0 && self.exponent_min <= self.exponent_max && self.exponent_max.is_finite()) {
            return Err(Error::Config("exponent range must satisfy 0 ≤ min ≤ max < ∞".into()));
        }
        for &(r, c) in &self.grids {
            grid_partition(self.width, self.height, r, c).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Generates every sample of the suite.
    pub fn generate(&self) -> Result<Vec<BenchSample>> {
        self.validate()?;
        (0..self.samples)
            .map(|i| {
                let mut rng = sample_rng(self.seed, i as u64);
                let (rows, cols) = self.grids[i % self.grids.len()];
                random_blob_instance(
                    &mut rng,
                    self.width,
                    self.height,
                    rows,
                    cols,
                    (self.exponent_min, self.exponent_max),
                    self.min_blob,
                )
            })
            .collect()
    }
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One benchmark instance: a textured image, its grid partition and a blob
/// world whose only object is the explanation target.
#[derive(Debug, Clone)]
pub struct BenchSample {
    pub image: Image,
    pub partition: RegionPartition,
    pub world: BlobWorld,
    pub target: ExplanationTarget,
}

impl BenchSample {
    pub fn detector(&self) -> BlobDetector {
        BlobDetector::new(self.world.clone())
    }
}

/// Random inhibitor-free blob on a `rows × cols` grid. Pixel values are drawn
/// from `1..=255`, so nothing is mistaken for the zero baseline.
pub fn random_blob_instance(
    rng: &mut impl Rng,
    width: u32,
    height: u32,
    rows: u32,
    cols: u32,
    (p_min, p_max): (f64, f64),
    min_blob: u32,
) -> Result<BenchSample> {
    let partition = grid_partition(width, height, rows, cols)?;
    let side = |rng: &mut dyn rand::RngCore, extent: u32| {
        let len = rng.random_range(min_blob..=extent);
        let start = rng.random_range(0..=extent - len);
        (start as f64, (start + len) as f64)
    };
    let (x1, x2) = side(rng, width);
    let (y1, y2) = side(rng, height);
    let region = BBox::new(x1, y1, x2, y2)?;
    let exponent = if p_max > p_min { rng.random_range(p_min..=p_max) } else { p_min };
    let image = Image::from_fn(width, height, |_, _| {
        [rng.random_range(1..=255), rng.random_range(1..=255), rng.random_range(1..=255)]
    })?;
    Ok(BenchSample {
        image,
        partition,
        world: BlobWorld::single(region, BLOB_CATEGORY, exponent),
        target: ExplanationTarget::new(region, BLOB_CATEGORY),
    })
}

/// Insertion and deletion clue AUCs of one ordering.
pub fn clue_aucs(detector: &dyn Detector, sample: &BenchSample, order: &[usize]) -> Result<(f64, f64)> {
    let opts = EvalOptions::default();
    let run = |direction| -> Result<f64> {
        let trace = response_trace(detector, &sample.image, &sample.partition, order, &sample.target, direction, &opts)?;
        Ok(auc(&trace.curve(Variant::Clue)))
    };
    Ok((run(Direction::Insertion)?, run(Direction::Deletion)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub sample: usize,
    pub m: usize,
    pub vps_insertion: f64,
    pub vps_deletion: f64,
    pub random_insertion: Option<f64>,
    pub random_deletion: Option<f64>,
    pub reverse_insertion: f64,
    pub reverse_deletion: f64,
    /// VPS minus the random mean; positive is better.
    pub delta_insertion: Option<f64>,
    /// Random mean minus VPS; positive is better.
    pub delta_deletion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingSummary {
    pub ordering: String,
    pub insertion_mean: f64,
    pub deletion_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub seed: u64,
    pub random_orderings: usize,
    pub summary: Vec<OrderingSummary>,
    pub per_sample: Vec<SampleRow>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn run_sample(spec: &SuiteSpec, index: usize, sample: &BenchSample) -> Result<SampleRow> {
    let det = sample.detector();
    let vps = greedy_search(&det, &sample.image, &sample.partition, &sample.target, &SearchOptions::default())?;
    let (vps_ins, vps_del) = clue_aucs(&det, sample, &vps.order)?;
    let reversed: Vec<usize> = vps.order.iter().rev().copied().collect();
    let (rev_ins, rev_del) = clue_aucs(&det, sample, &reversed)?;

    // a stream disjoint from the ones used to generate samples
    let mut rng = sample_rng(spec.seed ^ 0x5eed_0bde_u64, index as u64);
    let mut randoms = Vec::with_capacity(spec.random_orderings);
    for _ in 0..spec.random_orderings {
        let mut order: Vec<usize> = (0..sample.partition.region_count()).collect();
        order.shuffle(&mut rng);
        randoms.push(clue_aucs(&det, sample, &order)?);
    }
    let (random_insertion, random_deletion) = if randoms.is_empty() {
        (None, None)
    } else {
        (
            Some(mean(randoms.iter().map(|r| r.0))),
            Some(mean(randoms.iter().map(|r| r.1))),
        )
    };
    Ok(SampleRow {
        sample: index,
        m: sample.partition.region_count(),
        vps_insertion: vps_ins,
        vps_deletion: vps_del,
        random_insertion,
        random_deletion,
        reverse_insertion: rev_ins,
        reverse_deletion: rev_del,
        delta_insertion: random_insertion.map(|r| vps_ins - r),
        delta_deletion: random_deletion.map(|r| r - vps_del),
    })
}

/// Runs the whole suite, samples in parallel on `workers` threads.
pub fn run_benchmark(spec: &SuiteSpec, workers: usize) -> Result<BenchmarkTable> {
    let samples = spec.generate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let rows: Vec<SampleRow> = pool.install(|| {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| run_sample(spec, i, s))
            .collect::<Result<_>>()
    })?;

    let mut summary = vec![OrderingSummary {
        ordering: "vps".into(),
        insertion_mean: mean(rows.iter().map(|r| r.vps_insertion)),
        deletion_mean: mean(rows.iter().map(|r| r.vps_deletion)),
    }];
    if spec.random_orderings > 0 {
        summary.push(OrderingSummary {
            ordering: "random".into(),
            insertion_mean: mean(rows.iter().filter_map(|r| r.random_insertion)),
            deletion_mean: mean(rows.iter().filter_map(|r| r.random_deletion)),
        });
    }
    summary.push(OrderingSummary {
        ordering: "reverse_vps".into(),
        insertion_mean: mean(rows.iter().map(|r| r.reverse_insertion)),
        deletion_mean: mean(rows.iter().map(|r| r.reverse_deletion)),
    });
    Ok(BenchmarkTable {
        seed: spec.seed,
        random_orderings: spec.random_orderings,
        summary,
        per_sample: rows,
    })
}

impl BenchmarkTable {
    pub fn summary_for(&self, ordering: &str) -> Option<&OrderingSummary> {
        self.summary.iter().find(|s| s.ordering == ordering)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-sample rows followed by nothing else; empty cells for missing
    /// random baselines.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.per_sample {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteSpec {
        SuiteSpec {
            samples: 3,
            seed: 7,
            random_orderings: 2,
            width: 24,
            height: 24,
            ..Default::default()
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = small().generate().unwrap();
        let b = small().generate().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image, y.image);
            assert_eq!(x.world, y.world);
        }
        let other = SuiteSpec { seed: 8, ..small() }.generate().unwrap();
        assert_ne!(a[0].image, other[0].image);
    }

    #[test]
    fn samples_are_well_formed() {
        for s in small().generate().unwrap() {
            s.world.validate().unwrap();
            s.world.validate_bounds(24, 24).unwrap();
            assert!(s.image.as_bytes().iter().all(|&v| v != 0));
            let r = s.world.objects[0].region;
            assert!(r.width() >= 8.0 && r.height() >= 8.0);
        }
    }

    #[test]
    fn zero_random_orderings_omit_the_row() {
        let t = run_benchmark(&SuiteSpec { random_orderings: 0, ..small() }, 1).unwrap();
        let names: Vec<&str> = t.summary.iter().map(|s| s.ordering.as_str()).collect();
        assert_eq!(names, ["vps", "reverse_vps"]);
        assert!(t.per_sample.iter().all(|r| r.delta_insertion.is_none()));
    }

    #[test]
    fn tables_do_not_depend_on_worker_count() {
        let a = run_benchmark(&small(), 1).unwrap();
        let b = run_benchmark(&small(), 3).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(SuiteSpec { grids: vec![], ..small() }.validate().is_err());
        assert!(SuiteSpec { min_blob: 30, ..small() }.validate().is_err());
        assert!(SuiteSpec { grids: vec![(30, 1)], ..small() }.validate().is_err());
        assert!(SuiteSpec { exponent_min: 3.0, ..small() }.validate().is_err());
    }
}
