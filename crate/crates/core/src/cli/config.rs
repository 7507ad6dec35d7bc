//! Run configuration: a TOML file whose keys mirror the command-line flags.
//! Flags given on the command line win over the file.
//!
//! ```toml
//! regions = 100
//! baseline = 0
//! detector = "blob:world.json"
//! workers = 4
//! seed = 7
//! out = "runs/first"
//! # threshold = 0.35
//! iou_only = false
//! # grid = [4, 4]
//!
//! [metrics]
//! esr_threshold = 0.35
//! plots = true
//!
//! [benchmark]
//! samples = 20
//! random_orderings = 10
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::SuiteSpec;
use crate::detector::{DetectorKind, DetectorSpec, DEFAULT_N_MAX};
use crate::detection::Category;
use crate::segmentation::DEFAULT_ITERATIONS;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricToggles {
    pub esr_threshold: f64,
    /// Largest ESR prefix; all regions when absent.
    pub esr_budget: Option<usize>,
    /// Also write `curves.png` per sample.
    pub plots: bool,
    /// Also write the float saliency map `saliency.raw` per sample.
    pub raw_saliency: bool,
}

impl Default for MetricToggles {
    fn default() -> Self {
        Self {
            esr_threshold: 0.35,
            esr_budget: None,
            plots: false,
            raw_saliency: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Target number of SLICO regions.
    pub regions: usize,
    /// Use a `rows × cols` grid instead of SLICO.
    pub grid: Option<(u32, u32)>,
    pub slico_iterations: usize,
    pub baseline: u8,
    pub detector: Option<String>,
    /// Extra vocabulary for wire backends; target categories are always sent.
    pub categories: Vec<String>,
    pub n_max: usize,
    /// Score threshold applied to detections during the search only.
    pub threshold: Option<f64>,
    pub iou_only: bool,
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub metrics: MetricToggles,
    pub benchmark: SuiteSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            regions: 100,
            grid: None,
            slico_iterations: DEFAULT_ITERATIONS,
            baseline: 0,
            detector: None,
            categories: Vec::new(),
            n_max: DEFAULT_N_MAX,
            threshold: None,
            iou_only: false,
            workers: 1,
            seed: 0,
            out: PathBuf::from("vps-out"),
            metrics: MetricToggles::default(),
            benchmark: SuiteSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_none() && self.regions < 2 {
            return Err(Error::Config(format!("regions = {} but at least 2 are needed", self.regions)));
        }
        if let Some((r, c)) = self.grid {
            if r == 0 || c == 0 || (r as usize) * (c as usize) < 2 {
                return Err(Error::Config(format!("grid {r}×{c} needs at least 2 cells")));
            }
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.slico_iterations == 0 {
            return Err(Error::Config("slico_iterations must be at least 1".into()));
        }
        let t = self.metrics.esr_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Config(format!("esr_threshold {t} outside (0, 1]")));
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("threshold {t} outside [0, 1]")));
            }
        }
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        Ok(())
    }

    /// Detector spec for this run, with `extra` categories added to the
    /// configured vocabulary.
    pub fn detector_spec<'a>(&self, extra: impl IntoIterator<Item = &'a Category>) -> Result<DetectorSpec> {
        let text = self
            .detector
            .as_deref()
            .ok_or_else(|| Error::Config("no detector given (--detector blob:<file> | wire:<url>)".into()))?;
        let mut spec = DetectorSpec::new(text.parse::<DetectorKind>()?);
        let mut cats: Vec<Category> = self.categories.iter().map(Category::new).collect();
        for c in extra {
            if !cats.contains(c) {
                cats.push(c.clone());
            }
        }
        spec.categories = cats;
        spec.n_max = self.n_max;
        spec.score_threshold = self.threshold;
        spec.validate()?;
        Ok(spec)
    }
}
