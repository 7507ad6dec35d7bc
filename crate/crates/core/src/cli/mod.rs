//! Command-line orchestration behind the `vps` binary.
//!
//! Each `cmd_*` function is usable directly from Rust; [`run`] parses
//! arguments, merges them over the TOML config and maps outcomes to exit
//! codes (0 success, 1 some samples failed, 2 configuration or protocol
//! error).

mod attribute;
pub mod config;
mod evaluate;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use attribute::cmd_attribute;
pub use config::{MetricToggles, RunConfig};
pub use evaluate::{cmd_evaluate, AggregateRow, MetricRow, MetricsTable, RowStatus};
pub use manifest::{ManifestEntry, ManifestLine, SampleKind};

use crate::bench::{run_benchmark, BenchmarkTable};
use crate::detection::Category;
use crate::detector::Detector;
use crate::geometry::BBox;
use crate::raster::Image;
use crate::search::{bound_check, BoundReport, SearchOptions, MAX_EXHAUSTIVE_REGIONS};
use crate::segmentation::io::{read_partition, Provenance};
use crate::segmentation::{grid_partition, segment_slico, RegionPartition};
use crate::{DetectorError, Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SAMPLE_FAILURES: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const RUN_SUMMARY: &str = "run-summary.json";

#[derive(Debug, Parser)]
#[command(name = "vps", version, about = "Explain object detections by greedy sub-region search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank sub-regions and write per-sample attribution artifacts.
    Attribute {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        target: TargetArgs,
        /// Also write the float saliency map.
        #[arg(long)]
        raw: bool,
        /// Also render insertion/deletion curves to PNG.
        #[arg(long)]
        plots: bool,
    },
    /// Compute the metric battery for artifacts written by `attribute`.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        esr_threshold: Option<f64>,
        #[arg(long)]
        esr_budget: Option<usize>,
    },
    /// Compare greedy, random and reversed orderings on a seeded synthetic suite.
    Benchmark {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        random_orderings: Option<usize>,
    },
    /// Check greedy prefixes against the exhaustive optimum (at most 16 regions).
    Bruteforce {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        target: TargetArgs,
        /// Subset sizes to check, comma separated; all sizes by default.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Target SLICO region count.
    #[arg(long)]
    pub regions: Option<usize>,
    /// Grid partition `ROWSxCOLS` instead of SLICO.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(u32, u32)>,
    #[arg(long)]
    pub baseline: Option<u8>,
    /// `blob:<world.json>`, `wire:http://host:port` or `wire:stdio:<command>`.
    #[arg(long)]
    pub detector: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Drop detections below this confidence during the search.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub iou_only: bool,
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TargetArgs {
    #[arg(long, conflicts_with_all = ["image", "partition_file"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires_all = ["bbox", "category"])]
    pub image: Option<PathBuf>,
    #[arg(long = "box", value_name = "X1,Y1,X2,Y2")]
    pub bbox: Option<BBox>,
    #[arg(long)]
    pub category: Option<String>,
    /// Precomputed partition (PGM with JSON sidecar) for `--image`.
    #[arg(long)]
    pub partition_file: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<(u32, u32), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or("expected ROWSxCOLS")?;
    let r = r.trim().parse().map_err(|e| format!("rows: {e}"))?;
    let c = c.trim().parse().map_err(|e| format!("cols: {e}"))?;
    Ok((r, c))
}

impl RunArgs {
    /// The config file (or defaults) with these flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.regions {
            c.regions = v;
            c.grid = None;
        }
        if self.grid.is_some() {
            c.grid = self.grid;
        }
        if let Some(v) = self.baseline {
            c.baseline = v;
        }
        if let Some(v) = &self.detector {
            c.detector = Some(v.clone());
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if self.threshold.is_some() {
            c.threshold = self.threshold;
        }
        if self.iou_only {
            c.iou_only = true;
        }
        if let Some(v) = self.n_max {
            c.n_max = v;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Which samples a command runs over.
#[derive(Debug, Clone)]
pub enum SampleSource {
    Manifest(PathBuf),
    Single {
        image: PathBuf,
        target_box: BBox,
        category: Category,
        partition_file: Option<PathBuf>,
    },
}

impl SampleSource {
    pub const SINGLE_ID: &'static str = "sample";

    pub fn from_args(t: &TargetArgs) -> Result<Self> {
        match (&t.manifest, &t.image) {
            (Some(m), None) => Ok(SampleSource::Manifest(m.clone())),
            (None, Some(img)) => Ok(SampleSource::Single {
                image: img.clone(),
                target_box: t.bbox.ok_or_else(|| Error::Config("--image needs --box".into()))?,
                category: Category::new(
                    t.category
                        .clone()
                        .ok_or_else(|| Error::Config("--image needs --category".into()))?,
                ),
                partition_file: t.partition_file.clone(),
            }),
            _ => Err(Error::Config("give either --manifest or --image/--box/--category".into())),
        }
    }

    pub(crate) fn lines(&self) -> Result<Vec<ManifestLine>> {
        match self {
            SampleSource::Manifest(path) => manifest::read_manifest(path),
            SampleSource::Single {
                image,
                target_box,
                category,
                ..
            } => Ok(vec![ManifestLine {
                id: Self::SINGLE_ID.into(),
                entry: Ok(ManifestEntry {
                    id: None,
                    image_path: image.clone(),
                    target_box: *target_box,
                    category: category.clone(),
                    sample_kind: SampleKind::Correct,
                }),
            }]),
        }
    }

    fn partition_file(&self) -> Option<&Path> {
        match self {
            SampleSource::Single { partition_file, .. } => partition_file.as_deref(),
            SampleSource::Manifest(_) => None,
        }
    }
}

/// Partition for one image according to the run config, or from file.
pub(crate) fn build_partition(
    config: &RunConfig,
    image: &Image,
    file: Option<&Path>,
) -> Result<(RegionPartition, Provenance)> {
    if let Some(path) = file {
        let (p, _) = read_partition(path)?;
        if (p.width(), p.height()) != (image.width(), image.height()) {
            return Err(Error::invalid(format!(
                "partition {}×{} does not match the {}×{} image",
                p.width(),
                p.height(),
                image.width(),
                image.height()
            )));
        }
        return Ok((
            p,
            Provenance::External {
                note: path.display().to_string(),
            },
        ));
    }
    match config.grid {
        Some((rows, cols)) => Ok((
            grid_partition(image.width(), image.height(), rows, cols)?,
            Provenance::Grid { rows, cols },
        )),
        None => Ok((
            segment_slico(image, config.regions, config.slico_iterations)?,
            Provenance::Slico {
                target_regions: config.regions,
                iterations: config.slico_iterations,
            },
        )),
    }
}

pub(crate) fn search_options(config: &RunConfig, workers: usize) -> SearchOptions {
    let mut o = SearchOptions::default().with_workers(workers);
    o.scoring.baseline = config.baseline;
    o.scoring.iou_only = config.iou_only;
    o
}

/// Writes `bytes` next to `path` and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Whether an error means the detector broke the wire contract.
pub(crate) fn is_protocol_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Backend(DetectorError::Malformed(_))
            | Error::SearchAborted {
                source: DetectorError::Malformed(_),
                ..
            }
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_kind: Option<SampleKind>,
    pub status: SampleStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector_calls: Option<usize>,
    #[serde(skip)]
    pub protocol_error: bool,
}

impl SampleSummary {
    pub(crate) fn failed(id: String, kind: Option<SampleKind>, error: &Error) -> Self {
        Self {
            id,
            sample_kind: kind,
            status: SampleStatus::Failed,
            error: Some(error.to_string()),
            artifacts: Vec::new(),
            region_count: None,
            evaluations: None,
            detector_calls: None,
            protocol_error: is_protocol_error(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub detector: String,
    pub samples: Vec<SampleSummary>,
    pub failed: usize,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.samples.iter().any(|s| s.protocol_error) {
            EXIT_CONFIG
        } else if self.failed > 0 {
            EXIT_SAMPLE_FAILURES
        } else {
            EXIT_OK
        }
    }
}

/// Runs the seeded synthetic suite and writes `benchmark.json` and
/// `benchmark.csv` to the output directory.
pub fn cmd_benchmark(config: &RunConfig) -> Result<BenchmarkTable> {
    let mut spec = config.benchmark.clone();
    spec.seed = config.seed;
    let table = run_benchmark(&spec, config.workers)?;
    ensure_dir(&config.out)?;
    write_atomic(&config.out.join("benchmark.json"), table.to_json()?.as_bytes())?;
    write_atomic(&config.out.join("benchmark.csv"), table.to_csv()?.as_bytes())?;
    Ok(table)
}

/// Greedy-versus-exhaustive report for one sample; `ks` empty means all
/// sizes `0..=m`.
pub fn cmd_bruteforce(config: &RunConfig, source: &SampleSource, ks: &[usize]) -> Result<Vec<BoundReport>> {
    let lines = source.lines()?;
    let [line] = &lines[..] else {
        return Err(Error::Config("bruteforce takes exactly one sample".into()));
    };
    let entry = line.entry.as_ref().map_err(|e| Error::Config(e.to_string()))?;
    let image = Image::load(&entry.image_path)?;
    let (partition, _) = build_partition(config, &image, source.partition_file())?;
    let m = partition.region_count();
    if m > MAX_EXHAUSTIVE_REGIONS {
        return Err(Error::CostGuard {
            regions: m,
            limit: MAX_EXHAUSTIVE_REGIONS,
        });
    }
    let detector: Box<dyn Detector> = config.detector_spec([&entry.category])?.build()?;
    let ks: Vec<usize> = if ks.is_empty() { (0..=m).collect() } else { ks.to_vec() };
    bound_check(
        &*detector,
        &image,
        &partition,
        &entry.target(),
        &ks,
        &search_options(config, config.workers),
    )
}

fn report(e: &Error) -> i32 {
    log::error!("{e}");
    match e {
        Error::Backend(_) | Error::SearchAborted { .. } if !is_protocol_error(e) => EXIT_SAMPLE_FAILURES,
        _ => EXIT_CONFIG,
    }
}

fn finish(summary: Result<RunSummary>) -> i32 {
    match summary {
        Ok(s) => {
            for f in s.samples.iter().filter(|s| s.status == SampleStatus::Failed) {
                log::error!("sample {}: {}", f.id, f.error.as_deref().unwrap_or("failed"));
            }
            println!(
                "{}: {} samples, {} failed",
                s.command,
                s.samples.len(),
                s.failed
            );
            s.exit_code()
        }
        Err(e) => report(&e),
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Attribute {
            run,
            target,
            raw,
            plots,
        } => finish((|| {
            let mut config = run.resolve()?;
            config.metrics.raw_saliency |= raw;
            config.metrics.plots |= plots;
            cmd_attribute(&config, &SampleSource::from_args(&target)?)
        })()),
        Command::Evaluate {
            run,
            target,
            esr_threshold,
            esr_budget,
        } => finish((|| {
            let mut config = run.resolve()?;
            if let Some(t) = esr_threshold {
                config.metrics.esr_threshold = t;
            }
            if esr_budget.is_some() {
                config.metrics.esr_budget = esr_budget;
            }
            config.validate()?;
            cmd_evaluate(&config, &SampleSource::from_args(&target)?).map(|(summary, _)| summary)
        })()),
        Command::Benchmark {
            run,
            samples,
            random_orderings,
        } => {
            let result = (|| {
                let mut config = run.resolve()?;
                if let Some(n) = samples {
                    config.benchmark.samples = n;
                }
                if let Some(r) = random_orderings {
                    config.benchmark.random_orderings = r;
                }
                cmd_benchmark(&config)
            })();
            match result {
                Ok(table) => {
                    println!("{:<12} {:>10} {:>10}", "ordering", "insertion", "deletion");
                    for s in &table.summary {
                        println!("{:<12} {:>10.4} {:>10.4}", s.ordering, s.insertion_mean, s.deletion_mean);
                    }
                    EXIT_OK
                }
                Err(e) => report(&e),
            }
        }
        Command::Bruteforce { run, target, k } => {
            let result = (|| cmd_bruteforce(&run.resolve()?, &SampleSource::from_args(&target)?, &k))();
            match result {
                Ok(reports) => {
                    println!("{:>3} {:>12} {:>12} {:>8}  bound", "k", "F(greedy)", "F(opt)", "ratio");
                    for r in &reports {
                        println!(
                            "{:>3} {:>12.6} {:>12.6} {:>8.4}  {}",
                            r.k,
                            r.greedy_value,
                            r.optimum_value,
                            r.ratio,
                            if r.passes { "pass" } else { "FAIL" }
                        );
                    }
                    if reports.iter().all(|r| r.passes) {
                        EXIT_OK
                    } else {
                        EXIT_SAMPLE_FAILURES
                    }
                }
                Err(e) => report(&e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag_parses() {
        assert_eq!(parse_grid("4x3"), Ok((4, 3)));
        assert_eq!(parse_grid("2X2"), Ok((2, 2)));
        assert!(parse_grid("4").is_err());
        assert!(parse_grid("ax2").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "regions = 50\nseed = 3\nworkers = 2\n").unwrap();
        let args = RunArgs {
            config: Some(path),
            seed: Some(11),
            grid: Some((4, 4)),
            iou_only: true,
            ..Default::default()
        };
        let c = args.resolve().unwrap();
        assert_eq!((c.regions, c.seed, c.workers, c.grid, c.iou_only), (50, 11, 2, Some((4, 4)), true));
    }

    #[test]
    fn cli_parses_attribute_invocation() {
        let cli = Cli::try_parse_from([
            "vps", "attribute", "--image", "a.png", "--box", "1,2,3,4", "--category", "dog", "--grid", "4x4",
            "--detector", "blob:w.json", "--out", "o",
        ])
        .unwrap();
        let Command::Attribute { run, target, .. } = cli.command else {
            panic!("wrong subcommand");
        };
        assert_eq!(target.bbox, Some(BBox::new(1., 2., 3., 4.).unwrap()));
        assert_eq!(run.grid, Some((4, 4)));
        assert!(Cli::try_parse_from(["vps", "attribute", "--image", "a.png"]).is_err());
    }
}
