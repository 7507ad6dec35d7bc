use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_partition, ensure_dir, search_options, worker_pool, write_atomic, ManifestEntry, RunConfig,
    RunSummary, SampleSource, SampleStatus, SampleSummary, RUN_SUMMARY,
};
use crate::detector::{Detector, ScoreThreshold};
use crate::evaluation::{render_curves_png, response_trace, Direction, EvalOptions, ResponseTrace};
use crate::raster::Image;
use crate::search::{greedy_search, AttributionResult};
use crate::segmentation::io::write_partition;
use crate::{Error, Result};

pub const PARTITION_FILE: &str = "partition.pgm";
pub const ATTRIBUTION_FILE: &str = "attribution.json";
pub const SALIENCY_PNG: &str = "saliency.png";
pub const SALIENCY_RAW: &str = "saliency.raw";
pub const CURVES_FILE: &str = "curves.json";
pub const CURVES_PNG: &str = "curves.png";

/// Insertion and deletion responses stored next to an attribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvesFile {
    pub insertion: ResponseTrace,
    pub deletion: ResponseTrace,
}

struct Detectors {
    /// Used to rank regions; carries the score threshold if one is set.
    search: Box<dyn Detector>,
    /// Used for the response curves.
    plain: Arc<dyn Detector>,
}

fn detectors(config: &RunConfig, lines: &[super::ManifestLine]) -> Result<Detectors> {
    let cats: Vec<_> = lines
        .iter()
        .filter_map(|l| l.entry.as_ref().ok().map(|e| &e.category))
        .collect();
    let spec = config.detector_spec(cats)?;
    let plain: Arc<dyn Detector> = spec.build_unfiltered()?.into();
    let search: Box<dyn Detector> = match spec.score_threshold {
        Some(t) => Box::new(ScoreThreshold::new(plain.clone(), t)?),
        None => Box::new(plain.clone()),
    };
    Ok(Detectors { search, plain })
}

fn attribute_one(
    config: &RunConfig,
    source: &SampleSource,
    dets: &Detectors,
    id: &str,
    entry: &ManifestEntry,
    inner_workers: usize,
) -> Result<SampleSummary> {
    let image = Image::load(&entry.image_path)?;
    let (partition, provenance) = build_partition(config, &image, source.partition_file())?;
    let target = entry.target();
    let result: AttributionResult = greedy_search(
        &*dets.search,
        &image,
        &partition,
        &target,
        &search_options(config, inner_workers),
    )?;

    let eval = EvalOptions {
        baseline: config.baseline,
        iou_only: config.iou_only,
        workers: inner_workers,
        ..Default::default()
    };
    let trace = |d| response_trace(&*dets.plain, &image, &partition, &result.order, &target, d, &eval);
    let curves = CurvesFile {
        insertion: trace(Direction::Insertion)?,
        deletion: trace(Direction::Deletion)?,
    };

    // write everything into a scratch directory, then swap it into place
    let final_dir = config.out.join(id);
    let tmp = config.out.join(format!(".{id}.partial"));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    ensure_dir(&tmp)?;
    let put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = tmp.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    write_partition(&tmp.join(PARTITION_FILE), &partition, provenance)?;
    put(ATTRIBUTION_FILE, &serde_json::to_vec_pretty(&result.to_record())?)?;
    put(SALIENCY_PNG, &result.saliency.to_png_bytes()?)?;
    put(CURVES_FILE, &serde_json::to_vec_pretty(&curves)?)?;
    let mut artifacts = vec![PARTITION_FILE, ATTRIBUTION_FILE, SALIENCY_PNG, CURVES_FILE];
    if config.metrics.raw_saliency {
        let mut raw = Vec::new();
        result
            .saliency
            .write_raw(&mut raw)
            .map_err(|e| Error::io(tmp.join(SALIENCY_RAW), e))?;
        put(SALIENCY_RAW, &raw)?;
        artifacts.push(SALIENCY_RAW);
    }
    if config.metrics.plots {
        put(CURVES_PNG, &render_curves_png(&[&curves.insertion, &curves.deletion], 320, 200)?)?;
        artifacts.push(CURVES_PNG);
    }
    if final_dir.exists() {
        std::fs::remove_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
    }
    std::fs::rename(&tmp, &final_dir).map_err(|e| Error::io(&final_dir, e))?;

    Ok(SampleSummary {
        id: id.to_owned(),
        sample_kind: Some(entry.sample_kind),
        status: SampleStatus::Ok,
        error: None,
        artifacts: artifacts
            .iter()
            .map(|a| Path::new(id).join(a).to_string_lossy().into_owned())
            .collect(),
        region_count: Some(partition.region_count()),
        evaluations: Some(result.stats.evaluations),
        detector_calls: Some(result.stats.detector_calls),
        protocol_error: false,
    })
}

/// Runs the search for every sample and writes, per sample, the partition
/// (PGM plus sidecar), `attribution.json`, `saliency.png` and `curves.json`
/// under `<out>/<id>/`, then `run-summary.json` at the top. A failing
/// sample is recorded and does not stop the others.
pub fn cmd_attribute(config: &RunConfig, source: &SampleSource) -> Result<RunSummary> {
    config.validate()?;
    let lines = source.lines()?;
    let dets = detectors(config, &lines)?;
    ensure_dir(&config.out)?;
    if lines.is_empty() {
        log::warn!("manifest has no samples; nothing to do");
    }

    let parallel_samples = lines.len() > 1 && config.workers > 1;
    let inner = if parallel_samples { 1 } else { config.workers };
    let one = |line: &super::ManifestLine| -> SampleSummary {
        let kind = line.entry.as_ref().ok().map(|e| e.sample_kind);
        let outcome = line
            .entry
            .as_ref()
            .map_err(|e| Error::invalid(e.to_string()))
            .and_then(|entry| attribute_one(config, source, &dets, &line.id, entry, inner));
        match outcome {
            Ok(s) => {
                log::info!("sample {}: {} regions ranked", s.id, s.region_count.unwrap_or(0));
                s
            }
            Err(e) => SampleSummary::failed(line.id.clone(), kind, &e),
        }
    };
    let samples: Vec<SampleSummary> = if parallel_samples {
        worker_pool(config.workers)?.install(|| lines.par_iter().map(one).collect())
    } else {
        lines.iter().map(one).collect()
    };

    let summary = RunSummary {
        command: "attribute".into(),
        detector: dets.plain.fingerprint(),
        failed: samples.iter().filter(|s| s.status == SampleStatus::Failed).count(),
        samples,
    };
    write_atomic(&config.out.join(RUN_SUMMARY), &serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}
