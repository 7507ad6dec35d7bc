use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::attribute::{ATTRIBUTION_FILE, PARTITION_FILE};
use super::{
    ensure_dir, worker_pool, write_atomic, ManifestEntry, ManifestLine, RunConfig, RunSummary, SampleKind,
    SampleSource, SampleStatus, SampleSummary,
};
use crate::detector::Detector;
use crate::evaluation::{evaluate, EvalOptions, MetricReport};
use crate::raster::Image;
use crate::search::AttributionRecord;
use crate::segmentation::io::read_partition;
use crate::{Error, Result};

pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const AGGREGATES_CSV: &str = "aggregates.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// Attribution artifacts were missing; excluded from aggregates.
    Absent,
    Failed,
}

/// One flat per-sample row, shared by the JSON and CSV outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub id: String,
    pub sample_kind: Option<SampleKind>,
    pub status: RowStatus,
    pub m: Option<usize>,
    pub ins_clue: Option<f64>,
    pub ins_class: Option<f64>,
    pub ins_iou: Option<f64>,
    pub del_clue: Option<f64>,
    pub del_class: Option<f64>,
    pub del_iou: Option<f64>,
    pub avg_highest_score: Option<f64>,
    pub point_game: Option<u8>,
    pub energy_pg: Option<f64>,
    pub esr_success: Option<bool>,
    pub esr_minimal_prefix: Option<usize>,
    pub error: Option<String>,
}

impl MetricRow {
    fn empty(id: String, kind: Option<SampleKind>, status: RowStatus, error: Option<String>) -> Self {
        Self {
            id,
            sample_kind: kind,
            status,
            m: None,
            ins_clue: None,
            ins_class: None,
            ins_iou: None,
            del_clue: None,
            del_class: None,
            del_iou: None,
            avg_highest_score: None,
            point_game: None,
            energy_pg: None,
            esr_success: None,
            esr_minimal_prefix: None,
            error,
        }
    }

    fn from_report(id: String, kind: SampleKind, m: usize, r: &MetricReport) -> Self {
        Self {
            m: Some(m),
            ins_clue: Some(r.insertion.clue),
            ins_class: Some(r.insertion.class),
            ins_iou: Some(r.insertion.iou),
            del_clue: Some(r.deletion.clue),
            del_class: Some(r.deletion.class),
            del_iou: Some(r.deletion.iou),
            avg_highest_score: Some(r.avg_highest_score),
            point_game: Some(r.point_game),
            energy_pg: Some(r.energy_pg),
            esr_success: Some(r.esr.success),
            esr_minimal_prefix: r.esr.minimal_prefix,
            ..Self::empty(id, Some(kind), RowStatus::Ok, None)
        }
    }
}

/// Means over the rows of one group. `esr_rate` is the share of rows whose
/// ESR succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub group: String,
    pub count: usize,
    pub ins_clue: f64,
    pub ins_class: f64,
    pub ins_iou: f64,
    pub del_clue: f64,
    pub del_class: f64,
    pub del_iou: f64,
    pub avg_highest_score: f64,
    pub point_game: f64,
    pub energy_pg: f64,
    pub esr_rate: f64,
}

impl AggregateRow {
    fn over(group: String, rows: &[&MetricRow]) -> Self {
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&MetricRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        Self {
            group,
            count: rows.len(),
            ins_clue: mean(&|r| r.ins_clue.unwrap_or(0.0)),
            ins_class: mean(&|r| r.ins_class.unwrap_or(0.0)),
            ins_iou: mean(&|r| r.ins_iou.unwrap_or(0.0)),
            del_clue: mean(&|r| r.del_clue.unwrap_or(0.0)),
            del_class: mean(&|r| r.del_class.unwrap_or(0.0)),
            del_iou: mean(&|r| r.del_iou.unwrap_or(0.0)),
            avg_highest_score: mean(&|r| r.avg_highest_score.unwrap_or(0.0)),
            point_game: mean(&|r| r.point_game.unwrap_or(0) as f64),
            energy_pg: mean(&|r| r.energy_pg.unwrap_or(0.0)),
            esr_rate: mean(&|r| r.esr_success.unwrap_or(false) as u8 as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricRow>,
    /// `all`, `failure` (every non-correct kind) and one group per kind
    /// present; only rows with status `ok` contribute.
    pub aggregates: Vec<AggregateRow>,
}

impl MetricsTable {
    pub fn from_rows(rows: Vec<MetricRow>) -> Self {
        let ok: Vec<&MetricRow> = rows.iter().filter(|r| r.status == RowStatus::Ok).collect();
        let mut groups: BTreeMap<String, Vec<&MetricRow>> = BTreeMap::new();
        for r in &ok {
            let kind = r.sample_kind.unwrap_or_default();
            groups.entry(kind.to_string()).or_default().push(r);
            if kind.is_failure() {
                groups.entry("failure".into()).or_default().push(r);
            }
        }
        let mut aggregates = Vec::new();
        if !ok.is_empty() {
            aggregates.push(AggregateRow::over("all".into(), &ok));
        }
        aggregates.extend(groups.into_iter().map(|(g, rs)| AggregateRow::over(g, &rs)));
        Self { rows, aggregates }
    }

    pub fn aggregate(&self, group: &str) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.group == group)
    }

    fn csv<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for it in items {
            w.serialize(it)?;
        }
        w.into_inner().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn rows_csv(&self) -> Result<Vec<u8>> {
        Self::csv(&self.rows)
    }

    pub fn aggregates_csv(&self) -> Result<Vec<u8>> {
        Self::csv(&self.aggregates)
    }
}

fn evaluate_one(
    config: &RunConfig,
    detector: &dyn Detector,
    id: &str,
    entry: &ManifestEntry,
    workers: usize,
) -> Result<MetricRow> {
    let dir = config.out.join(id);
    let (pgm, record) = (dir.join(PARTITION_FILE), dir.join(ATTRIBUTION_FILE));
    if !pgm.exists() || !record.exists() {
        let missing = if pgm.exists() { &record } else { &pgm };
        return Ok(MetricRow::empty(
            id.to_owned(),
            Some(entry.sample_kind),
            RowStatus::Absent,
            Some(format!("missing {}", missing.display())),
        ));
    }
    let image = Image::load(&entry.image_path)?;
    let (partition, _) = read_partition(&pgm)?;
    let bytes = std::fs::read(&record).map_err(|e| Error::io(&record, e))?;
    let attribution = serde_json::from_slice::<AttributionRecord>(&bytes)?.into_result(&partition)?;
    if attribution.target != entry.target() {
        return Err(Error::invalid(format!(
            "{} explains a different target than the manifest entry",
            record.display()
        )));
    }
    let opts = EvalOptions {
        baseline: config.baseline,
        iou_only: config.iou_only,
        esr_threshold: config.metrics.esr_threshold,
        esr_budget: config.metrics.esr_budget,
        workers,
    };
    let (report, _) = evaluate(
        detector,
        &image,
        &partition,
        &attribution.order,
        &attribution.saliency,
        &entry.target(),
        &opts,
    )?;
    Ok(MetricRow::from_report(
        id.to_owned(),
        entry.sample_kind,
        partition.region_count(),
        &report,
    ))
}

/// Recomputes the metric battery for every sample from the artifacts that
/// `attribute` left in the output directory and writes `metrics.json`,
/// `metrics.csv` and `aggregates.csv`. Samples without artifacts are marked
/// absent and left out of the aggregates.
pub fn cmd_evaluate(config: &RunConfig, source: &SampleSource) -> Result<(RunSummary, MetricsTable)> {
    config.validate()?;
    let lines = source.lines()?;
    let cats: Vec<_> = lines
        .iter()
        .filter_map(|l| l.entry.as_ref().ok().map(|e| &e.category))
        .collect();
    let detector = config.detector_spec(cats)?.build_unfiltered()?;
    ensure_dir(&config.out)?;
    if lines.is_empty() {
        log::warn!("manifest has no samples; nothing to do");
    }

    let parallel = lines.len() > 1 && config.workers > 1;
    let inner = if parallel { 1 } else { config.workers };
    let one = |line: &ManifestLine| -> (MetricRow, SampleSummary) {
        let kind = line.entry.as_ref().ok().map(|e| e.sample_kind);
        let outcome = line
            .entry
            .as_ref()
            .map_err(|e| Error::invalid(e.to_string()))
            .and_then(|entry| evaluate_one(config, &*detector, &line.id, entry, inner));
        match outcome {
            Ok(row) => {
                let summary = SampleSummary {
                    id: line.id.clone(),
                    sample_kind: kind,
                    status: SampleStatus::Ok,
                    error: row.error.clone(),
                    artifacts: Vec::new(),
                    region_count: row.m,
                    evaluations: None,
                    detector_calls: None,
                    protocol_error: false,
                };
                (row, summary)
            }
            Err(e) => (
                MetricRow::empty(line.id.clone(), kind, RowStatus::Failed, Some(e.to_string())),
                SampleSummary::failed(line.id.clone(), kind, &e),
            ),
        }
    };
    let results: Vec<(MetricRow, SampleSummary)> = if parallel {
        worker_pool(config.workers)?.install(|| lines.par_iter().map(one).collect())
    } else {
        lines.iter().map(one).collect()
    };
    let (rows, samples): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let table = MetricsTable::from_rows(rows);
    write_atomic(&config.out.join(METRICS_JSON), &serde_json::to_vec_pretty(&table)?)?;
    write_atomic(&config.out.join(METRICS_CSV), &table.rows_csv()?)?;
    write_atomic(&config.out.join(AGGREGATES_CSV), &table.aggregates_csv()?)?;

    let summary = RunSummary {
        command: "evaluate".into(),
        detector: detector.fingerprint(),
        failed: samples.iter().filter(|s| s.status == SampleStatus::Failed).count(),
        samples,
    };
    Ok((summary, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, kind: SampleKind, v: f64) -> MetricRow {
        MetricRow {
            ins_clue: Some(v),
            del_clue: Some(1.0 - v),
            esr_success: Some(v > 0.5),
            point_game: Some(1),
            ..MetricRow::empty(id.into(), Some(kind), RowStatus::Ok, None)
        }
    }

    #[test]
    fn identical_rows_average_to_themselves() {
        let t = MetricsTable::from_rows((0..4).map(|i| row(&i.to_string(), SampleKind::Correct, 0.37)).collect());
        let all = t.aggregate("all").unwrap();
        assert_eq!(all.count, 4);
        assert!((all.ins_clue - 0.37).abs() < 1e-15);
        assert!(t.aggregate("failure").is_none());
    }

    #[test]
    fn groups_by_kind_and_skips_absent() {
        let mut rows = vec![
            row("a", SampleKind::Correct, 0.9),
            row("b", SampleKind::Misclassified, 0.2),
            row("c", SampleKind::Undetected, 0.6),
        ];
        rows.push(MetricRow::empty("d".into(), Some(SampleKind::Correct), RowStatus::Absent, None));
        let t = MetricsTable::from_rows(rows);
        assert_eq!(t.aggregate("all").unwrap().count, 3);
        assert_eq!(t.aggregate("correct").unwrap().count, 1);
        let fail = t.aggregate("failure").unwrap();
        assert_eq!(fail.count, 2);
        assert!((fail.ins_clue - 0.4).abs() < 1e-12);
        assert_eq!(fail.esr_rate, 0.5);
        let csv = String::from_utf8(t.rows_csv().unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(4).unwrap().contains("absent"));
    }
}
