//! CSV exports. Every table is RFC-4180 quoted UTF-8 with a header row, and
//! floats use the shortest round-tripping decimal form so that exports of
//! equal states are byte-identical.

use crate::aggregation::{
    aggregate_state, difficulty_rank, CorpusAggregate, DifficultyThresholds, WeightScheme, WeightSchemeConfig,
};
use crate::analytics::{
    confusion_matrix, consistency_curve, multilabel_report, AnalyticsError, AnnotationSnapshot, ConsistencyCurve,
    ConsistencyCurvePoint, ConfusionMatrix, MultilabelReport,
};
use crate::model::EmotionLabel;
use crate::simulation::ExperimentSummary;
use crate::workflow::EngineState;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

/// A named CSV document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub file_name: &'static str,
    pub bytes: Vec<u8>,
}

impl Table {
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, ExportError> {
        let path = dir.join(self.file_name);
        let io = |source| ExportError::Io { path: path.clone(), source };
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(&path, &self.bytes).map_err(io)?;
        Ok(path)
    }
}

pub fn write_tables(tables: &[Table], dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    tables.iter().map(|t| t.write_to(dir)).collect()
}

fn table<F>(file_name: &'static str, header: &[&str], fill: F) -> Result<Table, ExportError>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    fill(&mut writer)?;
    let bytes = writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(Table { file_name, bytes })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const DEFAULT_ETA_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// One row per aggregated item and scheme.
pub fn aggregates_csv(aggregates: &[CorpusAggregate]) -> Result<Table, ExportError> {
    let mut header = vec!["item_id", "primary", "winners", "entropy_bits"];
    header.extend(EmotionLabel::ALL.iter().map(|e| e.code()));
    header.push("scheme");
    table("aggregates.csv", &header, |w| {
        for agg in aggregates {
            let scheme = agg.scheme.map_or("", WeightScheme::id);
            for label in agg.labels.values() {
                let mut row = vec![
                    label.item_id.clone(),
                    label.primary.code().to_string(),
                    label.winners.to_codes(),
                    label.entropy_bits.to_string(),
                ];
                row.extend(EmotionLabel::ALL.iter().map(|e| label.tally.get(*e).to_string()));
                row.push(scheme.to_string());
                w.write_record(&row)?;
            }
        }
        Ok(())
    })
}

pub fn scheme_aggregates(state: &EngineState, schemes: &[WeightScheme]) -> Vec<CorpusAggregate> {
    schemes
        .iter()
        .map(|s| aggregate_state(state, &WeightSchemeConfig::from_system(*s, &state.config)))
        .collect()
}

fn curve_table(file_name: &'static str, points: &[ConsistencyCurvePoint]) -> Result<Table, ExportError> {
    table(file_name, &["eta", "avg_votes", "rho", "mae", "n"], |w| {
        for p in points {
            w.write_record([
                p.eta.to_string(),
                p.avg_votes.to_string(),
                p.rho.to_string(),
                p.mae.to_string(),
                p.n_assignments.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// `consistency_curve.csv` (payload variant), `consistency_curve_gold.csv`
/// and `consistency_warnings.csv`.
pub fn consistency_tables(curve: &ConsistencyCurve) -> Result<Vec<Table>, ExportError> {
    let warnings = table("consistency_warnings.csv", &["eta", "variant", "reason"], |w| {
        for warning in &curve.warnings {
            let variant = match warning.variant {
                crate::analytics::CurveVariant::Payload => "payload",
                crate::analytics::CurveVariant::Gold => "gold",
            };
            w.write_record([warning.eta.to_string(), variant.to_string(), warning.reason.clone()])?;
        }
        Ok(())
    })?;
    Ok(vec![
        curve_table("consistency_curve.csv", &curve.payload)?,
        curve_table("consistency_curve_gold.csv", &curve.gold)?,
        warnings,
    ])
}

pub fn confusion_csv(matrix: &ConfusionMatrix) -> Result<Table, ExportError> {
    let normalized = matrix.normalized();
    table("confusion_matrix.csv", &["gold_label", "answered_label", "count", "normalized"], |w| {
        for g in EmotionLabel::ALL {
            for e in EmotionLabel::ALL {
                w.write_record([
                    g.code().to_string(),
                    e.code().to_string(),
                    matrix.count(g, e).to_string(),
                    normalized[g.index()][e.index()].to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

pub fn multilabel_csv(report: &MultilabelReport) -> Result<Table, ExportError> {
    table("multilabel_report.csv", &["metric", "emotion", "hits", "total", "value"], |w| {
        w.write_record([
            "single_label_fraction".to_string(),
            String::new(),
            String::new(),
            report.n_votes.to_string(),
            report.single_label_fraction.to_string(),
        ])?;
        for (metric, rates) in [("tpr_single", &report.tpr_single), ("tpr_multi", &report.tpr_multi)] {
            for (emotion, rate) in rates {
                w.write_record([
                    metric.to_string(),
                    emotion.code().to_string(),
                    rate.hits.to_string(),
                    rate.total.to_string(),
                    opt(rate.value()),
                ])?;
            }
        }
        Ok(())
    })
}

pub fn difficulty_csv(aggregate: &CorpusAggregate, thresholds: &DifficultyThresholds) -> Result<Table, ExportError> {
    let ranked = difficulty_rank(aggregate.labels.values(), thresholds);
    table("difficulty.csv", &["rank", "item_id", "entropy_bits", "tier", "primary"], |w| {
        for (i, item) in ranked.iter().enumerate() {
            let primary = aggregate.labels[&item.item_id].primary.code();
            w.write_record([
                (i + 1).to_string(),
                item.item_id.clone(),
                item.entropy_bits.to_string(),
                item.tier.id().to_string(),
                primary.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn votes_csv(state: &EngineState) -> Result<Table, ExportError> {
    table("votes.csv", &["timestamp", "assignment_id", "worker_id", "item_id", "labels", "gold"], |w| {
        for v in &state.votes {
            w.write_record([
                v.timestamp.to_string(),
                v.assignment_id.clone(),
                v.worker_id.clone(),
                v.item_id.clone(),
                v.labels.to_codes(),
                v.gold.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn workers_csv(state: &EngineState) -> Result<Table, ExportError> {
    let header = ["worker_id", "qualification", "lifecycle", "n_assignments", "cumulative_score", "sigma", "k"];
    table("workers.csv", &header, |w| {
        for worker in state.workers.values() {
            let snake = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
            w.write_record([
                worker.worker_id.clone(),
                snake(serde_json::to_value(worker.qualification).expect("enum serializes")),
                snake(serde_json::to_value(worker.lifecycle).expect("enum serializes")),
                worker.score_series.len().to_string(),
                opt(worker.stats.map(|s| s.m)),
                opt(worker.stats.map(|s| s.sigma)),
                opt(worker.stats.map(|s| s.k)),
            ])?;
        }
        Ok(())
    })
}

pub fn items_csv(state: &EngineState) -> Result<Table, ExportError> {
    table("items.csv", &["item_id", "votes_collected", "reserved"], |w| {
        for id in &state.item_order {
            let p = &state.items[id];
            w.write_record([id.clone(), p.votes_collected.to_string(), p.reserved.to_string()])?;
        }
        Ok(())
    })
}

pub fn summary_csv(summary: &ExperimentSummary) -> Result<Table, ExportError> {
    let value = serde_json::to_value(summary).expect("summary serializes");
    let fields = value.as_object().expect("struct serializes to an object");
    let header: Vec<&str> = fields.keys().map(String::as_str).collect();
    table("summary.csv", &header, |w| {
        w.write_record(fields.values().map(|v| match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        }))
    })
}

/// Tables written by the `export` command: raw votes, workers, item fill and
/// the aggregates of every scheme.
pub fn full_export(state: &EngineState) -> Result<Vec<Table>, ExportError> {
    Ok(vec![
        votes_csv(state)?,
        workers_csv(state)?,
        items_csv(state)?,
        aggregates_csv(&scheme_aggregates(state, &WeightScheme::ALL))?,
    ])
}

/// Which analysis to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analysis {
    Consistency,
    Confusion,
    Multilabel,
    Difficulty,
}

impl std::str::FromStr for Analysis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "consistency" => Ok(Analysis::Consistency),
            "confusion" => Ok(Analysis::Confusion),
            "multilabel" => Ok(Analysis::Multilabel),
            "difficulty" => Ok(Analysis::Difficulty),
            other => Err(format!("unknown analysis `{other}`")),
        }
    }
}

pub fn analysis_tables(state: &EngineState, analysis: Analysis, scheme: WeightScheme) -> Result<Vec<Table>, ExportError> {
    let snapshot = AnnotationSnapshot::from_state(state);
    let weights = WeightSchemeConfig::from_system(scheme, &state.config);
    match analysis {
        Analysis::Consistency => consistency_tables(&consistency_curve(&snapshot, &DEFAULT_ETA_GRID, &weights)?),
        Analysis::Confusion => {
            let matrix = confusion_matrix(snapshot.gold_votes(), &snapshot.gold, &snapshot.targets, None)?;
            Ok(vec![confusion_csv(&matrix)?])
        }
        Analysis::Multilabel => Ok(vec![multilabel_csv(&multilabel_report(snapshot.gold_votes(), &snapshot.gold))?]),
        Analysis::Difficulty => {
            Ok(vec![difficulty_csv(&aggregate_state(state, &weights), &DifficultyThresholds::default())?])
        }
    }
}
