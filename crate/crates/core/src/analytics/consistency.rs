use super::snapshot::AnnotationSnapshot;
use super::{mae, pearson, AnalyticsError};
use crate::aggregation::{aggregate_votes, worker_weight, AggregatedLabel, WeightSchemeConfig};
use crate::model::{GoldRule, LabelSet};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Expert-based and majority-vote-based score of one assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScorePair {
    pub assignment_id: String,
    pub worker_id: String,
    pub expert_score: f64,
    pub mv_score: f64,
}

/// Which items the majority-vote score is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveVariant {
    /// The payload items, judged against their aggregated winners.
    Payload,
    /// The embedded gold items, judged against the aggregate of gold answers.
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyCurvePoint {
    pub eta: f64,
    pub avg_votes: f64,
    pub rho: f64,
    pub mae: f64,
    pub n_assignments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveWarning {
    pub eta: f64,
    pub variant: CurveVariant,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConsistencyCurve {
    pub payload: Vec<ConsistencyCurvePoint>,
    pub gold: Vec<ConsistencyCurvePoint>,
    pub warnings: Vec<CurveWarning>,
}

impl ConsistencyCurve {
    pub fn points(&self, variant: CurveVariant) -> &[ConsistencyCurvePoint] {
        match variant {
            CurveVariant::Payload => &self.payload,
            CurveVariant::Gold => &self.gold,
        }
    }
}

type AnswerIndex<'a> = BTreeMap<(&'a str, &'a str), LabelSet>;

fn answer_index(snapshot: &AnnotationSnapshot) -> AnswerIndex<'_> {
    snapshot
        .votes
        .iter()
        .map(|v| ((v.assignment_id.as_str(), v.item_id.as_str()), v.labels))
        .collect()
}

fn eligible_workers(snapshot: &AnnotationSnapshot) -> BTreeSet<&str> {
    let min = snapshot.config.min_assignments_for_analysis;
    snapshot
        .assignment_counts()
        .into_iter()
        .filter(|(_, n)| *n >= min)
        .map(|(w, _)| w)
        .collect()
}

fn pairs_at(
    snapshot: &AnnotationSnapshot,
    answers: &AnswerIndex<'_>,
    aggregates: &BTreeMap<String, AggregatedLabel>,
    eligible: &BTreeSet<&str>,
    cut: u64,
    variant: CurveVariant,
) -> Result<Vec<ScorePair>, AnalyticsError> {
    let mut pairs = Vec::new();
    for a in snapshot
        .assignments
        .iter()
        .filter(|a| a.graded_seq <= cut && eligible.contains(a.worker_id.as_str()))
    {
        let items = match variant {
            CurveVariant::Payload => &a.payload_item_ids,
            CurveVariant::Gold => &a.gold_item_ids,
        };
        let mut correct = 0usize;
        for id in items {
            let agg = aggregates.get(id).ok_or_else(|| AnalyticsError::MissingAggregate(id.clone()))?;
            let answer = answers.get(&(a.assignment_id.as_str(), id.as_str())).ok_or_else(|| {
                AnalyticsError::MissingAnswer { assignment: a.assignment_id.clone(), item: id.clone() }
            })?;
            if GoldRule::Overlap.is_correct(*answer, agg.winners) {
                correct += 1;
            }
        }
        pairs.push(ScorePair {
            assignment_id: a.assignment_id.clone(),
            worker_id: a.worker_id.clone(),
            expert_score: a.score,
            mv_score: correct as f64 / items.len() as f64,
        });
    }
    Ok(pairs)
}

/// Score pairs over the whole snapshot. `aggregates` must hold the items that
/// `variant` judges (payload or gold aggregates). Workers with fewer than
/// `min_assignments_for_analysis` graded assignments are left out.
pub fn score_pairs(
    snapshot: &AnnotationSnapshot,
    aggregates: &BTreeMap<String, AggregatedLabel>,
    variant: CurveVariant,
) -> Result<Vec<ScorePair>, AnalyticsError> {
    let answers = answer_index(snapshot);
    let eligible = eligible_workers(snapshot);
    pairs_at(snapshot, &answers, aggregates, &eligible, u64::MAX, variant)
}

fn summarize(eta: f64, avg_votes: f64, pairs: &[ScorePair]) -> Result<ConsistencyCurvePoint, AnalyticsError> {
    let expert: Vec<f64> = pairs.iter().map(|p| p.expert_score).collect();
    let mv: Vec<f64> = pairs.iter().map(|p| p.mv_score).collect();
    Ok(ConsistencyCurvePoint {
        eta,
        avg_votes,
        rho: pearson(&expert, &mv)?,
        mae: mae(&expert, &mv)?,
        n_assignments: pairs.len(),
    })
}

/// Consistency of expert and majority-vote scores as a growing fraction `η`
/// of the payload votes (in timestamp order) is used for aggregation.
///
/// At each `η` the first `⌈η·total⌉` payload votes are kept together with
/// every gold vote and grading that precedes the next payload vote.
/// Assignments graded within that prefix are scored.
pub fn consistency_curve(
    snapshot: &AnnotationSnapshot,
    eta_grid: &[f64],
    weights: &WeightSchemeConfig,
) -> Result<ConsistencyCurve, AnalyticsError> {
    let mut prev = 0.0;
    for &eta in eta_grid {
        if !(eta > prev && eta <= 1.0) {
            return Err(AnalyticsError::InvalidEta(eta));
        }
        prev = eta;
    }
    let payload: Vec<_> = snapshot.payload_votes().collect();
    let answers = answer_index(snapshot);
    let eligible = eligible_workers(snapshot);
    let k = snapshot.config.target_votes as f64;
    let mut curve = ConsistencyCurve::default();

    for &eta in eta_grid {
        let warn = |variant, reason: String| CurveWarning { eta, variant, reason };
        if payload.is_empty() {
            for variant in [CurveVariant::Payload, CurveVariant::Gold] {
                curve.warnings.push(warn(variant, "no payload votes".into()));
            }
            continue;
        }
        let keep = ((eta * payload.len() as f64).ceil() as usize).clamp(1, payload.len());
        let cut = payload.get(keep).map_or(u64::MAX, |v| v.timestamp - 1);
        let stats = snapshot.worker_stats(cut);
        let weight_of = |w: &str| stats.get(w).map_or(weights.untracked_weight(), |s| worker_weight(weights, s));
        let in_cut = |v: &&crate::model::Vote| v.timestamp <= cut;

        for variant in [CurveVariant::Payload, CurveVariant::Gold] {
            let votes = match variant {
                CurveVariant::Payload => snapshot.votes.iter().filter(|v| !v.gold).filter(in_cut).collect::<Vec<_>>(),
                CurveVariant::Gold => snapshot.votes.iter().filter(|v| v.gold).filter(in_cut).collect::<Vec<_>>(),
            };
            let aggregates = aggregate_votes(votes, weight_of).labels;
            let point = pairs_at(snapshot, &answers, &aggregates, &eligible, cut, variant)
                .and_then(|pairs| summarize(eta, k * eta, &pairs));
            match point {
                Ok(p) => match variant {
                    CurveVariant::Payload => curve.payload.push(p),
                    CurveVariant::Gold => curve.gold.push(p),
                },
                Err(e) => curve.warnings.push(warn(variant, e.to_string())),
            }
        }
    }
    Ok(curve)
}
