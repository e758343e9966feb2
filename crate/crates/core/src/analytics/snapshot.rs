use crate::model::{LabelSet, SystemConfig, Vote};
use crate::stats::{score_series_stats, ScoreSeriesStats};
use crate::workflow::{AssignmentStatus, EngineState};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct GradedAssignment {
    pub assignment_id: String,
    pub worker_id: String,
    pub score: f64,
    pub graded_seq: u64,
    pub payload_item_ids: Vec<String>,
    pub gold_item_ids: Vec<String>,
}

/// Read-only view of everything the analyses need from an engine.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSnapshot {
    pub config: SystemConfig,
    pub gold: BTreeMap<String, LabelSet>,
    pub targets: BTreeMap<String, String>,
    /// Graded assignments in grading order.
    pub assignments: Vec<GradedAssignment>,
    /// All votes, payload and gold, in timestamp order.
    pub votes: Vec<Vote>,
}

impl AnnotationSnapshot {
    pub fn from_state(state: &EngineState) -> Self {
        let gold = state
            .gold
            .iter()
            .filter_map(|(id, item)| item.gold_labels.map(|g| (id.clone(), g)))
            .collect();
        let targets = state
            .gold
            .values()
            .chain(state.items.values().map(|p| &p.item))
            .filter_map(|item| item.target.clone().map(|t| (item.item_id.clone(), t)))
            .collect();
        let mut assignments: Vec<GradedAssignment> = state
            .assignments
            .values()
            .filter(|a| a.status == AssignmentStatus::Graded)
            .map(|a| GradedAssignment {
                assignment_id: a.assignment_id.clone(),
                worker_id: a.worker_id.clone(),
                score: a.score.unwrap_or(0.0),
                graded_seq: a.graded_seq.unwrap_or(0),
                payload_item_ids: a.payload_item_ids.clone(),
                gold_item_ids: a.gold_item_ids.clone(),
            })
            .collect();
        assignments.sort_by_key(|a| a.graded_seq);
        let mut votes = state.votes.clone();
        votes.sort_by_key(|v| v.timestamp);
        AnnotationSnapshot { config: state.config.clone(), gold, targets, assignments, votes }
    }

    /// Graded assignment count per worker.
    pub fn assignment_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for a in &self.assignments {
            *counts.entry(a.worker_id.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Score statistics per worker over assignments graded at or before `cut`.
    pub fn worker_stats(&self, cut: u64) -> BTreeMap<String, ScoreSeriesStats> {
        let mut series: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for a in self.assignments.iter().filter(|a| a.graded_seq <= cut) {
            series.entry(a.worker_id.as_str()).or_default().push(a.score);
        }
        series
            .into_iter()
            .filter_map(|(w, s)| score_series_stats(&s).ok().map(|st| (w.to_string(), st)))
            .collect()
    }

    pub fn payload_votes(&self) -> impl Iterator<Item = &Vote> {
        self.votes.iter().filter(|v| !v.gold)
    }

    pub fn gold_votes(&self) -> impl Iterator<Item = &Vote> {
        self.votes.iter().filter(|v| v.gold)
    }
}
