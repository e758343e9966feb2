use super::{WorkflowError, SCORE_EPS};
use crate::model::SystemConfig;
use crate::stats::{score_series_stats, ScoreSeriesStats};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qualification {
    Candidate,
    Qualified,
    Failed,
}

/// Ordered so that a lifecycle only ever moves to larger values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Active,
    Warned,
    Disqualified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifecycleEvent {
    Warning,
    Disqualified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRecord {
    pub worker_id: String,
    pub qualification: Qualification,
    pub lifecycle: Lifecycle,
    pub score_series: Vec<f64>,
    /// `None` until the first graded assignment.
    pub stats: Option<ScoreSeriesStats>,
}

impl WorkerRecord {
    pub fn new(worker_id: impl Into<String>) -> Self {
        WorkerRecord {
            worker_id: worker_id.into(),
            qualification: Qualification::Candidate,
            lifecycle: Lifecycle::Active,
            score_series: Vec::new(),
            stats: None,
        }
    }

    pub fn cumulative_score(&self) -> Option<f64> {
        self.stats.map(|s| s.m)
    }

    pub fn can_work(&self) -> bool {
        self.qualification == Qualification::Qualified && self.lifecycle != Lifecycle::Disqualified
    }

    pub(crate) fn push_score(&mut self, score: f64) -> Result<(), WorkflowError> {
        self.score_series.push(score);
        self.stats = Some(score_series_stats(&self.score_series)?);
        Ok(())
    }

    pub(crate) fn escalate(&mut self, to: Lifecycle) {
        self.lifecycle = self.lifecycle.max(to);
    }
}

/// Appends an assignment score and derives the feedback events, in the order
/// warning then disqualification.
pub fn apply_submission(
    worker: &WorkerRecord,
    assignment_score: f64,
    config: &SystemConfig,
) -> Result<(WorkerRecord, Vec<LifecycleEvent>), WorkflowError> {
    if worker.lifecycle == Lifecycle::Disqualified {
        return Err(WorkflowError::WorkerDisqualified(worker.worker_id.clone()));
    }
    let mut updated = worker.clone();
    updated.push_score(assignment_score)?;
    let mut events = Vec::new();
    if config.monitoring {
        if assignment_score <= config.warning_threshold + SCORE_EPS {
            updated.escalate(Lifecycle::Warned);
            events.push(LifecycleEvent::Warning);
        }
        let m = updated.cumulative_score().expect("score just pushed");
        if m < config.min_cumulative - SCORE_EPS {
            updated.escalate(Lifecycle::Disqualified);
            events.push(LifecycleEvent::Disqualified);
        }
    }
    Ok((updated, events))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(scores: &[f64]) -> (WorkerRecord, Vec<Vec<LifecycleEvent>>) {
        let config = SystemConfig::default();
        let mut worker = WorkerRecord::new("w1");
        worker.qualification = Qualification::Qualified;
        let mut all = Vec::new();
        for &s in scores {
            let (next, events) = apply_submission(&worker, s, &config).unwrap();
            worker = next;
            all.push(events);
        }
        (worker, all)
    }

    #[test]
    fn warned_but_kept_at_boundary() {
        let (worker, events) = run(&[1.0, 0.6, 0.2]);
        assert!(events[0].is_empty());
        assert!(events[1].is_empty());
        assert_eq!(events[2], vec![LifecycleEvent::Warning]);
        assert_eq!(worker.lifecycle, Lifecycle::Warned);
        assert!((worker.cumulative_score().unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn disqualified_below_floor() {
        let (worker, events) = run(&[1.0, 0.6, 0.2, 0.2]);
        assert_eq!(events[3], vec![LifecycleEvent::Warning, LifecycleEvent::Disqualified]);
        assert_eq!(worker.lifecycle, Lifecycle::Disqualified);
        assert!((worker.cumulative_score().unwrap() - 0.5).abs() < 1e-12);
        let err = apply_submission(&worker, 1.0, &SystemConfig::default()).unwrap_err();
        assert!(matches!(err, WorkflowError::WorkerDisqualified(_)));
    }

    #[test]
    fn monitoring_off_emits_nothing() {
        let config = SystemConfig { monitoring: false, ..SystemConfig::default() };
        let worker = WorkerRecord::new("w1");
        let (worker, events) = apply_submission(&worker, 0.0, &config).unwrap();
        assert!(events.is_empty());
        assert_eq!(worker.lifecycle, Lifecycle::Active);
    }

    #[test]
    fn stats_track_series() {
        let (worker, _) = run(&[0.6, 0.8, 1.0]);
        let stats = worker.stats.unwrap();
        assert_eq!(stats, score_series_stats(&worker.score_series).unwrap());
    }
}
