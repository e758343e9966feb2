//! Post-hoc invariant audit over a raw event log, independent of
//! [`EngineState`](super::EngineState).

use crate::events::{EventKind, EventRecord};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub violations: Vec<String>,
    /// Payload votes per item at the end of the log.
    pub votes_per_item: BTreeMap<String, usize>,
    pub graded_assignments: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the vote budget, vote uniqueness, score quantization and
/// lifecycle monotonicity over `records`.
pub fn audit_log(records: &[EventRecord]) -> AuditReport {
    let mut report = AuditReport::default();
    let mut k = usize::MAX;
    let mut gold_per_assignment = 1usize;
    let mut reservations: BTreeMap<String, usize> = BTreeMap::new();
    let mut open: BTreeMap<String, (String, Vec<String>)> = BTreeMap::new();
    let mut voted: BTreeSet<(String, String)> = BTreeSet::new();
    let mut disqualified: BTreeSet<String> = BTreeSet::new();

    for (i, record) in records.iter().enumerate() {
        if record.seq != i as u64 + 1 {
            report.violations.push(format!("seq {} at position {}", record.seq, i + 1));
        }
        let seq = record.seq;
        match &record.event {
            EventKind::EngineConfigured { config } => {
                k = config.target_votes;
                gold_per_assignment = config.gold_per_assignment;
            }
            EventKind::AssignmentIssued { assignment_id, worker_id, payload_item_ids, .. } => {
                if disqualified.contains(worker_id) {
                    report.violations.push(format!("seq {seq}: assignment issued to disqualified {worker_id}"));
                }
                for id in payload_item_ids {
                    let reserved = reservations.entry(id.clone()).or_default();
                    *reserved += 1;
                    let votes = report.votes_per_item.get(id).copied().unwrap_or(0);
                    if votes + *reserved > k {
                        report.violations.push(format!("seq {seq}: item {id} over budget"));
                    }
                }
                open.insert(assignment_id.clone(), (worker_id.clone(), payload_item_ids.clone()));
            }
            EventKind::AssignmentCancelled { assignment_id } => {
                if let Some((_, items)) = open.remove(assignment_id) {
                    for id in items {
                        *reservations.entry(id).or_default() -= 1;
                    }
                }
            }
            EventKind::VoteRecorded { worker_id, item_id, gold: false, .. } => {
                if !voted.insert((worker_id.clone(), item_id.clone())) {
                    report.violations.push(format!("seq {seq}: duplicate vote by {worker_id} on {item_id}"));
                }
                let reserved = reservations.entry(item_id.clone()).or_default();
                *reserved = reserved.saturating_sub(1);
                let votes = report.votes_per_item.entry(item_id.clone()).or_default();
                *votes += 1;
                if *votes > k {
                    report.violations.push(format!("seq {seq}: item {item_id} has {votes} votes"));
                }
            }
            EventKind::SubmissionGraded { assignment_id, worker_id, score, .. } => {
                open.remove(assignment_id);
                report.graded_assignments += 1;
                let scaled = score * gold_per_assignment as f64;
                if (scaled - scaled.round()).abs() > 1e-9 {
                    report.violations.push(format!("seq {seq}: score {score} not quantized"));
                }
                if disqualified.contains(worker_id) {
                    report.violations.push(format!("seq {seq}: graded work of disqualified {worker_id}"));
                }
            }
            EventKind::Disqualified { worker_id, .. } => {
                disqualified.insert(worker_id.clone());
            }
            EventKind::Warning { worker_id, .. } if disqualified.contains(worker_id) => {
                report.violations.push(format!("seq {seq}: warning after disqualification of {worker_id}"));
            }
            _ => {}
        }
    }
    report
}
