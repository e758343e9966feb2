use super::WorkflowError;
use crate::model::{LabelSet, SystemConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStatus {
    Issued,
    Submitted,
    Graded,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub assignment_id: String,
    pub worker_id: String,
    pub payload_item_ids: Vec<String>,
    pub gold_item_ids: Vec<String>,
    /// Position `i` shows entry `presentation_order[i]` of payload ++ gold.
    pub presentation_order: Vec<usize>,
    pub status: AssignmentStatus,
    pub score: Option<f64>,
    pub issued_seq: u64,
    pub graded_seq: Option<u64>,
}

impl Assignment {
    /// Item ids in the order the worker sees them.
    pub fn presented_item_ids(&self) -> Vec<&str> {
        let payload = self.payload_item_ids.len();
        self.presentation_order
            .iter()
            .map(|&i| {
                if i < payload {
                    self.payload_item_ids[i].as_str()
                } else {
                    self.gold_item_ids[i - payload].as_str()
                }
            })
            .collect()
    }

    pub fn is_gold(&self, item_id: &str) -> bool {
        self.gold_item_ids.iter().any(|g| g == item_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemAnswer {
    pub item_id: String,
    pub labels: LabelSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentGrade {
    pub score: f64,
    pub correct_gold: usize,
}

/// Picks `n` payload items, least-filled first. Within a fill level whole
/// blocks are taken in a random block order. `candidates` holds
/// `(item_id, votes_collected + reserved, block)`.
pub fn select_payload<R: Rng + ?Sized>(
    candidates: &[(&str, usize, usize)],
    n: usize,
    rng: &mut R,
) -> Option<Vec<String>> {
    if candidates.len() < n {
        return None;
    }
    let mut blocks: Vec<usize> = candidates.iter().map(|c| c.2).collect::<BTreeSet<_>>().into_iter().collect();
    blocks.shuffle(rng);
    let rank: BTreeMap<usize, usize> = blocks.into_iter().enumerate().map(|(r, b)| (b, r)).collect();
    let mut ordered: Vec<(usize, usize, usize)> =
        candidates.iter().enumerate().map(|(i, c)| (c.1, rank[&c.2], i)).collect();
    ordered.sort_unstable();
    Some(ordered[..n].iter().map(|&(_, _, i)| candidates[i].0.to_string()).collect())
}

/// Checks that `answers` covers every item exactly once and scores the gold
/// positions.
pub fn grade_assignment(
    assignment: &Assignment,
    answers: &[ItemAnswer],
    gold_of: impl Fn(&str) -> Option<LabelSet>,
    config: &SystemConfig,
) -> Result<AssignmentGrade, WorkflowError> {
    match assignment.status {
        AssignmentStatus::Issued => {}
        AssignmentStatus::Cancelled => return Err(WorkflowError::Cancelled(assignment.assignment_id.clone())),
        AssignmentStatus::Submitted | AssignmentStatus::Graded => {
            return Err(WorkflowError::AlreadyGraded(assignment.assignment_id.clone()))
        }
    }
    let expected: BTreeSet<&str> = assignment.presented_item_ids().into_iter().collect();
    let mut seen = BTreeSet::new();
    for answer in answers {
        if !expected.contains(answer.item_id.as_str()) {
            return Err(WorkflowError::UnexpectedAnswer(answer.item_id.clone()));
        }
        if !seen.insert(answer.item_id.as_str()) {
            return Err(WorkflowError::DuplicateAnswer(answer.item_id.clone()));
        }
    }
    if let Some(missing) = expected.iter().find(|id| !seen.contains(*id)) {
        return Err(WorkflowError::MissingAnswer(missing.to_string()));
    }

    let mut correct = 0;
    for answer in answers.iter().filter(|a| assignment.is_gold(&a.item_id)) {
        let gold = gold_of(&answer.item_id).ok_or_else(|| {
            WorkflowError::Corrupt(format!("gold item `{}` has no gold labels", answer.item_id))
        })?;
        if config.gold_rule.is_correct(answer.labels, gold) {
            correct += 1;
        }
    }
    Ok(AssignmentGrade {
        score: correct as f64 / assignment.gold_item_ids.len() as f64,
        correct_gold: correct,
    })
}
