//! Event-sourced workflow engine.
//!
//! Commands validate against the current state, emit events, and every event
//! is applied through [`EngineState::apply`]. Replaying a log therefore runs
//! exactly the transitions the live engine ran.

use super::assignment::{grade_assignment, select_payload, Assignment, AssignmentStatus, ItemAnswer};
use super::qualification::{
    grade_qualification, QualificationGrade, QualificationSession, TestQuestion, TrainingOutcome,
    TrainingQuestion, TrainingState, TEST_QUESTIONS, TRAINING_QUESTIONS,
};
use super::worker::{apply_submission, Lifecycle, LifecycleEvent, Qualification, WorkerRecord};
use super::WorkflowError;
use crate::events::{Clock, EventKind, EventLog, EventRecord};
use crate::model::{CategoryScheme, Item, LabelSet, SystemConfig, Vote};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolItem {
    pub item: Item,
    pub votes_collected: usize,
    pub reserved: usize,
    /// Items sharing a block are preferred together when assignments are
    /// drawn, which keeps fill levels aligned to whole assignments.
    pub block: usize,
}

impl PoolItem {
    pub fn fill(&self) -> usize {
        self.votes_collected + self.reserved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmissionOutcome {
    pub assignment_id: String,
    pub assignment_score: f64,
    pub cumulative_score: f64,
    pub warning: bool,
    pub disqualified: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EngineState {
    pub config: SystemConfig,
    /// Payload pool keyed by item id.
    pub items: BTreeMap<String, PoolItem>,
    /// Payload ids in ingestion order.
    pub item_order: Vec<String>,
    pub gold: BTreeMap<String, Item>,
    pub gold_order: Vec<String>,
    pub workers: BTreeMap<String, WorkerRecord>,
    pub sessions: BTreeMap<String, QualificationSession>,
    pub assignments: BTreeMap<String, Assignment>,
    /// Payload items each worker has voted on or currently holds.
    pub claims: BTreeMap<String, BTreeSet<String>>,
    pub votes: Vec<Vote>,
    pub n_blocks: usize,
}

fn corrupt(msg: impl Into<String>) -> WorkflowError {
    WorkflowError::Corrupt(msg.into())
}

impl EngineState {
    pub fn worker(&self, worker_id: &str) -> Result<&WorkerRecord, WorkflowError> {
        self.workers
            .get(worker_id)
            .ok_or_else(|| WorkflowError::UnknownWorker(worker_id.to_string()))
    }

    pub fn assignment(&self, assignment_id: &str) -> Result<&Assignment, WorkflowError> {
        self.assignments
            .get(assignment_id)
            .ok_or_else(|| WorkflowError::UnknownAssignment(assignment_id.to_string()))
    }

    pub fn session(&self, worker_id: &str) -> Result<&QualificationSession, WorkflowError> {
        self.sessions
            .get(worker_id)
            .ok_or_else(|| WorkflowError::UnknownWorker(worker_id.to_string()))
    }

    pub fn gold_labels(&self, item_id: &str) -> Option<LabelSet> {
        self.gold.get(item_id).and_then(|item| item.gold_labels)
    }

    /// Text of a payload or gold item.
    pub fn item_text(&self, item_id: &str) -> Option<&str> {
        self.items
            .get(item_id)
            .map(|p| p.item.text.as_str())
            .or_else(|| self.gold.get(item_id).map(|g| g.text.as_str()))
    }

    fn has_claim(&self, worker_id: &str, item_id: &str) -> bool {
        self.claims.get(worker_id).is_some_and(|set| set.contains(item_id))
    }

    fn training_question(&self, item_id: &str) -> Result<TrainingQuestion, WorkflowError> {
        let item = self.gold.get(item_id).ok_or_else(|| corrupt(format!("unknown gold item `{item_id}`")))?;
        let gold = item.gold_labels.ok_or_else(|| corrupt(format!("item `{item_id}` lacks gold labels")))?;
        let hint = item.hint.clone().unwrap_or_else(|| default_hint(gold));
        Ok(TrainingQuestion { item_id: item_id.to_string(), gold, hint, state: TrainingState::Unanswered })
    }

    /// Applies one event. The live engine and replay both go through here.
    pub fn apply(&mut self, seq: u64, event: &EventKind) -> Result<(), WorkflowError> {
        match event {
            EventKind::EngineConfigured { config } => {
                if seq != 1 {
                    return Err(corrupt(format!("configuration at seq {seq}")));
                }
                config.validate()?;
                self.config = config.clone();
            }
            EventKind::CorpusLoaded { items } => {
                let mut loaded = Vec::new();
                for item in items {
                    if self.items.contains_key(&item.item_id) || self.gold.contains_key(&item.item_id) {
                        return Err(WorkflowError::DuplicateItem(item.item_id.clone()));
                    }
                    if item.gold_labels.is_some() {
                        self.gold_order.push(item.item_id.clone());
                        self.gold.insert(item.item_id.clone(), item.clone());
                    } else {
                        self.item_order.push(item.item_id.clone());
                        self.items.insert(
                            item.item_id.clone(),
                            PoolItem { item: item.clone(), votes_collected: 0, reserved: 0, block: 0 },
                        );
                        loaded.push(item.item_id.as_str());
                    }
                }
                // blocks follow a hash order of the ids so that neighbours in
                // the input file are not always presented together
                loaded.sort_by_cached_key(|id| Sha256::digest(id.as_bytes()));
                let size = self.config.payload_size.max(1);
                for (i, id) in loaded.iter().enumerate() {
                    self.items.get_mut(*id).expect("just inserted").block = self.n_blocks + i / size;
                }
                self.n_blocks += loaded.len().div_ceil(size);
            }
            EventKind::WorkerRegistered { worker_id, training_item_ids, test_item_ids } => {
                if self.workers.contains_key(worker_id) {
                    return Err(corrupt(format!("worker `{worker_id}` registered twice")));
                }
                let training = training_item_ids
                    .iter()
                    .map(|id| self.training_question(id))
                    .collect::<Result<Vec<_>, _>>()?;
                let test = test_item_ids
                    .iter()
                    .map(|id| {
                        self.gold_labels(id)
                            .map(|gold| TestQuestion { item_id: id.clone(), gold })
                            .ok_or_else(|| corrupt(format!("unknown gold item `{id}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                self.sessions.insert(worker_id.clone(), QualificationSession::new(training, test));
                self.workers.insert(worker_id.clone(), WorkerRecord::new(worker_id.clone()));
            }
            EventKind::TrainingVerified { worker_id, question, correct } => {
                let session = self
                    .sessions
                    .get_mut(worker_id)
                    .ok_or_else(|| WorkflowError::UnknownWorker(worker_id.clone()))?;
                if session.next_training() != Some(*question) {
                    return Err(corrupt(format!("training question {question} out of order")));
                }
                session.record_training(*question, *correct);
            }
            EventKind::QualificationResult { worker_id, score, qualified } => {
                let worker = self
                    .workers
                    .get_mut(worker_id)
                    .ok_or_else(|| WorkflowError::UnknownWorker(worker_id.clone()))?;
                let status = if *qualified { Qualification::Qualified } else { Qualification::Failed };
                worker.qualification = status;
                if let Some(session) = self.sessions.get_mut(worker_id) {
                    let correct = (score * session.test.len() as f64).round() as usize;
                    session.grade = Some(QualificationGrade { score: *score, correct, status });
                }
            }
            EventKind::AssignmentIssued {
                assignment_id,
                worker_id,
                payload_item_ids,
                gold_item_ids,
                presentation_order,
            } => {
                if self.assignments.contains_key(assignment_id) {
                    return Err(corrupt(format!("assignment `{assignment_id}` issued twice")));
                }
                self.worker(worker_id)?;
                let k = self.config.target_votes;
                for id in payload_item_ids {
                    let pool = self.items.get_mut(id).ok_or_else(|| corrupt(format!("unknown item `{id}`")))?;
                    if pool.fill() >= k {
                        return Err(WorkflowError::VoteBudget(id.clone()));
                    }
                    pool.reserved += 1;
                    if !self.claims.entry(worker_id.clone()).or_default().insert(id.clone()) {
                        return Err(WorkflowError::DuplicateVote { worker: worker_id.clone(), item: id.clone() });
                    }
                }
                self.assignments.insert(
                    assignment_id.clone(),
                    Assignment {
                        assignment_id: assignment_id.clone(),
                        worker_id: worker_id.clone(),
                        payload_item_ids: payload_item_ids.clone(),
                        gold_item_ids: gold_item_ids.clone(),
                        presentation_order: presentation_order.clone(),
                        status: AssignmentStatus::Issued,
                        score: None,
                        issued_seq: seq,
                        graded_seq: None,
                    },
                );
            }
            EventKind::AssignmentCancelled { assignment_id } => {
                let assignment = self
                    .assignments
                    .get_mut(assignment_id)
                    .ok_or_else(|| WorkflowError::UnknownAssignment(assignment_id.clone()))?;
                if assignment.status != AssignmentStatus::Issued {
                    return Err(corrupt(format!("cancelling `{assignment_id}` in state {:?}", assignment.status)));
                }
                assignment.status = AssignmentStatus::Cancelled;
                for id in &assignment.payload_item_ids {
                    if let Some(pool) = self.items.get_mut(id) {
                        pool.reserved = pool.reserved.saturating_sub(1);
                    }
                    if let Some(set) = self.claims.get_mut(&assignment.worker_id) {
                        set.remove(id);
                    }
                }
            }
            EventKind::VoteRecorded { worker_id, item_id, assignment_id, labels, gold } => {
                let assignment = self
                    .assignments
                    .get_mut(assignment_id)
                    .ok_or_else(|| WorkflowError::UnknownAssignment(assignment_id.clone()))?;
                if !matches!(assignment.status, AssignmentStatus::Issued | AssignmentStatus::Submitted) {
                    return Err(corrupt(format!("vote on closed assignment `{assignment_id}`")));
                }
                assignment.status = AssignmentStatus::Submitted;
                if !*gold {
                    let pool = self.items.get_mut(item_id).ok_or_else(|| corrupt(format!("unknown item `{item_id}`")))?;
                    if pool.reserved == 0 || pool.votes_collected >= self.config.target_votes {
                        return Err(WorkflowError::VoteBudget(item_id.clone()));
                    }
                    pool.reserved -= 1;
                    pool.votes_collected += 1;
                }
                self.votes.push(Vote {
                    worker_id: worker_id.clone(),
                    item_id: item_id.clone(),
                    labels: *labels,
                    assignment_id: assignment_id.clone(),
                    timestamp: seq,
                    gold: *gold,
                });
            }
            EventKind::SubmissionGraded { assignment_id, worker_id, score, .. } => {
                let assignment = self
                    .assignments
                    .get_mut(assignment_id)
                    .ok_or_else(|| WorkflowError::UnknownAssignment(assignment_id.clone()))?;
                assignment.status = AssignmentStatus::Graded;
                assignment.score = Some(*score);
                assignment.graded_seq = Some(seq);
                self.workers
                    .get_mut(worker_id)
                    .ok_or_else(|| WorkflowError::UnknownWorker(worker_id.clone()))?
                    .push_score(*score)?;
            }
            EventKind::Warning { worker_id, .. } => {
                self.workers
                    .get_mut(worker_id)
                    .ok_or_else(|| WorkflowError::UnknownWorker(worker_id.clone()))?
                    .escalate(Lifecycle::Warned);
            }
            EventKind::Disqualified { worker_id, .. } => {
                self.workers
                    .get_mut(worker_id)
                    .ok_or_else(|| WorkflowError::UnknownWorker(worker_id.clone()))?
                    .escalate(Lifecycle::Disqualified);
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the state.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn default_hint(gold: LabelSet) -> String {
    let mut categories: Vec<&str> = gold
        .iter()
        .filter_map(|label| CategoryScheme::Valence.category(label))
        .collect();
    categories.dedup();
    if categories.is_empty() {
        "This tweet expresses no emotion.".to_string()
    } else {
        format!("Look for {} emotions.", categories.join(" and "))
    }
}

/// The workflow engine: state plus the log that produced it.
///
/// All mutation goes through `&mut self`; callers sharing an engine across
/// threads wrap it in a mutex so there is one writer at a time.
#[derive(Debug)]
pub struct Engine {
    state: EngineState,
    log: EventLog,
}

impl Engine {
    /// Starts a fresh engine on an empty log.
    pub fn new(config: SystemConfig, log: EventLog) -> Result<Self, WorkflowError> {
        if !log.records().is_empty() {
            return Err(corrupt("new engine needs an empty log"));
        }
        config.validate()?;
        let mut engine = Engine { state: EngineState::default(), log };
        engine.emit(EventKind::EngineConfigured { config })?;
        Ok(engine)
    }

    /// Rebuilds the engine by applying every record already held by `log`.
    pub fn from_log(log: EventLog) -> Result<Self, WorkflowError> {
        let mut state = EngineState::default();
        for (i, record) in log.records().iter().enumerate() {
            if record.seq != i as u64 + 1 {
                return Err(WorkflowError::Log(crate::events::LogError::SeqGap(i as u64 + 1)));
            }
            state.apply(record.seq, &record.event)?;
        }
        Ok(Engine { state, log })
    }

    pub fn replay(records: Vec<EventRecord>) -> Result<Self, WorkflowError> {
        Self::from_log(EventLog::from_records(records, Clock::System))
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn config(&self) -> &SystemConfig {
        &self.state.config
    }

    pub fn records(&self) -> &[EventRecord] {
        self.log.records()
    }

    fn emit(&mut self, event: EventKind) -> Result<(), WorkflowError> {
        self.state.apply(self.log.next_seq(), &event)?;
        self.log.append(event)?;
        Ok(())
    }

    pub fn load_corpus(&mut self, items: Vec<Item>) -> Result<(), WorkflowError> {
        let mut seen = BTreeSet::new();
        for item in &items {
            if !seen.insert(item.item_id.as_str())
                || self.state.items.contains_key(&item.item_id)
                || self.state.gold.contains_key(&item.item_id)
            {
                return Err(WorkflowError::DuplicateItem(item.item_id.clone()));
            }
        }
        self.emit(EventKind::CorpusLoaded { items })
    }

    /// Registers a candidate and draws its 5 training and 15 test questions
    /// from the gold pool.
    pub fn register_worker<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<String, WorkflowError> {
        let needed = TRAINING_QUESTIONS + TEST_QUESTIONS;
        let available = self.state.gold_order.len();
        if available < needed {
            return Err(WorkflowError::GoldPoolTooSmall { needed, available });
        }
        let picks = index::sample(rng, available, needed).into_vec();
        let ids: Vec<String> = picks.iter().map(|&i| self.state.gold_order[i].clone()).collect();
        let worker_id = format!("w{:05}", self.state.workers.len() + 1);
        self.emit(EventKind::WorkerRegistered {
            worker_id: worker_id.clone(),
            training_item_ids: ids[..TRAINING_QUESTIONS].to_vec(),
            test_item_ids: ids[TRAINING_QUESTIONS..].to_vec(),
        })?;
        Ok(worker_id)
    }

    fn open_session(&self, worker_id: &str) -> Result<&QualificationSession, WorkflowError> {
        let worker = self.state.worker(worker_id)?;
        if worker.qualification != Qualification::Candidate {
            return Err(WorkflowError::QualificationClosed(worker_id.to_string()));
        }
        self.state.session(worker_id)
    }

    pub fn verify_training(
        &mut self,
        worker_id: &str,
        question: usize,
        answer: LabelSet,
    ) -> Result<TrainingOutcome, WorkflowError> {
        let correct = self.open_session(worker_id)?.check_training_answer(question, answer, &self.state.config)?;
        self.emit(EventKind::TrainingVerified { worker_id: worker_id.to_string(), question, correct })?;
        let session = self.state.session(worker_id)?;
        Ok(if correct {
            TrainingOutcome::Correct { next: session.next_training() }
        } else {
            TrainingOutcome::IncorrectWithHint { hint: session.training[question].hint.clone() }
        })
    }

    pub fn submit_qualification(
        &mut self,
        worker_id: &str,
        answers: &[LabelSet],
    ) -> Result<QualificationGrade, WorkflowError> {
        let session = self.open_session(worker_id)?;
        if !session.training_complete() {
            return Err(WorkflowError::TrainingIncomplete);
        }
        let grade = grade_qualification(answers, &session.test_gold(), &self.state.config)?;
        self.emit(EventKind::QualificationResult {
            worker_id: worker_id.to_string(),
            score: grade.score,
            qualified: grade.status == Qualification::Qualified,
        })?;
        Ok(grade)
    }

    /// Issues an assignment of payload items plus embedded gold items in a
    /// random presentation order, reserving one vote slot per payload item.
    pub fn issue_assignment<R: Rng + ?Sized>(
        &mut self,
        worker_id: &str,
        rng: &mut R,
    ) -> Result<Assignment, WorkflowError> {
        if !self.state.worker(worker_id)?.can_work() {
            return Err(WorkflowError::WorkerIneligible(worker_id.to_string()));
        }
        let config = &self.state.config;
        if self.state.gold_order.len() < config.gold_per_assignment {
            return Err(WorkflowError::GoldPoolTooSmall {
                needed: config.gold_per_assignment,
                available: self.state.gold_order.len(),
            });
        }
        let candidates: Vec<(&str, usize, usize)> = self
            .state
            .item_order
            .iter()
            .map(|id| &self.state.items[id])
            .filter(|p| p.fill() < config.target_votes && !self.state.has_claim(worker_id, &p.item.item_id))
            .map(|p| (p.item.item_id.as_str(), p.fill(), p.block))
            .collect();
        let payload = select_payload(&candidates, config.payload_size, rng).ok_or(WorkflowError::PoolExhausted)?;
        let gold: Vec<String> = index::sample(rng, self.state.gold_order.len(), config.gold_per_assignment)
            .into_iter()
            .map(|i| self.state.gold_order[i].clone())
            .collect();
        let mut order: Vec<usize> = (0..payload.len() + gold.len()).collect();
        order.shuffle(rng);

        let assignment_id = format!("a{:06}", self.state.assignments.len() + 1);
        self.emit(EventKind::AssignmentIssued {
            assignment_id: assignment_id.clone(),
            worker_id: worker_id.to_string(),
            payload_item_ids: payload,
            gold_item_ids: gold,
            presentation_order: order,
        })?;
        Ok(self.state.assignments[&assignment_id].clone())
    }

    /// Releases the reservations of an issued, unsubmitted assignment.
    pub fn cancel_assignment(&mut self, assignment_id: &str) -> Result<(), WorkflowError> {
        let assignment = self.state.assignment(assignment_id)?;
        match assignment.status {
            AssignmentStatus::Issued => {}
            AssignmentStatus::Cancelled => return Err(WorkflowError::Cancelled(assignment_id.to_string())),
            _ => return Err(WorkflowError::AlreadyGraded(assignment_id.to_string())),
        }
        self.emit(EventKind::AssignmentCancelled { assignment_id: assignment_id.to_string() })
    }

    /// Grades a submission, records its votes and applies the worker feedback.
    pub fn submit_assignment(
        &mut self,
        assignment_id: &str,
        answers: &[ItemAnswer],
    ) -> Result<SubmissionOutcome, WorkflowError> {
        let state = &self.state;
        let assignment = state.assignment(assignment_id)?;
        let worker = state.worker(&assignment.worker_id)?;
        if worker.lifecycle == Lifecycle::Disqualified {
            return Err(WorkflowError::WorkerDisqualified(worker.worker_id.clone()));
        }
        let grade = grade_assignment(assignment, answers, |id| state.gold_labels(id), &state.config)?;
        let (updated, feedback) = apply_submission(worker, grade.score, &state.config)?;
        for id in &assignment.payload_item_ids {
            let pool = &state.items[id];
            if pool.reserved == 0 || pool.votes_collected >= state.config.target_votes {
                return Err(WorkflowError::VoteBudget(id.clone()));
            }
        }

        let by_item: BTreeMap<&str, LabelSet> = answers.iter().map(|a| (a.item_id.as_str(), a.labels)).collect();
        let worker_id = worker.worker_id.clone();
        let mut events: Vec<EventKind> = assignment
            .presented_item_ids()
            .into_iter()
            .map(|id| EventKind::VoteRecorded {
                worker_id: worker_id.clone(),
                item_id: id.to_string(),
                assignment_id: assignment_id.to_string(),
                labels: by_item[id],
                gold: assignment.is_gold(id),
            })
            .collect();
        let cumulative_score = updated.cumulative_score().expect("score just pushed");
        events.push(EventKind::SubmissionGraded {
            assignment_id: assignment_id.to_string(),
            worker_id: worker_id.clone(),
            score: grade.score,
            correct_gold: grade.correct_gold,
            cumulative_score,
        });
        let warning = feedback.contains(&LifecycleEvent::Warning);
        let disqualified = feedback.contains(&LifecycleEvent::Disqualified);
        if warning {
            events.push(EventKind::Warning {
                worker_id: worker_id.clone(),
                assignment_id: assignment_id.to_string(),
                assignment_score: grade.score,
            });
        }
        if disqualified {
            events.push(EventKind::Disqualified { worker_id: worker_id.clone(), cumulative_score });
            events.extend(
                state
                    .assignments
                    .values()
                    .filter(|a| {
                        a.worker_id == worker_id && a.status == AssignmentStatus::Issued && a.assignment_id != assignment_id
                    })
                    .map(|a| EventKind::AssignmentCancelled { assignment_id: a.assignment_id.clone() }),
            );
        }
        for event in events {
            self.emit(event)?;
        }
        Ok(SubmissionOutcome {
            assignment_id: assignment_id.to_string(),
            assignment_score: grade.score,
            cumulative_score,
            warning,
            disqualified,
        })
    }
}
