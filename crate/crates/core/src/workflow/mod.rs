//! Qualification, assignment generation with embedded gold questions,
//! grading and the warning/disqualification state machine.

mod assignment;
mod audit;
mod engine;
mod qualification;
mod worker;

pub use audit::{audit_log, AuditReport};
pub use assignment::{grade_assignment, select_payload, Assignment, AssignmentGrade, AssignmentStatus, ItemAnswer};
pub use engine::{Engine, EngineState, PoolItem, SubmissionOutcome};
pub use qualification::{
    grade_qualification, QualificationGrade, QualificationSession, TestQuestion, TrainingOutcome,
    TrainingQuestion, TrainingState, TEST_QUESTIONS, TRAINING_QUESTIONS,
};
pub use worker::{apply_submission, Lifecycle, LifecycleEvent, Qualification, WorkerRecord};

use crate::events::LogError;
use crate::model::ModelError;
use crate::stats::StatsError;

/// Slack used when comparing quantized scores against thresholds.
pub(crate) const SCORE_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error("unknown worker `{0}`")]
    UnknownWorker(String),
    #[error("unknown assignment `{0}`")]
    UnknownAssignment(String),
    #[error("duplicate item id `{0}`")]
    DuplicateItem(String),
    #[error("locked question {question}: answer question {next} first")]
    LockedQuestion { question: usize, next: usize },
    #[error("question {0} does not exist")]
    NoSuchQuestion(usize),
    #[error("training session not completed")]
    TrainingIncomplete,
    #[error("qualification already graded for worker `{0}`")]
    QualificationClosed(String),
    #[error("expected {expected} answers, got {got}")]
    AnswerCount { expected: usize, got: usize },
    #[error("pool exhausted")]
    PoolExhausted,
    #[error("worker ineligible: `{0}`")]
    WorkerIneligible(String),
    #[error("worker `{0}` is disqualified")]
    WorkerDisqualified(String),
    #[error("gold pool too small: need {needed}, have {available}")]
    GoldPoolTooSmall { needed: usize, available: usize },
    #[error("missing answer for item `{0}`")]
    MissingAnswer(String),
    #[error("duplicate answer for item `{0}`")]
    DuplicateAnswer(String),
    #[error("item `{0}` is not part of the assignment")]
    UnexpectedAnswer(String),
    #[error("assignment `{0}` was already graded")]
    AlreadyGraded(String),
    #[error("assignment `{0}` was cancelled")]
    Cancelled(String),
    #[error("vote budget exceeded on item `{0}`")]
    VoteBudget(String),
    #[error("worker `{worker}` already voted on item `{item}`")]
    DuplicateVote { worker: String, item: String },
    #[error("inconsistent event log: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Log(#[from] LogError),
}
