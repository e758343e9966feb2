//! Statistical worker population and experiment runner that drive the full
//! annotation loop: qualification, assignments, grading and feedback.

mod corpus;
mod experiment;
mod profile;

pub use corpus::{CorpusSpec, SimCorpus};
pub use experiment::{run_experiment, Archetype, BiasKind, ExperimentConfig, ExperimentOutcome, ExperimentSummary};
pub use profile::{sample_answer, step_effort, ConfusionBias, SimWorkerProfile};

use crate::workflow::WorkflowError;

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("infeasible: {unfilled_slots} vote slots left unfilled with no eligible worker")]
    Infeasible {
        unfilled_slots: usize,
        partial: Box<ExperimentOutcome>,
    },
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
}
