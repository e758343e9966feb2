use super::corpus::CorpusSpec;
use super::profile::{sample_answer, step_effort, ConfusionBias, SimWorkerProfile};
use super::SimulationError;
use crate::aggregation::{aggregate_state, CorpusAggregate, WeightScheme, WeightSchemeConfig};
use crate::events::{Clock, EventKind, EventLog};
use crate::model::{LabelSet, SystemConfig};
use crate::workflow::{Engine, ItemAnswer, TrainingOutcome, WorkflowError, TRAINING_QUESTIONS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How a worker picks wrong answers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    /// Uniform over the other 11 codes.
    #[default]
    Uniform,
    /// Uniform over the other labels that occur in the corpus.
    Support,
}

/// A group of identical simulated workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    pub count: usize,
    pub p: f64,
    pub delta: f64,
    pub r: f64,
    pub q: f64,
    pub effort: f64,
    pub bias: BiasKind,
}

impl Archetype {
    pub fn new(name: impl Into<String>, count: usize, p: f64) -> Self {
        Archetype { name: name.into(), count, p, delta: 0.0, r: 0.0, q: 0.0, effort: 1.0, bias: BiasKind::Uniform }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub corpus: CorpusSpec,
    pub population: Vec<Archetype>,
    pub scheme: WeightScheme,
    pub seed: u64,
    /// Stop after this many graded assignments; `None` runs until the pool
    /// is exhausted.
    pub max_assignments: Option<usize>,
    /// A candidate gives up after this many wrong tries on one training
    /// question.
    pub max_training_attempts: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            corpus: CorpusSpec::default(),
            population: vec![Archetype::new("honest", 10, 0.9)],
            scheme: WeightScheme::Equal,
            seed: 0,
            max_assignments: None,
            max_training_attempts: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        self.system.validate().map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
        self.corpus.validate(&self.system)?;
        if self.population.iter().map(|a| a.count).sum::<usize>() == 0 {
            return Err(SimulationError::InvalidConfig("population is empty".into()));
        }
        for archetype in &self.population {
            self.profile(archetype, 0).validate()?;
        }
        if self.max_training_attempts == 0 {
            return Err(SimulationError::InvalidConfig("max_training_attempts must be positive".into()));
        }
        Ok(())
    }

    fn profile(&self, archetype: &Archetype, seed: u64) -> SimWorkerProfile {
        let confusion_bias = match archetype.bias {
            BiasKind::Uniform => None,
            BiasKind::Support => Some(ConfusionBias::within(&self.corpus.support())),
        };
        SimWorkerProfile {
            base_accuracy: archetype.p,
            confusion_bias,
            effort: archetype.effort,
            fatigue_decay: archetype.delta,
            feedback_recovery: archetype.r,
            corner_cut: archetype.q,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub scheme: WeightScheme,
    pub monitoring: bool,
    pub n_candidates: usize,
    pub n_abandoned: usize,
    pub n_failed: usize,
    pub n_qualified: usize,
    pub n_warnings: usize,
    pub n_disqualified: usize,
    pub n_assignments: usize,
    pub n_payload_votes: usize,
    pub items_complete: usize,
    pub unfilled_slots: usize,
    pub corpus_accuracy: f64,
    pub n_events: usize,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub engine: Engine,
    pub truth: BTreeMap<String, LabelSet>,
    pub aggregate: CorpusAggregate,
    pub summary: ExperimentSummary,
}

struct SimWorker {
    profile: SimWorkerProfile,
    rng: ChaCha8Rng,
    engine_id: Option<String>,
    working: bool,
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

const ENGINE_STREAM: u64 = 1;
const CORPUS_STREAM: u64 = 2;
const WORKER_STREAM_BASE: u64 = 1 << 32;

/// Answers the qualification on behalf of `worker`. Returns `false` if the
/// candidate abandoned training.
fn qualify(engine: &mut Engine, worker: &mut SimWorker, max_attempts: usize) -> Result<bool, WorkflowError> {
    let id = worker.engine_id.clone().expect("registered");
    for question in 0..TRAINING_QUESTIONS {
        let gold = engine.state().session(&id)?.training[question].gold;
        let mut attempts = 0;
        loop {
            let answer = sample_answer(&worker.profile, gold, &mut worker.rng);
            match engine.verify_training(&id, question, answer)? {
                TrainingOutcome::Correct { .. } => break,
                TrainingOutcome::IncorrectWithHint { .. } => {
                    attempts += 1;
                    if attempts >= max_attempts {
                        return Ok(false);
                    }
                }
            }
        }
    }
    let gold = engine.state().session(&id)?.test_gold();
    let answers: Vec<LabelSet> = gold.iter().map(|g| sample_answer(&worker.profile, *g, &mut worker.rng)).collect();
    let grade = engine.submit_qualification(&id, &answers)?;
    Ok(grade.status == crate::workflow::Qualification::Qualified)
}

/// Runs the full loop: every candidate registers and takes the
/// qualification, then qualified workers take assignments round-robin until
/// the pool is exhausted or `max_assignments` is reached.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, SimulationError> {
    config.validate()?;
    let mut engine_rng = stream(config.seed, ENGINE_STREAM);
    let corpus = config.corpus.generate(&mut stream(config.seed, CORPUS_STREAM))?;
    let mut engine = Engine::new(config.system.clone(), EventLog::new(Clock::simulated()))?;
    engine.load_corpus(corpus.items())?;

    let mut workers: Vec<SimWorker> = Vec::new();
    for archetype in &config.population {
        for _ in 0..archetype.count {
            let index = workers.len() as u64;
            let seed = WORKER_STREAM_BASE + index;
            workers.push(SimWorker {
                profile: config.profile(archetype, seed),
                rng: stream(config.seed, seed),
                engine_id: None,
                working: false,
            });
        }
    }

    let mut n_abandoned = 0;
    for worker in &mut workers {
        worker.engine_id = Some(engine.register_worker(&mut engine_rng)?);
        match qualify(&mut engine, worker, config.max_training_attempts)? {
            true => worker.working = true,
            false => {
                if engine.state().worker(worker.engine_id.as_deref().unwrap())?.qualification
                    == crate::workflow::Qualification::Candidate
                {
                    n_abandoned += 1;
                }
            }
        }
    }

    let mut n_assignments = 0;
    let mut capped = false;
    'rounds: loop {
        let mut progressed = false;
        for worker in workers.iter_mut().filter(|w| w.working) {
            if config.max_assignments.is_some_and(|max| n_assignments >= max) {
                capped = true;
                break 'rounds;
            }
            let id = worker.engine_id.clone().expect("registered");
            let assignment = match engine.issue_assignment(&id, &mut engine_rng) {
                Ok(a) => a,
                Err(WorkflowError::PoolExhausted) | Err(WorkflowError::WorkerIneligible(_)) => {
                    worker.working = false;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let answers: Vec<ItemAnswer> = assignment
                .presented_item_ids()
                .into_iter()
                .map(|item_id| {
                    let gold = match engine.state().gold_labels(item_id) {
                        Some(g) => g,
                        None => corpus.truth[item_id],
                    };
                    ItemAnswer { item_id: item_id.to_string(), labels: sample_answer(&worker.profile, gold, &mut worker.rng) }
                })
                .collect();
            let outcome = engine.submit_assignment(&assignment.assignment_id, &answers)?;
            n_assignments += 1;
            progressed = true;
            worker.profile.effort = step_effort(&worker.profile, outcome.warning);
            if outcome.disqualified {
                worker.working = false;
            }
        }
        if !progressed {
            break;
        }
    }

    let scheme = WeightSchemeConfig::from_system(config.scheme, &config.system);
    let aggregate = aggregate_state(engine.state(), &scheme);
    let summary = summarize(config, &engine, &corpus.truth, &aggregate, n_abandoned, n_assignments);
    let unfilled = summary.unfilled_slots;
    let outcome = ExperimentOutcome { engine, truth: corpus.truth, aggregate, summary };
    if !capped && unfilled >= config.system.payload_size {
        return Err(SimulationError::Infeasible { unfilled_slots: unfilled, partial: Box::new(outcome) });
    }
    Ok(outcome)
}

fn summarize(
    config: &ExperimentConfig,
    engine: &Engine,
    truth: &BTreeMap<String, LabelSet>,
    aggregate: &CorpusAggregate,
    n_abandoned: usize,
    n_assignments: usize,
) -> ExperimentSummary {
    let state = engine.state();
    let mut n_failed = 0;
    let mut n_qualified = 0;
    let mut n_warnings = 0;
    let mut n_disqualified = 0;
    for record in engine.records() {
        match &record.event {
            EventKind::QualificationResult { qualified: true, .. } => n_qualified += 1,
            EventKind::QualificationResult { qualified: false, .. } => n_failed += 1,
            EventKind::Warning { .. } => n_warnings += 1,
            EventKind::Disqualified { .. } => n_disqualified += 1,
            _ => {}
        }
    }
    let k = config.system.target_votes;
    let items_complete = state.items.values().filter(|p| p.votes_collected == k).count();
    let unfilled_slots = state.items.values().map(|p| k - p.votes_collected.min(k)).sum();
    // items without any aggregate count as wrong
    let correct = truth
        .iter()
        .filter(|(id, gold)| aggregate.labels.get(*id).is_some_and(|a| gold.contains(a.primary)))
        .count();
    ExperimentSummary {
        seed: config.seed,
        scheme: config.scheme,
        monitoring: config.system.monitoring,
        n_candidates: state.workers.len(),
        n_abandoned,
        n_failed,
        n_qualified,
        n_warnings,
        n_disqualified,
        n_assignments,
        n_payload_votes: state.votes.iter().filter(|v| !v.gold).count(),
        items_complete,
        unfilled_slots,
        corpus_accuracy: if truth.is_empty() { 0.0 } else { correct as f64 / truth.len() as f64 },
        n_events: engine.records().len(),
    }
}
