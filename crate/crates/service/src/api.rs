//! JSON-over-HTTP worker lifecycle for machine clients.
//!
//! All mutations go through one mutex-guarded engine, so the log has a single
//! writer. Read-only analytics clone the state under the lock and compute
//! outside it.

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crowdgate_core::aggregation::{aggregate_state, WeightScheme, WeightSchemeConfig};
use crowdgate_core::analytics::{consistency_curve, AnnotationSnapshot, ConsistencyCurve};
use crowdgate_core::events::EventRecord;
use crowdgate_core::export::DEFAULT_ETA_GRID;
use crowdgate_core::workflow::{Engine, EngineState, ItemAnswer, TrainingOutcome, WorkflowError};
use crowdgate_core::LabelSet;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::sync::{Arc, Mutex, MutexGuard};

struct Inner {
    engine: Engine,
    rng: ChaCha8Rng,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Mutex<Inner>>,
}

impl AppState {
    pub fn new(engine: Engine, rng: ChaCha8Rng) -> Self {
        AppState { inner: Arc::new(Mutex::new(Inner { engine, rng })) }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // a panicking handler cannot leave the engine half-updated: every
        // event is applied before it is logged, one at a time
        self.inner.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Copy of the current state, taken under the writer lock.
    pub fn snapshot(&self) -> EngineState {
        self.lock().engine.state().clone()
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.lock().engine.records().to_vec()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    reason: String,
}

impl ApiError {
    fn new(status: StatusCode, reason: impl Into<String>) -> Self {
        ApiError { status, reason: reason.into() }
    }

    fn bad_request(reason: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, reason)
    }
}

impl From<WorkflowError> for ApiError {
    fn from(e: WorkflowError) -> Self {
        use WorkflowError::*;
        let status = match &e {
            UnknownWorker(_) | UnknownAssignment(_) | NoSuchQuestion(_) => StatusCode::NOT_FOUND,
            WorkerDisqualified(_) | WorkerIneligible(_) => StatusCode::FORBIDDEN,
            PoolExhausted | VoteBudget(_) | DuplicateVote { .. } | AlreadyGraded(_) | Cancelled(_)
            | LockedQuestion { .. } | TrainingIncomplete | QualificationClosed(_) | GoldPoolTooSmall { .. } => {
                StatusCode::CONFLICT
            }
            AnswerCount { .. } | MissingAnswer(_) | DuplicateAnswer(_) | UnexpectedAnswer(_) | Model(_) => {
                StatusCode::BAD_REQUEST
            }
            DuplicateItem(_) | Corrupt(_) | Stats(_) | Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let error = self.status.canonical_reason().unwrap_or("error").to_lowercase();
        (self.status, Json(json!({ "error": error, "reason": self.reason }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn labels(codes: &[String]) -> Result<LabelSet, ApiError> {
    let labels = codes
        .iter()
        .map(|c| c.parse().map_err(|e: crowdgate_core::model::ModelError| ApiError::bad_request(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    LabelSet::new(labels).map_err(|e| ApiError::bad_request(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PresentedItem {
    pub position: usize,
    pub item_id: String,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegisteredWorker {
    pub worker_id: String,
    pub training: Vec<PresentedItem>,
    pub test: Vec<PresentedItem>,
}

fn present(state: &EngineState, ids: impl IntoIterator<Item = String>) -> Vec<PresentedItem> {
    ids.into_iter()
        .enumerate()
        .map(|(position, item_id)| PresentedItem {
            position,
            text: state.item_text(&item_id).unwrap_or_default().to_string(),
            item_id,
        })
        .collect()
}

async fn register_worker(State(app): State<AppState>) -> Result<(StatusCode, Json<RegisteredWorker>), ApiError> {
    let mut inner = app.lock();
    let Inner { engine, rng } = &mut *inner;
    let worker_id = engine.register_worker(rng)?;
    let state = engine.state();
    let session = state.session(&worker_id)?;
    let body = RegisteredWorker {
        training: present(state, session.training.iter().map(|q| q.item_id.clone())),
        test: present(state, session.test.iter().map(|q| q.item_id.clone())),
        worker_id,
    };
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelsBody {
    pub labels: Vec<String>,
}

async fn verify_training(
    State(app): State<AppState>,
    Path((worker_id, question)): Path<(String, usize)>,
    body: Result<Json<LabelsBody>, JsonRejection>,
) -> ApiResult<TrainingOutcome> {
    let answer = labels(&body?.0.labels)?;
    Ok(Json(app.lock().engine.verify_training(&worker_id, question, answer)?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TestBody {
    pub answers: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TestResult {
    pub score: f64,
    pub correct: usize,
    pub qualified: bool,
}

async fn submit_test(
    State(app): State<AppState>,
    Path(worker_id): Path<String>,
    body: Result<Json<TestBody>, JsonRejection>,
) -> ApiResult<TestResult> {
    let answers = body?.0.answers.iter().map(|a| labels(a)).collect::<Result<Vec<_>, _>>()?;
    let grade = app.lock().engine.submit_qualification(&worker_id, &answers)?;
    Ok(Json(TestResult {
        score: grade.score,
        correct: grade.correct,
        qualified: grade.status == crowdgate_core::workflow::Qualification::Qualified,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IssuedAssignment {
    pub assignment_id: String,
    pub worker_id: String,
    pub items: Vec<PresentedItem>,
}

async fn issue_assignment(State(app): State<AppState>, Path(worker_id): Path<String>) -> ApiResult<IssuedAssignment> {
    let mut inner = app.lock();
    let Inner { engine, rng } = &mut *inner;
    let assignment = engine.issue_assignment(&worker_id, rng)?;
    let ids = assignment.presented_item_ids().into_iter().map(str::to_string);
    Ok(Json(IssuedAssignment {
        items: present(engine.state(), ids),
        assignment_id: assignment.assignment_id,
        worker_id,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerBody {
    pub item_id: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmissionBody {
    pub answers: Vec<AnswerBody>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmissionResult {
    pub assignment_id: String,
    pub assignment_score: f64,
    pub cumulative_score: f64,
    pub warning: bool,
    pub disqualified: bool,
}

async fn submit_assignment(
    State(app): State<AppState>,
    Path(assignment_id): Path<String>,
    body: Result<Json<SubmissionBody>, JsonRejection>,
) -> ApiResult<SubmissionResult> {
    let answers = body?
        .0
        .answers
        .iter()
        .map(|a| Ok(ItemAnswer { item_id: a.item_id.clone(), labels: labels(&a.labels)? }))
        .collect::<Result<Vec<_>, ApiError>>()?;
    let outcome = app.lock().engine.submit_assignment(&assignment_id, &answers)?;
    Ok(Json(SubmissionResult {
        assignment_id: outcome.assignment_id,
        assignment_score: outcome.assignment_score,
        cumulative_score: outcome.cumulative_score,
        warning: outcome.warning,
        disqualified: outcome.disqualified,
    }))
}

async fn cancel_assignment(
    State(app): State<AppState>,
    Path(assignment_id): Path<String>,
) -> Result<StatusCode, ApiError> {
    app.lock().engine.cancel_assignment(&assignment_id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WorkerStatus {
    pub worker_id: String,
    pub qualification: crowdgate_core::workflow::Qualification,
    pub lifecycle: crowdgate_core::workflow::Lifecycle,
    pub n_assignments: usize,
    pub cumulative_score: Option<f64>,
}

async fn worker_status(State(app): State<AppState>, Path(worker_id): Path<String>) -> ApiResult<WorkerStatus> {
    let inner = app.lock();
    let w = inner.engine.state().worker(&worker_id)?;
    Ok(Json(WorkerStatus {
        worker_id: w.worker_id.clone(),
        qualification: w.qualification,
        lifecycle: w.lifecycle,
        n_assignments: w.score_series.len(),
        cumulative_score: w.cumulative_score(),
    }))
}

#[derive(Debug, Deserialize)]
struct SchemeQuery {
    scheme: Option<String>,
}

fn scheme(raw: Option<&str>) -> Result<WeightScheme, ApiError> {
    raw.unwrap_or("equal").parse().map_err(|e: crowdgate_core::aggregation::AggregationError| {
        ApiError::bad_request(e.to_string())
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemAggregate {
    pub item_id: String,
    pub scheme: String,
    pub primary: String,
    pub winners: Vec<String>,
    pub tally: serde_json::Value,
    pub total_weight: f64,
    pub entropy_bits: f64,
    pub n_votes: usize,
}

async fn item_aggregate(
    State(app): State<AppState>,
    Path(item_id): Path<String>,
    Query(query): Query<SchemeQuery>,
) -> ApiResult<ItemAggregate> {
    let scheme = scheme(query.scheme.as_deref())?;
    let state = app.snapshot();
    if !state.items.contains_key(&item_id) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown item `{item_id}`")));
    }
    let aggregate = aggregate_state(&state, &WeightSchemeConfig::from_system(scheme, &state.config));
    let n_votes = state.votes.iter().filter(|v| v.item_id == item_id && !v.gold).count();
    let label = aggregate.labels.get(&item_id).ok_or_else(|| {
        let reason = if n_votes == 0 { "no votes" } else { "no effective voters" };
        ApiError::new(StatusCode::NOT_FOUND, reason)
    })?;
    Ok(Json(ItemAggregate {
        item_id,
        scheme: scheme.id().to_string(),
        primary: label.primary.code().to_string(),
        winners: label.winners.iter().map(|e| e.code().to_string()).collect(),
        tally: serde_json::to_value(label.tally).expect("tally serializes"),
        total_weight: label.total_weight,
        entropy_bits: label.entropy_bits,
        n_votes,
    }))
}

#[derive(Debug, Deserialize)]
struct ConsistencyQuery {
    eta: Option<String>,
    scheme: Option<String>,
}

async fn consistency(State(app): State<AppState>, Query(query): Query<ConsistencyQuery>) -> ApiResult<ConsistencyCurve> {
    let grid = match query.eta.as_deref() {
        None | Some("") => DEFAULT_ETA_GRID.to_vec(),
        Some(list) => list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| ApiError::bad_request(format!("eta `{v}`: {e}"))))
            .collect::<Result<_, _>>()?,
    };
    let scheme = scheme(query.scheme.as_deref())?;
    let state = app.snapshot();
    let snapshot = AnnotationSnapshot::from_state(&state);
    let weights = WeightSchemeConfig::from_system(scheme, &state.config);
    let curve = consistency_curve(&snapshot, &grid, &weights).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(curve))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EngineSummary {
    pub n_events: usize,
    pub n_workers: usize,
    pub n_votes: usize,
    pub digest: String,
}

async fn summary(State(app): State<AppState>) -> Json<EngineSummary> {
    let inner = app.lock();
    let state = inner.engine.state();
    Json(EngineSummary {
        n_events: inner.engine.records().len(),
        n_workers: state.workers.len(),
        n_votes: state.votes.len(),
        digest: state.digest(),
    })
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/workers", post(register_worker))
        .route("/workers/{id}", get(worker_status))
        .route("/workers/{id}/qualification/training/{q}", post(verify_training))
        .route("/workers/{id}/qualification/test", post(submit_test))
        .route("/workers/{id}/assignment", get(issue_assignment))
        .route("/assignments/{id}/submission", post(submit_assignment))
        .route("/assignments/{id}/cancellation", post(cancel_assignment))
        .route("/items/{id}/aggregate", get(item_aggregate))
        .route("/metrics/consistency", get(consistency))
        .route("/metrics/summary", get(summary))
        .with_state(app)
}
