#![allow(dead_code)]

use crowdgate::api::{router, AppState};
use crowdgate_core::events::{Clock, EventLog};
use crowdgate_core::model::{EmotionLabel, Item, SystemConfig};
use crowdgate_core::workflow::Engine;
use crowdgate_core::LabelSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Gold item `i` is labelled with a single emotion that cycles through the
/// non-`na` codes; code `i + 1` is therefore always a wrong answer for it.
pub fn gold_label(i: usize) -> EmotionLabel {
    EmotionLabel::ALL[i % 11]
}

pub fn wrong_label(i: usize) -> EmotionLabel {
    EmotionLabel::ALL[(i + 1) % 11]
}

pub fn corpus(n_payload: usize, n_gold: usize) -> Vec<Item> {
    let gold = (0..n_gold).map(|i| Item::gold(format!("g{i:03}"), format!("gold text {i}"), LabelSet::single(gold_label(i))));
    let payload = (0..n_payload).map(|i| Item::payload(format!("t{i:04}"), format!("tweet {i}")));
    gold.chain(payload).collect()
}

pub struct Server {
    pub base: String,
    pub app: AppState,
}

pub async fn start(config: SystemConfig, items: Vec<Item>, log: EventLog) -> Server {
    let mut engine = Engine::new(config, log).unwrap();
    engine.load_corpus(items).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    rng.set_stream(1);
    let app = AppState::new(engine, rng);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let served = app.clone();
    tokio::spawn(async move { axum::serve(listener, router(served)).await.unwrap() });
    Server { base, app }
}

pub async fn start_default(n_payload: usize, n_gold: usize) -> Server {
    start(SystemConfig::default(), corpus(n_payload, n_gold), EventLog::new(Clock::System)).await
}

#[derive(Clone)]
pub struct Client {
    pub http: reqwest::Client,
    pub base: String,
}

fn gold_index(item_id: &str) -> Option<usize> {
    item_id.strip_prefix('g').map(|n| n.parse().unwrap())
}

impl Client {
    pub fn new(base: &str) -> Self {
        Client { http: reqwest::Client::new(), base: base.to_string() }
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let resp = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn post_raw(&self, path: &str, body: &'static str) -> (u16, Value) {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    /// Registers, passes every training question and answers the test
    /// perfectly.
    pub async fn qualify(&self) -> String {
        let (status, reg) = self.post("/workers", json!({})).await;
        assert_eq!(status, 201, "{reg}");
        let id = reg["worker_id"].as_str().unwrap().to_string();
        for (q, item) in reg["training"].as_array().unwrap().iter().enumerate() {
            let g = gold_index(item["item_id"].as_str().unwrap()).unwrap();
            let (status, body) = self
                .post(&format!("/workers/{id}/qualification/training/{q}"), json!({ "labels": [gold_label(g).code()] }))
                .await;
            assert_eq!(status, 200, "{body}");
        }
        let answers: Vec<Value> = reg["test"]
            .as_array()
            .unwrap()
            .iter()
            .map(|item| json!([gold_label(gold_index(item["item_id"].as_str().unwrap()).unwrap()).code()]))
            .collect();
        let (status, body) = self.post(&format!("/workers/{id}/qualification/test"), json!({ "answers": answers })).await;
        assert_eq!(status, 200, "{body}");
        assert_eq!(body["qualified"], true);
        id
    }

    /// Answers an issued assignment, getting the first `correct_gold` gold
    /// items (in presentation order) right.
    pub fn answers(assignment: &Value, correct_gold: usize) -> Value {
        let mut seen_gold = 0;
        let answers: Vec<Value> = assignment["items"]
            .as_array()
            .unwrap()
            .iter()
            .map(|item| {
                let id = item["item_id"].as_str().unwrap();
                let label = match gold_index(id) {
                    Some(g) => {
                        seen_gold += 1;
                        if seen_gold <= correct_gold { gold_label(g) } else { wrong_label(g) }
                    }
                    None => EmotionLabel::Sorrow,
                };
                json!({ "item_id": id, "labels": [label.code()] })
            })
            .collect();
        json!({ "answers": answers })
    }
}

use crowdgate_core::events::read_log;
use crowdgate_core::workflow::{audit_log, AuditReport};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Default)]
pub struct ClientRun {
    pub worker_id: String,
    pub scores: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub cancelled: usize,
    pub stopped_with: u16,
}

#[derive(Debug)]
pub struct StressReport {
    pub runs: Vec<ClientRun>,
    pub audit: AuditReport,
    pub problems: Vec<String>,
    pub max_votes: usize,
    pub submissions: usize,
}

/// Drives `n_clients` concurrent workers against one service until every one
/// of them is refused more work, then checks the on-disk log.
pub async fn stress(n_clients: usize, log_path: &Path) -> StressReport {
    let config = SystemConfig::default();
    let k = config.target_votes;
    let payload_size = config.payload_size;
    let log = EventLog::to_file(Clock::System, log_path).unwrap();
    let server = start(config, corpus(400, 60), log).await;

    let mut tasks = Vec::new();
    for i in 0..n_clients {
        let client = Client::new(&server.base);
        tasks.push(tokio::spawn(async move {
            let mut run = ClientRun { worker_id: client.qualify().await, ..ClientRun::default() };
            let correct = if i % 4 == 3 { 1 } else { 4 + i % 2 };
            let cancels = if i % 5 == 4 { 2 } else { 0 };
            loop {
                let (status, assignment) = client.get(&format!("/workers/{}/assignment", run.worker_id)).await;
                if status != 200 {
                    run.stopped_with = status;
                    break;
                }
                let id = assignment["assignment_id"].as_str().unwrap().to_string();
                if run.cancelled < cancels {
                    let (status, _) = client.post(&format!("/assignments/{id}/cancellation"), json!({})).await;
                    assert_eq!(status, 204);
                    run.cancelled += 1;
                    continue;
                }
                let (status, result) =
                    client.post(&format!("/assignments/{id}/submission"), Client::answers(&assignment, correct)).await;
                assert_eq!(status, 200, "{result}");
                run.scores.push(result["assignment_score"].as_f64().unwrap());
                run.cumulative.push(result["cumulative_score"].as_f64().unwrap());
                if result["disqualified"] == true {
                    run.stopped_with = 403;
                    break;
                }
            }
            run
        }));
    }
    let mut runs = Vec::new();
    for task in tasks {
        runs.push(task.await.unwrap());
    }

    let mut problems = Vec::new();
    let on_disk = read_log(log_path).unwrap();
    let live = server.app.records();
    if on_disk != live {
        problems.push(format!("log file has {} records, engine {}", on_disk.len(), live.len()));
    }
    let audit = audit_log(&on_disk);
    let state = server.app.snapshot();
    for run in &runs {
        let worker = &state.workers[&run.worker_id];
        if worker.score_series != run.scores {
            problems.push(format!("{}: server has {:?}, client saw {:?}", run.worker_id, worker.score_series, run.scores));
        }
        if worker.cumulative_score() != run.cumulative.last().copied() {
            problems.push(format!("{}: cumulative score mismatch", run.worker_id));
        }
    }
    let submissions: usize = runs.iter().map(|r| r.scores.len()).sum();
    if submissions != audit.graded_assignments {
        problems.push(format!("{submissions} accepted submissions, {} graded in log", audit.graded_assignments));
    }
    let payload_votes = state.votes.iter().filter(|v| !v.gold).count();
    if payload_votes != submissions * payload_size {
        problems.push(format!("{payload_votes} payload votes for {submissions} submissions"));
    }
    let replayed = Engine::replay(on_disk).unwrap();
    if replayed.state().digest() != state.digest() {
        problems.push("replayed digest differs from live state".into());
    }
    let max_votes = audit.votes_per_item.values().copied().max().unwrap_or(0);
    if max_votes > k {
        problems.push(format!("an item holds {max_votes} votes, budget {k}"));
    }
    StressReport { runs, audit, problems, max_votes, submissions }
}

/// Simulates into one directory, exports the replayed log into another and
/// lists every table whose bytes differ.
pub fn cli_round_trip(dir: &Path, seed: u64) -> Result<Vec<String>, String> {
    let bin = env!("CARGO_BIN_EXE_crowdgate");
    let live = dir.join("live");
    let replayed = dir.join("replayed");
    let run = |args: &[&str]| {
        let out = std::process::Command::new(bin).args(args).env_remove("CROWDGATE_CONFIG").output().unwrap();
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    let seed = seed.to_string();
    run(&["simulate", "--seed", &seed, "--out", live.to_str().unwrap()])?;
    let log = live.join("events.jsonl");
    run(&["export", "--log", log.to_str().unwrap(), "--out", replayed.to_str().unwrap()])?;
    let mut compared = Vec::new();
    for entry in std::fs::read_dir(&replayed).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let other = std::fs::read(live.join(&name)).map_err(|e| format!("{name}: {e}"))?;
        if std::fs::read(&path).unwrap() != other {
            return Err(format!("{name} differs between live and replayed export"));
        }
        compared.push(name);
    }
    compared.sort();
    Ok(compared)
}

pub fn votes_by_item(report: &StressReport) -> &BTreeMap<String, usize> {
    &report.audit.votes_per_item
}
