mod common;

use crowdgate::cli::run;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_crowdgate");

fn crowdgate(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).env_remove("CROWDGATE_CONFIG").output().unwrap()
}

fn simulate_small(dir: &Path) -> std::path::PathBuf {
    let config = dir.join("small.conf");
    std::fs::write(&config, "corpus.n_items = 200\nworker.honest.count = 10\nworker.honest.p = 0.85\n").unwrap();
    let out = dir.join("sim");
    let status = crowdgate(&["simulate", "--config", config.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    out.join("events.jsonl")
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(["crowdgate"]), 1);
    assert_eq!(run(["crowdgate", "frobnicate"]), 1);
    assert_eq!(run(["crowdgate", "aggregate", "--scheme", "w9", "--log", "x.jsonl"]), 1);
    assert_eq!(run(["crowdgate", "analyze", "sentiment", "--log", "x.jsonl"]), 1);
    assert_eq!(run(["crowdgate", "--help"]), 0);
    assert_eq!(run(["crowdgate", "--version"]), 0);
}

#[test]
fn missing_or_corrupt_log_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.jsonl");
    assert_eq!(run(["crowdgate", "export", "--log", missing.to_str().unwrap()]), 2);

    let log = simulate_small(dir.path());
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(3);
    let gap = dir.path().join("gap.jsonl");
    std::fs::write(&gap, lines.join("\n")).unwrap();
    let out = crowdgate(&["export", "--log", gap.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt log at seq 4"));
}

#[test]
fn aggregate_writes_the_requested_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let log = simulate_small(dir.path());
    let out = dir.path().join("agg");
    let status = crowdgate(&["aggregate", "--scheme", "w2", "--log", log.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let mut reader = csv::Reader::from_path(out.join("aggregates.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "item_id");
    let scheme_col = headers.iter().position(|h| h == "scheme").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|r| &r[scheme_col] == "w2"));
}

#[test]
fn every_analysis_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let log = simulate_small(dir.path());
    let cases: [(&str, &[&str]); 4] = [
        ("consistency", &["consistency_curve.csv", "consistency_curve_gold.csv", "consistency_warnings.csv"]),
        ("confusion", &["confusion_matrix.csv"]),
        ("multilabel", &["multilabel_report.csv"]),
        ("difficulty", &["difficulty.csv"]),
    ];
    for (analysis, files) in cases {
        let out = dir.path().join(analysis);
        let status = crowdgate(&["analyze", analysis, "--log", log.to_str().unwrap(), "--out", out.to_str().unwrap(), "--scheme", "w3"]);
        assert!(status.status.success(), "{analysis}: {}", String::from_utf8_lossy(&status.stderr));
        for file in files {
            assert!(out.join(file).is_file(), "{analysis} lacks {file}");
        }
    }
}

#[test]
fn simulate_then_export_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let tables = common::cli_round_trip(dir.path(), 9).unwrap();
    assert_eq!(tables, ["aggregates.csv", "items.csv", "votes.csv", "workers.csv"]);
    let again = tempfile::tempdir().unwrap();
    common::cli_round_trip(again.path(), 9).unwrap();
    let log = |d: &Path| std::fs::read(d.join("live/events.jsonl")).unwrap();
    assert_eq!(log(dir.path()), log(again.path()));
}

#[test]
fn environment_config_wins_over_flag() {
    let dir = tempfile::tempdir().unwrap();
    let env_config = dir.path().join("env.conf");
    std::fs::write(&env_config, "corpus.n_items = 100\n").unwrap();
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args(["simulate", "--config", "/nonexistent/flag.conf", "--seed", "1", "--out", out.to_str().unwrap()])
        .env("CROWDGATE_CONFIG", &env_config)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let items = std::fs::read_to_string(out.join("items.csv")).unwrap();
    assert_eq!(items.lines().count(), 101);

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "payload_sizee = 3\n").unwrap();
    assert_eq!(crowdgate(&["simulate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn infeasible_simulation_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("lonely.conf");
    std::fs::write(&config, "corpus.n_items = 100\nworker.solo.count = 2\n").unwrap();
    let out = dir.path().join("out");
    let result = crowdgate(&["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("infeasible"));
    assert!(out.join("events.jsonl").is_file());
    assert!(out.join("summary.csv").is_file());
}

struct Served(std::process::Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_server(config: &Path) -> (Served, String) {
    let mut child = Command::new(BIN)
        .args(["serve", "--config", config.to_str().unwrap(), "--listen", "127.0.0.1:0"])
        .env_remove("CROWDGATE_CONFIG")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected output {line:?}"));
    let base = format!("http://{addr}");
    (Served(child), base)
}

#[tokio::test]
async fn serve_resumes_from_its_log() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let lines: Vec<String> = common::corpus(30, 40)
        .into_iter()
        .map(|item| {
            let gold = item.gold_labels.map(|g| g.to_codes());
            serde_json::json!({ "item_id": item.item_id, "text": item.text, "gold_labels": gold }).to_string()
        })
        .collect();
    std::fs::write(&corpus, lines.join("\n")).unwrap();
    let log = dir.path().join("service.jsonl");
    let config = dir.path().join("serve.conf");
    std::fs::write(
        &config,
        format!("corpus.path = {}\nlog.path = {}\nseed = 4\npayload_size = 5\n", corpus.display(), log.display()),
    )
    .unwrap();

    let (server, base) = spawn_server(&config);
    let client = common::Client::new(&base);
    let first = client.qualify().await;
    assert_eq!(first, "w00001");
    drop(server);

    let written = crowdgate_core::events::read_log(&log).unwrap();
    assert!(written.len() > 3);
    let (_server, base) = spawn_server(&config);
    let client = common::Client::new(&base);
    let (status, info) = client.get(&format!("/workers/{first}")).await;
    assert_eq!(status, 200);
    assert_eq!(info["qualification"], "qualified");
    assert_eq!(client.qualify().await, "w00002");
    let (status, _) = client.get(&format!("/workers/{first}/assignment")).await;
    assert_eq!(status, 200);
}
