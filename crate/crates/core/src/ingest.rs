//! Corpus ingestion from CSV or JSON lines.
//!
//! Records carry `item_id`, `text`, optional `gold_labels` (semicolon-joined
//! codes), optional `target` and optional `hint`. CSV files may start with a
//! header naming these columns; without one the columns are positional.

use crate::model::{Item, LabelSet, ModelError};
use serde::Deserialize;
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: duplicate item_id `{item_id}`")]
    DuplicateItem { line: u64, item_id: String },
    #[error("line {line}: unknown emotion code `{code}`")]
    UnknownCode { line: u64, code: String },
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Deserialize)]
struct RawItem {
    item_id: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    gold_labels: Option<GoldField>,
    #[serde(default)]
    target: Option<String>,
    #[serde(default)]
    hint: Option<String>,
}

/// JSON lines accept either `"a;b"` or `["a","b"]`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GoldField {
    Joined(String),
    List(Vec<String>),
}

impl GoldField {
    fn codes(&self) -> Vec<String> {
        match self {
            GoldField::Joined(s) => s.split(';').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect(),
            GoldField::List(v) => v.iter().map(|c| c.trim().to_string()).collect(),
        }
    }
}

const COLUMNS: [&str; 5] = ["item_id", "text", "gold_labels", "target", "hint"];

fn build(raw: RawItem, line: u64, seen: &mut BTreeSet<String>) -> Result<Item, IngestError> {
    let item_id = raw.item_id.trim().to_string();
    if item_id.is_empty() {
        return Err(IngestError::Malformed { line, reason: "empty item_id".into() });
    }
    if !seen.insert(item_id.clone()) {
        return Err(IngestError::DuplicateItem { line, item_id });
    }
    let codes = raw.gold_labels.map(|g| g.codes()).unwrap_or_default();
    let gold_labels = if codes.is_empty() {
        None
    } else {
        let labels = codes
            .iter()
            .map(|c| c.parse().map_err(|_| IngestError::UnknownCode { line, code: c.clone() }))
            .collect::<Result<Vec<_>, _>>()?;
        Some(LabelSet::new(labels).map_err(|e: ModelError| IngestError::Malformed { line, reason: e.to_string() })?)
    };
    let non_empty = |s: Option<String>| s.map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
    Ok(Item { item_id, text: raw.text, gold_labels, target: non_empty(raw.target), hint: non_empty(raw.hint) })
}

pub fn parse_jsonl(text: &str) -> Result<Vec<Item>, IngestError> {
    let mut seen = BTreeSet::new();
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawItem = serde_json::from_str(line)
            .map_err(|e| IngestError::Malformed { line: line_no, reason: e.to_string() })?;
        items.push(build(raw, line_no, &mut seen)?);
    }
    Ok(items)
}

pub fn parse_csv(text: &str) -> Result<Vec<Item>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut columns: Vec<usize> = (0..COLUMNS.len()).collect();
    let mut seen = BTreeSet::new();
    let mut items = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IngestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if index == 0 && record.iter().any(|f| f.trim() == "item_id") {
            columns = COLUMNS
                .iter()
                .map(|name| record.iter().position(|h| h.trim() == *name).unwrap_or(usize::MAX))
                .collect();
            if columns[0] == usize::MAX {
                return Err(IngestError::Malformed { line, reason: "header lacks item_id".into() });
            }
            continue;
        }
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let field = |c: usize| record.get(columns[c]).map(str::to_string);
        let raw = RawItem {
            item_id: field(0).unwrap_or_default(),
            text: field(1).unwrap_or_default(),
            gold_labels: field(2).map(GoldField::Joined),
            target: field(3),
            hint: field(4),
        };
        items.push(build(raw, line, &mut seen)?);
    }
    Ok(items)
}

/// Reads a corpus file; `.jsonl`/`.json` files, or files whose first
/// non-blank character is `{`, are read as JSON lines, anything else as CSV.
pub fn ingest_corpus(path: &Path) -> Result<Vec<Item>, IngestError> {
    let text = std::fs::read_to_string(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if matches!(ext, "jsonl" | "json") || text.trim_start().starts_with('{') {
        parse_jsonl(&text)
    } else {
        parse_csv(&text)
    }
}
