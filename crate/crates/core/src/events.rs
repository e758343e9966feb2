//! Append-only JSON-lines event log.
//!
//! Every state change of the workflow engine is one [`EventRecord`]. Records
//! carry a `seq` that starts at 1 and grows by exactly one, an ISO-8601 UTC
//! timestamp, an event `type` and a type-specific `payload` object.

use crate::model::{Item, LabelSet, SystemConfig};
use chrono::{DateTime, Duration, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("corrupt log at seq {0}")]
    SeqGap(u64),
    #[error("malformed record at byte offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("log is not valid UTF-8 at byte offset {0}")]
    Utf8(usize),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    EngineConfigured {
        config: SystemConfig,
    },
    CorpusLoaded {
        items: Vec<Item>,
    },
    WorkerRegistered {
        worker_id: String,
        training_item_ids: Vec<String>,
        test_item_ids: Vec<String>,
    },
    TrainingVerified {
        worker_id: String,
        question: usize,
        correct: bool,
    },
    QualificationResult {
        worker_id: String,
        score: f64,
        qualified: bool,
    },
    AssignmentIssued {
        assignment_id: String,
        worker_id: String,
        payload_item_ids: Vec<String>,
        gold_item_ids: Vec<String>,
        presentation_order: Vec<usize>,
    },
    AssignmentCancelled {
        assignment_id: String,
    },
    VoteRecorded {
        worker_id: String,
        item_id: String,
        assignment_id: String,
        labels: LabelSet,
        gold: bool,
    },
    SubmissionGraded {
        assignment_id: String,
        worker_id: String,
        score: f64,
        correct_gold: usize,
        cumulative_score: f64,
    },
    Warning {
        worker_id: String,
        assignment_id: String,
        assignment_score: f64,
    },
    Disqualified {
        worker_id: String,
        cumulative_score: f64,
    },
}

impl EventKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            EventKind::EngineConfigured { .. } => "ENGINE_CONFIGURED",
            EventKind::CorpusLoaded { .. } => "CORPUS_LOADED",
            EventKind::WorkerRegistered { .. } => "WORKER_REGISTERED",
            EventKind::TrainingVerified { .. } => "TRAINING_VERIFIED",
            EventKind::QualificationResult { .. } => "QUALIFICATION_RESULT",
            EventKind::AssignmentIssued { .. } => "ASSIGNMENT_ISSUED",
            EventKind::AssignmentCancelled { .. } => "ASSIGNMENT_CANCELLED",
            EventKind::VoteRecorded { .. } => "VOTE_RECORDED",
            EventKind::SubmissionGraded { .. } => "SUBMISSION_GRADED",
            EventKind::Warning { .. } => "WARNING",
            EventKind::Disqualified { .. } => "DISQUALIFIED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub ts: String,
    #[serde(flatten)]
    pub event: EventKind,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        // Serializing plain data into a String cannot fail.
        serde_json::to_string(self).expect("event record serializes")
    }
}

/// Source of record timestamps.
#[derive(Debug, Clone)]
pub enum Clock {
    /// Wall-clock UTC time.
    System,
    /// `epoch + seq` seconds; keeps simulated logs byte-reproducible.
    Simulated { epoch: DateTime<Utc> },
}

impl Clock {
    pub fn simulated() -> Self {
        Clock::Simulated {
            epoch: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    fn stamp(&self, seq: u64) -> String {
        match self {
            Clock::System => Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            Clock::Simulated { epoch } => (*epoch + Duration::seconds(seq as i64))
                .to_rfc3339_opts(SecondsFormat::Secs, true),
        }
    }
}

/// In-memory record list with an optional append-only file sink.
pub struct EventLog {
    records: Vec<EventRecord>,
    clock: Clock,
    sink: Option<Box<dyn Write + Send>>,
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog")
            .field("records", &self.records.len())
            .field("clock", &self.clock)
            .field("sink", &self.sink.is_some())
            .finish()
    }
}

impl EventLog {
    pub fn new(clock: Clock) -> Self {
        EventLog { records: Vec::new(), clock, sink: None }
    }

    /// Appends every new record to `path` (created or truncated).
    pub fn to_file(clock: Clock, path: &Path) -> Result<Self, LogError> {
        let file = File::create(path)?;
        Ok(EventLog::new(clock).with_sink(Box::new(BufWriter::new(file))))
    }

    /// Continues an existing log file: keeps `records` and appends new ones.
    pub fn resume_file(clock: Clock, path: &Path, records: Vec<EventRecord>) -> Result<Self, LogError> {
        let file = OpenOptions::new().append(true).create(true).open(path)?;
        let mut log = EventLog::new(clock).with_sink(Box::new(BufWriter::new(file)));
        log.records = records;
        Ok(log)
    }

    pub fn with_sink(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.sink = Some(sink);
        self
    }

    pub(crate) fn from_records(records: Vec<EventRecord>, clock: Clock) -> Self {
        EventLog { records, clock, sink: None }
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn next_seq(&self) -> u64 {
        self.records.len() as u64 + 1
    }

    pub fn append(&mut self, event: EventKind) -> Result<&EventRecord, LogError> {
        let seq = self.next_seq();
        let record = EventRecord { seq, ts: self.clock.stamp(seq), event };
        if let Some(sink) = self.sink.as_mut() {
            sink.write_all(record.to_line().as_bytes())?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }
}

/// Serializes records as JSON lines.
pub fn write_log<W: Write>(records: &[EventRecord], mut out: W) -> io::Result<()> {
    for record in records {
        out.write_all(record.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses JSON lines, checking that `seq` counts up from 1 without gaps.
pub fn parse_log(bytes: &[u8]) -> Result<Vec<EventRecord>, LogError> {
    let mut records = Vec::new();
    let mut offset = 0usize;
    for raw in bytes.split_inclusive(|b| *b == b'\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = std::str::from_utf8(raw).map_err(|e| LogError::Utf8(line_offset + e.valid_up_to()))?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(line).map_err(|e| LogError::Malformed {
            offset: line_offset,
            reason: e.to_string(),
        })?;
        let expected = records.len() as u64 + 1;
        if record.seq != expected {
            return Err(LogError::SeqGap(expected));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_log(path: &Path) -> Result<Vec<EventRecord>, LogError> {
    parse_log(&std::fs::read(path)?)
}
