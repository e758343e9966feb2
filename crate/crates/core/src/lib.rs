//! Quality-aware crowdsourced annotation.
//!
//! Gold questions are embedded into every assignment, workers are scored and
//! monitored as they submit, and multi-label votes are aggregated with either
//! plain majority voting or performance-weighted voting. A statistical worker
//! simulator drives the whole loop for experiments.

pub mod aggregation;
pub mod analytics;
pub mod config;
pub mod events;
pub mod export;
pub mod ingest;
pub mod model;
pub mod simulation;
pub mod stats;
pub mod workflow;

pub use model::{EmotionLabel, GoldRule, Item, LabelSet, SystemConfig, Vote};
pub use stats::{score_series_stats, ScoreSeriesStats};
