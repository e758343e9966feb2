//! Majority and performance-weighted voting over multi-label votes, plus
//! entropy-based item difficulty.

use crate::model::{EmotionLabel, LabelSet, SystemConfig, Vote, EMOTION_COUNT};
use crate::stats::ScoreSeriesStats;
use crate::workflow::EngineState;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Relative slack for the winner-inclusion threshold.
const THRESHOLD_EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("no votes")]
    NoVotes,
    #[error("no effective voters")]
    NoEffectiveVoters,
    #[error("negative or non-finite weight {0}")]
    InvalidWeight(f64),
    #[error("zero total weight")]
    ZeroTotal,
    #[error("unknown weight scheme `{0}`")]
    UnknownScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Equal,
    W1,
    W2,
    W3,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 4] = [WeightScheme::Equal, WeightScheme::W1, WeightScheme::W2, WeightScheme::W3];

    pub fn id(self) -> &'static str {
        match self {
            WeightScheme::Equal => "equal",
            WeightScheme::W1 => "w1",
            WeightScheme::W2 => "w2",
            WeightScheme::W3 => "w3",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for WeightScheme {
    type Err = AggregationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|scheme| scheme.id() == s)
            .ok_or_else(|| AggregationError::UnknownScheme(s.to_string()))
    }
}

/// Bell-shaped function used by the low-variance boost term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `(2π)^(-1/2) exp(-x²/2)`.
    #[default]
    StandardNormalDensity,
    /// `exp(-x²/2)`.
    UnnormalizedGaussian,
}

impl Kernel {
    pub fn eval(self, x: f64) -> f64 {
        let g = (-0.5 * x * x).exp();
        match self {
            Kernel::StandardNormalDensity => g / (2.0 * PI).sqrt(),
            Kernel::UnnormalizedGaussian => g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSchemeConfig {
    pub scheme: WeightScheme,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub kernel: Kernel,
}

impl WeightSchemeConfig {
    pub fn new(scheme: WeightScheme) -> Self {
        WeightSchemeConfig { scheme, a: 0.3, b: 2.0, c: 2.0, kernel: Kernel::default() }
    }

    pub fn from_system(scheme: WeightScheme, config: &SystemConfig) -> Self {
        WeightSchemeConfig { a: config.weight_a, b: config.weight_b, c: config.weight_c, ..Self::new(scheme) }
    }

    /// Weight of a worker with no graded assignment yet.
    pub fn untracked_weight(&self) -> f64 {
        match self.scheme {
            WeightScheme::Equal => 1.0,
            _ => 0.0,
        }
    }
}

/// Voting weight of a worker from its score statistics.
///
/// The baseline `((m²+a)/(1+a))·(1 + ζ·k/b)` rewards high averages, with
/// `ζ = 1` for `w1` and `ζ = 1[k>0]` otherwise. The stability boost is
/// `-2(σ-1)·f(5(m-0.8))`. `w1`/`w2` subtract `0.2σ`; `w3` scales the baseline
/// by `1 - σ/c` instead. Results are clamped at zero.
pub fn worker_weight(config: &WeightSchemeConfig, stats: &ScoreSeriesStats) -> f64 {
    let ScoreSeriesStats { m, sigma, k } = *stats;
    let zeta = match config.scheme {
        WeightScheme::Equal => return 1.0,
        WeightScheme::W1 => 1.0,
        WeightScheme::W2 | WeightScheme::W3 => {
            if k > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    };
    let base = (m * m + config.a) / (1.0 + config.a) * (1.0 + zeta * k / config.b);
    let boost = -2.0 * (sigma - 1.0) * config.kernel.eval(5.0 * (m - 0.8));
    let weight = match config.scheme {
        WeightScheme::W3 => base * (1.0 - sigma / config.c) + boost,
        _ => base - 0.2 * sigma + boost,
    };
    weight.max(0.0)
}

/// Per-emotion weight sums for one item plus the total weight of its voters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tally {
    sums: [f64; EMOTION_COUNT],
    voter_weight: f64,
}

impl Tally {
    pub fn get(&self, label: EmotionLabel) -> f64 {
        self.sums[label.index()]
    }

    pub fn voter_weight(&self) -> f64 {
        self.voter_weight
    }

    pub fn total(&self) -> f64 {
        self.sums.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EmotionLabel, f64)> + '_ {
        EmotionLabel::ALL.into_iter().map(|label| (label, self.get(label)))
    }

    /// Builds a tally directly from per-emotion sums.
    pub fn from_counts(counts: &[(EmotionLabel, f64)], voter_weight: f64) -> Self {
        let mut tally = Tally { voter_weight, ..Tally::default() };
        for &(label, w) in counts {
            tally.sums[label.index()] += w;
        }
        tally
    }
}

impl Serialize for Tally {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(EMOTION_COUNT))?;
        for (label, w) in self.iter() {
            map.serialize_entry(label.code(), &w)?;
        }
        map.end()
    }
}

/// Sums each vote's weight into every emotion its label set contains.
pub fn tally_votes<I>(votes: I) -> Result<Tally, AggregationError>
where
    I: IntoIterator<Item = (LabelSet, f64)>,
{
    let mut tally = Tally::default();
    let mut any = false;
    for (labels, weight) in votes {
        if !weight.is_finite() || weight < 0.0 {
            return Err(AggregationError::InvalidWeight(weight));
        }
        any = true;
        tally.voter_weight += weight;
        for label in labels.iter() {
            tally.sums[label.index()] += weight;
        }
    }
    if !any {
        return Err(AggregationError::NoVotes);
    }
    if tally.voter_weight <= 0.0 {
        return Err(AggregationError::NoEffectiveVoters);
    }
    Ok(tally)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatedLabel {
    pub item_id: String,
    pub tally: Tally,
    pub winners: LabelSet,
    pub primary: EmotionLabel,
    pub total_weight: f64,
    pub entropy_bits: f64,
}

/// Shannon entropy of the normalized tally, in bits.
pub fn label_entropy(tally: &Tally) -> Result<f64, AggregationError> {
    let total = tally.total();
    if total <= 0.0 {
        return Err(AggregationError::ZeroTotal);
    }
    let h = tally
        .sums
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Primary label is the argmax with ties going to the smallest code; winners
/// are every label holding at least half of the voter weight, plus the
/// primary. `na` is only kept when it is the primary, and then alone.
pub fn aggregate_label(item_id: &str, tally: &Tally) -> Result<AggregatedLabel, AggregationError> {
    if tally.voter_weight <= 0.0 {
        return Err(AggregationError::NoEffectiveVoters);
    }
    let primary = tally
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .max_by(|(la, wa), (lb, wb)| wa.total_cmp(wb).then_with(|| lb.code().cmp(la.code())))
        .map(|(label, _)| label)
        .ok_or(AggregationError::ZeroTotal)?;
    let threshold = 0.5 * tally.voter_weight * (1.0 - THRESHOLD_EPS);
    let winners = if primary == EmotionLabel::Na {
        LabelSet::single(EmotionLabel::Na)
    } else {
        let labels = tally
            .iter()
            .filter(|(label, w)| *label != EmotionLabel::Na && *w > 0.0 && *w >= threshold)
            .map(|(label, _)| label)
            .chain(std::iter::once(primary));
        LabelSet::new(labels).expect("primary keeps the set non-empty and na-free")
    };
    Ok(AggregatedLabel {
        item_id: item_id.to_string(),
        tally: *tally,
        winners,
        primary,
        total_weight: tally.voter_weight,
        entropy_bits: label_entropy(tally)?,
    })
}

/// Aggregates of every item that could be resolved, plus the ids of items
/// whose voters all carried zero weight.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusAggregate {
    pub scheme: Option<WeightScheme>,
    pub labels: BTreeMap<String, AggregatedLabel>,
    pub unresolved: Vec<String>,
}

/// Groups `votes` by item and aggregates each item.
pub fn aggregate_votes<'a, I, F>(votes: I, weight_of: F) -> CorpusAggregate
where
    I: IntoIterator<Item = &'a Vote>,
    F: Fn(&str) -> f64,
{
    let mut by_item: BTreeMap<&str, Vec<(LabelSet, f64)>> = BTreeMap::new();
    for vote in votes {
        by_item
            .entry(vote.item_id.as_str())
            .or_default()
            .push((vote.labels, weight_of(&vote.worker_id)));
    }
    let mut out = CorpusAggregate::default();
    for (item_id, item_votes) in by_item {
        match tally_votes(item_votes).and_then(|t| aggregate_label(item_id, &t)) {
            Ok(label) => {
                out.labels.insert(item_id.to_string(), label);
            }
            Err(_) => out.unresolved.push(item_id.to_string()),
        }
    }
    out
}

/// Per-worker weights under `config` from optional score statistics.
pub fn scheme_weights<'a, I>(config: &WeightSchemeConfig, workers: I) -> BTreeMap<String, f64>
where
    I: IntoIterator<Item = (&'a str, Option<ScoreSeriesStats>)>,
{
    workers
        .into_iter()
        .map(|(id, stats)| {
            let w = stats.map_or(config.untracked_weight(), |s| worker_weight(config, &s));
            (id.to_string(), w)
        })
        .collect()
}

/// Aggregates the payload votes of an engine state, weighting each worker by
/// its full score series.
pub fn aggregate_state(state: &EngineState, config: &WeightSchemeConfig) -> CorpusAggregate {
    let weights = scheme_weights(config, state.workers.values().map(|w| (w.worker_id.as_str(), w.stats)));
    let untracked = config.untracked_weight();
    let mut out = aggregate_votes(state.votes.iter().filter(|v| !v.gold), |id| {
        weights.get(id).copied().unwrap_or(untracked)
    });
    out.scheme = Some(config.scheme);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyTier {
    Easy,
    Medium,
    Hard,
}

impl DifficultyTier {
    pub fn id(self) -> &'static str {
        match self {
            DifficultyTier::Easy => "easy",
            DifficultyTier::Medium => "medium",
            DifficultyTier::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyThresholds {
    /// Entropy below this is easy.
    pub medium_from: f64,
    /// Entropy at or above this is hard.
    pub hard_from: f64,
}

impl Default for DifficultyThresholds {
    fn default() -> Self {
        DifficultyThresholds { medium_from: 0.5, hard_from: 1.5 }
    }
}

impl DifficultyThresholds {
    pub fn tier(&self, entropy_bits: f64) -> DifficultyTier {
        if entropy_bits < self.medium_from {
            DifficultyTier::Easy
        } else if entropy_bits < self.hard_from {
            DifficultyTier::Medium
        } else {
            DifficultyTier::Hard
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedItem {
    pub item_id: String,
    pub entropy_bits: f64,
    pub tier: DifficultyTier,
}

/// Items by descending entropy, ties by item id.
pub fn difficulty_rank<'a, I>(labels: I, thresholds: &DifficultyThresholds) -> Vec<RankedItem>
where
    I: IntoIterator<Item = &'a AggregatedLabel>,
{
    let mut ranked: Vec<RankedItem> = labels
        .into_iter()
        .map(|l| RankedItem {
            item_id: l.item_id.clone(),
            entropy_bits: l.entropy_bits,
            tier: thresholds.tier(l.entropy_bits),
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.entropy_bits
            .total_cmp(&a.entropy_bits)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    ranked
}
