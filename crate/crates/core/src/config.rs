//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. System keys use the
//! [`SystemConfig`] field names. Experiments add `seed`, `scheme`,
//! `max_assignments`, `max_training_attempts`, `corpus.*` and one block of
//! `worker.<name>.*` keys per archetype.

use crate::aggregation::WeightScheme;
use crate::model::{EmotionLabel, SystemConfig};
use crate::simulation::{Archetype, BiasKind, CorpusSpec, ExperimentConfig};
use serde::de::DeserializeOwned;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Value { key: String, reason: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

const SYSTEM_KEYS: &[&str] = &[
    "payload_size",
    "gold_per_assignment",
    "target_votes",
    "qualification_pass",
    "min_cumulative",
    "warning_threshold",
    "min_assignments_for_analysis",
    "weight_a",
    "weight_b",
    "weight_c",
    "gold_rule",
    "tie_break",
    "monitoring",
];
const EXPERIMENT_KEYS: &[&str] = &[
    "seed",
    "scheme",
    "max_assignments",
    "max_training_attempts",
    "corpus.n_items",
    "corpus.gold_pool_size",
    "corpus.labels",
    "corpus.multi_label_fraction",
];
const SERVICE_KEYS: &[&str] = &["corpus.path", "log.path", "listen"];
const WORKER_FIELDS: &[&str] = &["count", "p", "delta", "r", "q", "effort", "bias"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            // `#` opens a comment at line start or after whitespace
            let line = match raw.find(" #").or_else(|| raw.find("\t#")) {
                Some(at) => raw[..at].trim(),
                None => raw.trim(),
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |reason: &str| ConfigError::Syntax { line: i + 1, reason: reason.to_string() };
            let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(syntax("empty key"));
            }
            if !is_known(key) {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(syntax(&format!("duplicate key `{key}`")));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if !is_known(key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    fn parsed<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), reason: e.to_string() }))
            .transpose()
    }

    fn snake_enum<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                serde_json::from_value(serde_json::Value::String(v.to_string()))
                    .map_err(|_| ConfigError::Value { key: key.into(), reason: format!("unrecognized `{v}`") })
            })
            .transpose()
    }

    pub fn system_config(&self) -> Result<SystemConfig, ConfigError> {
        let mut c = SystemConfig::default();
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.parsed(stringify!($field))? { c.$field = v; }
            )*};
        }
        set!(
            payload_size,
            gold_per_assignment,
            target_votes,
            qualification_pass,
            min_cumulative,
            warning_threshold,
            min_assignments_for_analysis,
            weight_a,
            weight_b,
            weight_c,
            monitoring
        );
        if let Some(rule) = self.snake_enum("gold_rule")? {
            c.gold_rule = rule;
        }
        if let Some(tie) = self.snake_enum("tie_break")? {
            c.tie_break = tie;
        }
        c.validate().map_err(|e| ConfigError::Value { key: "system".into(), reason: e.to_string() })?;
        Ok(c)
    }

    pub fn seed(&self) -> Result<Option<u64>, ConfigError> {
        self.parsed("seed")
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut e = ExperimentConfig { system: self.system_config()?, ..ExperimentConfig::default() };
        if let Some(seed) = self.seed()? {
            e.seed = seed;
        }
        if let Some(scheme) = self.parsed::<WeightScheme>("scheme")? {
            e.scheme = scheme;
        }
        e.max_assignments = self.parsed("max_assignments")?;
        if let Some(n) = self.parsed("max_training_attempts")? {
            e.max_training_attempts = n;
        }
        e.corpus = self.corpus_spec()?;
        let population = self.population()?;
        if !population.is_empty() {
            e.population = population;
        }
        e.validate().map_err(|err| ConfigError::Value { key: "experiment".into(), reason: err.to_string() })?;
        Ok(e)
    }

    fn corpus_spec(&self) -> Result<CorpusSpec, ConfigError> {
        let mut spec = CorpusSpec::default();
        if let Some(n) = self.parsed("corpus.n_items")? {
            spec.n_items = n;
        }
        if let Some(n) = self.parsed("corpus.gold_pool_size")? {
            spec.gold_pool_size = n;
        }
        if let Some(f) = self.parsed("corpus.multi_label_fraction")? {
            spec.multi_label_fraction = f;
        }
        if let Some(list) = self.get("corpus.labels") {
            spec.label_weights = parse_label_weights(list)
                .map_err(|reason| ConfigError::Value { key: "corpus.labels".into(), reason })?;
        }
        Ok(spec)
    }

    fn population(&self) -> Result<Vec<Archetype>, ConfigError> {
        let mut by_name: BTreeMap<&str, Archetype> = BTreeMap::new();
        for (key, value) in &self.entries {
            let Some((name, field)) = key.strip_prefix("worker.").and_then(|rest| rest.rsplit_once('.')) else {
                continue;
            };
            let a = by_name.entry(name).or_insert_with(|| Archetype::new(name, 1, 1.0));
            let bad = |reason: String| ConfigError::Value { key: key.clone(), reason };
            let float = || value.parse::<f64>().map_err(|e| bad(e.to_string()));
            match field {
                "count" => a.count = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "p" => a.p = float()?,
                "delta" => a.delta = float()?,
                "r" => a.r = float()?,
                "q" => a.q = float()?,
                "effort" => a.effort = float()?,
                "bias" => a.bias = self.snake_enum::<BiasKind>(key)?.expect("key present"),
                _ => unreachable!("rejected at parse time"),
            }
        }
        Ok(by_name.into_values().collect())
    }
}

fn is_known(key: &str) -> bool {
    if SYSTEM_KEYS.contains(&key) || EXPERIMENT_KEYS.contains(&key) || SERVICE_KEYS.contains(&key) {
        return true;
    }
    match key.strip_prefix("worker.").and_then(|rest| rest.rsplit_once('.')) {
        Some((name, field)) => !name.is_empty() && WORKER_FIELDS.contains(&field),
        None => false,
    }
}

/// Parses `anger:2,disappoint:1`; a bare code has weight 1.
fn parse_label_weights(list: &str) -> Result<Vec<(EmotionLabel, f64)>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|entry| {
            let (code, weight) = entry.split_once(':').unwrap_or((entry, "1"));
            let label: EmotionLabel = code.trim().parse().map_err(|e: crate::model::ModelError| e.to_string())?;
            let weight: f64 = weight.trim().parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
            Ok((label, weight))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GoldRule;

    const SAMPLE: &str = "
# binary-collapsed run
seed = 7
scheme = w2
target_votes = 5
gold_rule = exact
monitoring = false
corpus.n_items = 200
corpus.labels = anger, disappoint:1
corpus.multi_label_fraction = 0
worker.steady.count = 12
worker.steady.p = 0.7
worker.steady.bias = support
worker.tired.p = 0.9
worker.tired.delta = 0.05
";

    #[test]
    fn trailing_comments() {
        let file = ConfigFile::parse("gold_rule = exact   # strict\ncorpus.path = data#1.csv\n").unwrap();
        assert_eq!(file.get("gold_rule"), Some("exact"));
        assert_eq!(file.get("corpus.path"), Some("data#1.csv"));
    }

    #[test]
    fn parses_experiment() {
        let file = ConfigFile::parse(SAMPLE).unwrap();
        let e = file.experiment_config().unwrap();
        assert_eq!(e.seed, 7);
        assert_eq!(e.scheme, WeightScheme::W2);
        assert_eq!(e.system.gold_rule, GoldRule::Exact);
        assert!(!e.system.monitoring);
        assert_eq!(e.corpus.n_items, 200);
        assert_eq!(e.corpus.label_weights, vec![(EmotionLabel::Anger, 1.0), (EmotionLabel::Disappoint, 1.0)]);
        assert_eq!(e.population.len(), 2);
        let steady = &e.population[0];
        assert_eq!((steady.name.as_str(), steady.count, steady.p, steady.bias), ("steady", 12, 0.7, BiasKind::Support));
        let tired = &e.population[1];
        assert_eq!((tired.count, tired.delta), (1, 0.05));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ConfigFile::parse("payload = 3"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(ConfigFile::parse("seed 3"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ConfigFile::parse("seed=1\nseed=2"), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(matches!(ConfigFile::parse("worker.x.speed = 1"), Err(ConfigError::UnknownKey(_))));
        let file = ConfigFile::parse("target_votes = many").unwrap();
        assert!(matches!(file.system_config(), Err(ConfigError::Value { .. })));
        let file = ConfigFile::parse("corpus.labels = anger:1,rage:2").unwrap();
        assert!(file.experiment_config().is_err());
    }
}
