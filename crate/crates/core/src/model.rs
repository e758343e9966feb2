//! Domain types shared by every other module: the emotion taxonomy, label
//! sets, category schemes, corpus items, votes and the system configuration.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Number of codes in the emotion taxonomy.
pub const EMOTION_COUNT: usize = 12;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown emotion code `{0}`")]
    UnknownEmotion(String),
    #[error("empty label set")]
    EmptyLabelSet,
    #[error("`na` cannot be combined with other labels")]
    NaNotAlone,
    #[error("unknown category scheme `{0}`")]
    UnknownScheme(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// One code of the fixed emotion taxonomy.
///
/// The declaration order is the taxonomy order used for CSV columns. Tie
/// breaking uses the code spelling instead, see [`EmotionLabel::code`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionLabel {
    Anger,
    Disappoint,
    Sorrow,
    Fear,
    Worry,
    HappinessSatisfied,
    Hope,
    EmpathySympathy,
    Grateful,
    Surprise,
    Sarcasm,
    Na,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; EMOTION_COUNT] = [
        EmotionLabel::Anger,
        EmotionLabel::Disappoint,
        EmotionLabel::Sorrow,
        EmotionLabel::Fear,
        EmotionLabel::Worry,
        EmotionLabel::HappinessSatisfied,
        EmotionLabel::Hope,
        EmotionLabel::EmpathySympathy,
        EmotionLabel::Grateful,
        EmotionLabel::Surprise,
        EmotionLabel::Sarcasm,
        EmotionLabel::Na,
    ];

    /// Canonical wire spelling.
    pub fn code(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disappoint => "disappoint",
            EmotionLabel::Sorrow => "sorrow",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Worry => "worry",
            EmotionLabel::HappinessSatisfied => "happiness_satisfied",
            EmotionLabel::Hope => "hope",
            EmotionLabel::EmpathySympathy => "empathy_sympathy",
            EmotionLabel::Grateful => "grateful",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Sarcasm => "sarcasm",
            EmotionLabel::Na => "na",
        }
    }

    /// Position in taxonomy order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<EmotionLabel> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for EmotionLabel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|label| label.code() == s)
            .ok_or_else(|| ModelError::UnknownEmotion(s.to_string()))
    }
}

/// A non-empty set of emotion labels in which `na` only ever appears alone.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<EmotionLabel>", into = "Vec<EmotionLabel>")]
pub struct LabelSet(u16);

impl LabelSet {
    pub fn new<I: IntoIterator<Item = EmotionLabel>>(labels: I) -> Result<Self, ModelError> {
        let bits = labels
            .into_iter()
            .fold(0u16, |acc, label| acc | (1 << label.index()));
        Self::from_bits(bits)
    }

    fn from_bits(bits: u16) -> Result<Self, ModelError> {
        let na = 1u16 << EmotionLabel::Na.index();
        if bits == 0 {
            Err(ModelError::EmptyLabelSet)
        } else if bits & na != 0 && bits != na {
            Err(ModelError::NaNotAlone)
        } else {
            Ok(LabelSet(bits))
        }
    }

    pub fn single(label: EmotionLabel) -> Self {
        LabelSet(1 << label.index())
    }

    /// Parses a semicolon-separated list of codes, e.g. `anger;disappoint`.
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let labels = s
            .split(';')
            .map(str::trim)
            .filter(|token| !token.is_empty())
            .map(EmotionLabel::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(labels)
    }

    pub fn contains(self, label: EmotionLabel) -> bool {
        self.0 & (1 << label.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersects(self, other: LabelSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn iter(self) -> impl Iterator<Item = EmotionLabel> {
        EmotionLabel::ALL
            .into_iter()
            .filter(move |label| self.contains(*label))
    }

    /// Semicolon-joined codes in taxonomy order.
    pub fn to_codes(self) -> String {
        self.iter().map(EmotionLabel::code).collect::<Vec<_>>().join(";")
    }
}

impl fmt::Debug for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.to_codes())
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_codes())
    }
}

impl TryFrom<Vec<EmotionLabel>> for LabelSet {
    type Error = ModelError;

    fn try_from(labels: Vec<EmotionLabel>) -> Result<Self, Self::Error> {
        LabelSet::new(labels)
    }
}

impl From<LabelSet> for Vec<EmotionLabel> {
    fn from(set: LabelSet) -> Self {
        set.iter().collect()
    }
}

/// Theory-driven grouping of emotion codes into classification targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryScheme {
    Valence,
    Resiliency,
    Attribution,
}

impl CategoryScheme {
    pub const ALL: [CategoryScheme; 3] = [
        CategoryScheme::Valence,
        CategoryScheme::Resiliency,
        CategoryScheme::Attribution,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CategoryScheme::Valence => "valence",
            CategoryScheme::Resiliency => "resiliency",
            CategoryScheme::Attribution => "attribution",
        }
    }

    /// Category code for `label`, or `None` when the label is excluded.
    pub fn category(self, label: EmotionLabel) -> Option<&'static str> {
        use EmotionLabel::*;
        match self {
            CategoryScheme::Valence => match label {
                Anger | Disappoint | Sorrow | Fear | Worry => Some("negative"),
                HappinessSatisfied | Hope | EmpathySympathy | Grateful => Some("positive"),
                Surprise | Sarcasm => Some("neutral"),
                Na => None,
            },
            CategoryScheme::Resiliency => match label {
                Hope | HappinessSatisfied => Some("individual"),
                EmpathySympathy | Grateful => Some("collective"),
                _ => None,
            },
            CategoryScheme::Attribution => match label {
                Fear | EmpathySympathy | Worry => Some("independent"),
                Anger | Sorrow | Disappoint => Some("dependent"),
                _ => None,
            },
        }
    }
}

impl FromStr for CategoryScheme {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|scheme| scheme.id() == s)
            .ok_or_else(|| ModelError::UnknownScheme(s.to_string()))
    }
}

/// Reduces a label set to one category: excluded labels are dropped, the
/// category holding most of the remaining labels wins and ties go to the
/// lexicographically smallest category code.
pub fn map_to_category(labels: LabelSet, scheme: CategoryScheme) -> Option<&'static str> {
    let mut counts: Vec<(&'static str, usize)> = Vec::new();
    for category in labels.iter().filter_map(|label| scheme.category(label)) {
        match counts.iter_mut().find(|(code, _)| *code == category) {
            Some((_, n)) => *n += 1,
            None => counts.push((category, 1)),
        }
    }
    counts
        .into_iter()
        .max_by(|(ca, na), (cb, nb)| na.cmp(nb).then_with(|| cb.cmp(ca)))
        .map(|(code, _)| code)
}

/// One corpus entry. Items carrying `gold_labels` form the gold pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_labels: Option<LabelSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl Item {
    pub fn payload(item_id: impl Into<String>, text: impl Into<String>) -> Self {
        Item {
            item_id: item_id.into(),
            text: text.into(),
            gold_labels: None,
            target: None,
            hint: None,
        }
    }

    pub fn gold(item_id: impl Into<String>, text: impl Into<String>, gold: LabelSet) -> Self {
        Item {
            gold_labels: Some(gold),
            ..Item::payload(item_id, text)
        }
    }
}

/// One worker's answer for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub worker_id: String,
    pub item_id: String,
    pub labels: LabelSet,
    pub assignment_id: String,
    /// Sequence number of the event that recorded the vote.
    pub timestamp: u64,
    /// True when the item is an embedded gold question.
    pub gold: bool,
}

/// How a submitted label set is judged against a gold label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GoldRule {
    /// Correct when the answer shares at least one label with the gold set.
    #[default]
    Overlap,
    /// Correct only on set equality.
    Exact,
}

impl GoldRule {
    pub fn is_correct(self, answer: LabelSet, gold: LabelSet) -> bool {
        match self {
            GoldRule::Overlap => answer.intersects(gold),
            GoldRule::Exact => answer == gold,
        }
    }
}

impl FromStr for GoldRule {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overlap" => Ok(GoldRule::Overlap),
            "exact" => Ok(GoldRule::Exact),
            other => Err(ModelError::InvalidConfig(format!("unknown gold rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub payload_size: usize,
    pub gold_per_assignment: usize,
    pub target_votes: usize,
    pub qualification_pass: f64,
    pub min_cumulative: f64,
    pub warning_threshold: f64,
    pub min_assignments_for_analysis: usize,
    pub weight_a: f64,
    pub weight_b: f64,
    pub weight_c: f64,
    pub gold_rule: GoldRule,
    pub tie_break: TieBreak,
    /// When false, warnings and disqualifications are never issued.
    pub monitoring: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            payload_size: 20,
            gold_per_assignment: 5,
            target_votes: 5,
            qualification_pass: 0.40,
            min_cumulative: 0.60,
            warning_threshold: 0.40,
            min_assignments_for_analysis: 5,
            weight_a: 0.3,
            weight_b: 2.0,
            weight_c: 2.0,
            gold_rule: GoldRule::Overlap,
            tie_break: TieBreak::Lexicographic,
            monitoring: true,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let thresholds = [
            ("qualification_pass", self.qualification_pass),
            ("min_cumulative", self.min_cumulative),
            ("warning_threshold", self.warning_threshold),
        ];
        for (name, value) in thresholds {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::InvalidConfig(format!("{name} must lie in [0,1], got {value}")));
            }
        }
        if self.gold_per_assignment < 1 || self.payload_size < self.gold_per_assignment {
            return Err(ModelError::InvalidConfig(
                "payload_size >= gold_per_assignment >= 1 is required".into(),
            ));
        }
        if self.target_votes < 1 {
            return Err(ModelError::InvalidConfig("target_votes must be at least 1".into()));
        }
        if self.weight_a <= -1.0 || self.weight_b == 0.0 || self.weight_c == 0.0 {
            return Err(ModelError::InvalidConfig("weights need a > -1, b != 0, c != 0".into()));
        }
        Ok(())
    }

    /// Number of positions in one assignment.
    pub fn assignment_size(&self) -> usize {
        self.payload_size + self.gold_per_assignment
    }
}
