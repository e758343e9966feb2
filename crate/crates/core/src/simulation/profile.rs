use super::SimulationError;
use crate::model::{EmotionLabel, LabelSet, EMOTION_COUNT};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Row-stochastic matrix: row `g` is the distribution of wrong answers given
/// gold emotion `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionBias {
    rows: Vec<[f64; EMOTION_COUNT]>,
}

impl ConfusionBias {
    pub fn new(rows: Vec<[f64; EMOTION_COUNT]>) -> Result<Self, SimulationError> {
        if rows.len() != EMOTION_COUNT {
            return Err(SimulationError::InvalidConfig(format!("bias matrix needs {EMOTION_COUNT} rows")));
        }
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(SimulationError::InvalidConfig(format!("bias row {i} is not a distribution")));
            }
        }
        Ok(ConfusionBias { rows })
    }

    /// Wrong answers stay inside `support`: row `g` is uniform over the
    /// other members of `support` (or the other 11 codes when `g` is outside
    /// it or the support has a single member).
    pub fn within(support: &[EmotionLabel]) -> Self {
        let rows = EmotionLabel::ALL
            .iter()
            .map(|g| {
                let others: Vec<EmotionLabel> = support.iter().copied().filter(|e| e != g).collect();
                let mut row = [0.0; EMOTION_COUNT];
                if support.contains(g) && !others.is_empty() {
                    for e in &others {
                        row[e.index()] = 1.0 / others.len() as f64;
                    }
                } else {
                    for e in EmotionLabel::ALL.iter().filter(|e| *e != g) {
                        row[e.index()] = 1.0 / (EMOTION_COUNT - 1) as f64;
                    }
                }
                row
            })
            .collect();
        ConfusionBias { rows }
    }

    fn sample<R: Rng + ?Sized>(&self, gold: EmotionLabel, rng: &mut R) -> EmotionLabel {
        let row = &self.rows[gold.index()];
        let mut u: f64 = rng.random();
        for (i, p) in row.iter().enumerate() {
            if u < *p {
                return EmotionLabel::ALL[i];
            }
            u -= p;
        }
        // rounding residue: fall back to the last label with mass
        let last = row.iter().rposition(|p| *p > 0.0).unwrap_or(0);
        EmotionLabel::ALL[last]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimWorkerProfile {
    /// Probability of answering within the gold set at full effort.
    pub base_accuracy: f64,
    pub confusion_bias: Option<ConfusionBias>,
    /// Current effort in [0,1]; multiplies `base_accuracy`.
    pub effort: f64,
    /// Effort lost per completed assignment.
    pub fatigue_decay: f64,
    /// Effort regained when a warning is received.
    pub feedback_recovery: f64,
    /// Probability of reporting a single label for a multi-label item.
    pub corner_cut: f64,
    pub seed: u64,
}

impl SimWorkerProfile {
    pub fn new(base_accuracy: f64) -> Self {
        SimWorkerProfile {
            base_accuracy,
            confusion_bias: None,
            effort: 1.0,
            fatigue_decay: 0.0,
            feedback_recovery: 0.0,
            corner_cut: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let unit = [("p", self.base_accuracy), ("effort", self.effort), ("q", self.corner_cut)];
        if let Some((name, v)) = unit.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
            return Err(SimulationError::InvalidConfig(format!("{name} = {v} outside [0,1]")));
        }
        if self.fatigue_decay < 0.0 || self.feedback_recovery < 0.0 {
            return Err(SimulationError::InvalidConfig("delta and r must be non-negative".into()));
        }
        Ok(())
    }
}

/// Draws one answer: within the gold set with probability `p·effort` (the
/// full set, or one member with probability `q`), otherwise a single wrong
/// label from the bias row of a uniformly chosen gold member.
pub fn sample_answer<R: Rng + ?Sized>(profile: &SimWorkerProfile, gold: LabelSet, rng: &mut R) -> LabelSet {
    let members: Vec<EmotionLabel> = gold.iter().collect();
    let p = (profile.base_accuracy * profile.effort).clamp(0.0, 1.0);
    if rng.random::<f64>() < p {
        if members.len() > 1 && rng.random::<f64>() < profile.corner_cut {
            LabelSet::single(*members.choose(rng).expect("gold set is non-empty"))
        } else {
            gold
        }
    } else {
        let anchor = *members.choose(rng).expect("gold set is non-empty");
        let wrong = match &profile.confusion_bias {
            Some(bias) => bias.sample(anchor, rng),
            None => {
                let others: Vec<EmotionLabel> = EmotionLabel::ALL.into_iter().filter(|e| *e != anchor).collect();
                *others.choose(rng).expect("eleven alternatives")
            }
        };
        LabelSet::single(wrong)
    }
}

/// Effort after one completed assignment.
pub fn step_effort(profile: &SimWorkerProfile, warning_received: bool) -> f64 {
    let recovery = if warning_received { profile.feedback_recovery } else { 0.0 };
    (profile.effort - profile.fatigue_decay + recovery).clamp(0.0, 1.0)
}
