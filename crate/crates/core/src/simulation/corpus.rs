use super::SimulationError;
use crate::model::{EmotionLabel, Item, LabelSet, SystemConfig};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_items: usize,
    pub gold_pool_size: usize,
    /// Relative frequency of each primary emotion.
    pub label_weights: Vec<(EmotionLabel, f64)>,
    /// Fraction of items with a second emotion.
    pub multi_label_fraction: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        use EmotionLabel::*;
        // primary-label frequencies of an angry-tweet corpus
        let label_weights = vec![
            (Anger, 2550.0),
            (Disappoint, 1337.0),
            (Sorrow, 1168.0),
            (Fear, 204.0),
            (Worry, 261.0),
            (HappinessSatisfied, 699.0),
            (Hope, 675.0),
            (EmpathySympathy, 305.0),
            (Grateful, 852.0),
            (Surprise, 436.0),
            (Sarcasm, 725.0),
            (Na, 75.0),
        ];
        CorpusSpec { n_items: 1000, gold_pool_size: 60, label_weights, multi_label_fraction: 0.4 }
    }
}

impl CorpusSpec {
    pub fn validate(&self, config: &SystemConfig) -> Result<(), SimulationError> {
        let invalid = |msg: String| Err(SimulationError::InvalidConfig(msg));
        if self.n_items < config.payload_size {
            return invalid(format!("n_items {} < payload_size {}", self.n_items, config.payload_size));
        }
        let needed = config.gold_per_assignment.max(20);
        if self.gold_pool_size < needed {
            return invalid(format!("gold_pool_size {} < {needed}", self.gold_pool_size));
        }
        if self.label_weights.is_empty() || self.label_weights.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
            return invalid("label weights must be finite and non-negative".into());
        }
        if self.label_weights.iter().all(|(_, w)| *w == 0.0) {
            return invalid("label weights sum to zero".into());
        }
        if !(0.0..=1.0).contains(&self.multi_label_fraction) {
            return invalid(format!("multi_label_fraction {} outside [0,1]", self.multi_label_fraction));
        }
        Ok(())
    }

    pub fn support(&self) -> Vec<EmotionLabel> {
        self.label_weights.iter().filter(|(_, w)| *w > 0.0).map(|(e, _)| *e).collect()
    }

    /// Draws the gold pool and the payload items. Payload truth is kept apart
    /// from the items handed to the engine.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SimCorpus, SimulationError> {
        let labels: Vec<EmotionLabel> = self.label_weights.iter().map(|(e, _)| *e).collect();
        let dist = WeightedIndex::new(self.label_weights.iter().map(|(_, w)| *w))
            .map_err(|e| SimulationError::InvalidConfig(format!("label weights: {e}")))?;
        let draw = |rng: &mut R| -> LabelSet {
            let primary = labels[dist.sample(rng)];
            if primary == EmotionLabel::Na || rng.random::<f64>() >= self.multi_label_fraction {
                return LabelSet::single(primary);
            }
            let second: Vec<(EmotionLabel, f64)> = self
                .label_weights
                .iter()
                .copied()
                .filter(|(e, w)| *e != primary && *e != EmotionLabel::Na && *w > 0.0)
                .collect();
            match WeightedIndex::new(second.iter().map(|(_, w)| *w)) {
                Ok(d) => LabelSet::new([primary, second[d.sample(rng)].0]).expect("two distinct codes"),
                Err(_) => LabelSet::single(primary),
            }
        };

        let gold = (0..self.gold_pool_size)
            .map(|i| {
                let labels = draw(rng);
                Item::gold(format!("g{i:05}"), format!("simulated gold text {i}"), labels)
            })
            .collect();
        let mut payload = Vec::with_capacity(self.n_items);
        let mut truth = BTreeMap::new();
        for i in 0..self.n_items {
            let id = format!("t{i:05}");
            truth.insert(id.clone(), draw(rng));
            payload.push(Item::payload(id, format!("simulated text {i}")));
        }
        Ok(SimCorpus { gold, payload, truth })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimCorpus {
    pub gold: Vec<Item>,
    pub payload: Vec<Item>,
    /// Simulated ground truth of the payload items.
    pub truth: BTreeMap<String, LabelSet>,
}

impl SimCorpus {
    pub fn items(&self) -> Vec<Item> {
        self.gold.iter().chain(&self.payload).cloned().collect()
    }
}
