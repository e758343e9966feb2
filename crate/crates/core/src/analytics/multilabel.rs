use crate::model::{EmotionLabel, LabelSet, Vote};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Rate {
    pub hits: usize,
    pub total: usize,
}

impl Rate {
    pub fn value(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultilabelReport {
    pub n_votes: usize,
    pub single_label_fraction: f64,
    /// Per-vote true positive rate on gold items with exactly one emotion.
    pub tpr_single: BTreeMap<EmotionLabel, Rate>,
    /// Per-vote true positive rate on gold items with several emotions.
    pub tpr_multi: BTreeMap<EmotionLabel, Rate>,
}

/// Share of single-label answers and per-emotion true positive rates,
/// stratified by whether the gold item carries one or several emotions.
pub fn multilabel_report<'a, I>(votes: I, gold: &BTreeMap<String, LabelSet>) -> MultilabelReport
where
    I: IntoIterator<Item = &'a Vote>,
{
    let mut n_votes = 0;
    let mut single = 0;
    let mut tpr_single: BTreeMap<EmotionLabel, Rate> = BTreeMap::new();
    let mut tpr_multi: BTreeMap<EmotionLabel, Rate> = BTreeMap::new();
    for vote in votes {
        n_votes += 1;
        if vote.labels.len() == 1 {
            single += 1;
        }
        let Some(gold_set) = gold.get(&vote.item_id) else { continue };
        let stratum = if gold_set.len() == 1 { &mut tpr_single } else { &mut tpr_multi };
        for e in gold_set.iter() {
            let rate = stratum.entry(e).or_default();
            rate.total += 1;
            if vote.labels.contains(e) {
                rate.hits += 1;
            }
        }
    }
    MultilabelReport {
        n_votes,
        single_label_fraction: if n_votes == 0 { 0.0 } else { single as f64 / n_votes as f64 },
        tpr_single,
        tpr_multi,
    }
}
