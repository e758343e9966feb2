use super::AnalyticsError;
use crate::model::{EmotionLabel, LabelSet, Vote, EMOTION_COUNT};
use serde::Serialize;
use std::collections::BTreeMap;

/// Rows are gold emotions, columns answered emotions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; EMOTION_COUNT]; EMOTION_COUNT],
    pub n_votes: usize,
}

impl ConfusionMatrix {
    pub fn count(&self, gold: EmotionLabel, answered: EmotionLabel) -> u64 {
        self.counts[gold.index()][answered.index()]
    }

    pub fn row_total(&self, gold: EmotionLabel) -> u64 {
        self.counts[gold.index()].iter().sum()
    }

    /// Row-normalized view; all-zero rows stay zero.
    pub fn normalized(&self) -> [[f64; EMOTION_COUNT]; EMOTION_COUNT] {
        let mut out = [[0.0; EMOTION_COUNT]; EMOTION_COUNT];
        for (row, counts) in out.iter_mut().zip(&self.counts) {
            let total: u64 = counts.iter().sum();
            if total > 0 {
                for (cell, &c) in row.iter_mut().zip(counts) {
                    *cell = c as f64 / total as f64;
                }
            }
        }
        out
    }
}

/// Counts, for every vote on a gold item, each (gold emotion, answered
/// emotion) pair. With `target`, only items tagged with that target count.
pub fn confusion_matrix<'a, I>(
    votes: I,
    gold: &BTreeMap<String, LabelSet>,
    targets: &BTreeMap<String, String>,
    target: Option<&str>,
) -> Result<ConfusionMatrix, AnalyticsError>
where
    I: IntoIterator<Item = &'a Vote>,
{
    let mut matrix = ConfusionMatrix { counts: [[0; EMOTION_COUNT]; EMOTION_COUNT], n_votes: 0 };
    for vote in votes {
        let Some(gold_set) = gold.get(&vote.item_id) else { continue };
        if let Some(t) = target {
            if targets.get(&vote.item_id).map(String::as_str) != Some(t) {
                continue;
            }
        }
        matrix.n_votes += 1;
        for g in gold_set.iter() {
            for e in vote.labels.iter() {
                matrix.counts[g.index()][e.index()] += 1;
            }
        }
    }
    if matrix.n_votes == 0 {
        return Err(AnalyticsError::EmptySelection);
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionLabel::*;

    fn vote(item: &str, labels: LabelSet) -> Vote {
        Vote {
            worker_id: "w".into(),
            item_id: item.into(),
            labels,
            assignment_id: "a".into(),
            timestamp: 0,
            gold: true,
        }
    }

    #[test]
    fn split_row() {
        let gold = BTreeMap::from([("g1".to_string(), LabelSet::single(Anger))]);
        let votes = [vote("g1", LabelSet::single(Anger)), vote("g1", LabelSet::single(Disappoint))];
        let m = confusion_matrix(&votes, &gold, &BTreeMap::new(), None).unwrap();
        let n = m.normalized();
        assert_eq!(n[Anger.index()][Anger.index()], 0.5);
        assert_eq!(n[Anger.index()][Disappoint.index()], 0.5);
        assert_eq!(m.row_total(Hope), 0);
    }

    #[test]
    fn perfect_answers_are_diagonal() {
        let gold = BTreeMap::from([
            ("g1".to_string(), LabelSet::single(Anger)),
            ("g2".to_string(), LabelSet::single(Hope)),
        ]);
        let votes = [vote("g1", LabelSet::single(Anger)), vote("g2", LabelSet::single(Hope))];
        let n = confusion_matrix(&votes, &gold, &BTreeMap::new(), None).unwrap().normalized();
        for (i, row) in n.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(*cell, 0.0);
                }
            }
        }
        assert_eq!(n[Anger.index()][Anger.index()], 1.0);
    }

    #[test]
    fn target_filter() {
        let gold = BTreeMap::from([("g1".to_string(), LabelSet::single(Anger))]);
        let targets = BTreeMap::from([("g1".to_string(), "government".to_string())]);
        let votes = [vote("g1", LabelSet::single(Anger))];
        assert!(confusion_matrix(&votes, &gold, &targets, Some("government")).is_ok());
        assert_eq!(
            confusion_matrix(&votes, &gold, &targets, Some("residents")),
            Err(AnalyticsError::EmptySelection)
        );
    }
}
