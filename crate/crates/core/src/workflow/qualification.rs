use super::{Qualification, WorkflowError, SCORE_EPS};
use crate::model::{LabelSet, SystemConfig};
use serde::{Deserialize, Serialize};

pub const TRAINING_QUESTIONS: usize = 5;
pub const TEST_QUESTIONS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingState {
    Unanswered,
    Retrying,
    Passed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingQuestion {
    pub item_id: String,
    pub gold: LabelSet,
    pub hint: String,
    pub state: TrainingState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestQuestion {
    pub item_id: String,
    pub gold: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum TrainingOutcome {
    Correct { next: Option<usize> },
    IncorrectWithHint { hint: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualificationGrade {
    pub score: f64,
    pub correct: usize,
    pub status: Qualification,
}

/// Training questions unlock one at a time; the test is graded once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationSession {
    pub training: Vec<TrainingQuestion>,
    pub test: Vec<TestQuestion>,
    pub grade: Option<QualificationGrade>,
}

impl QualificationSession {
    pub fn new(training: Vec<TrainingQuestion>, test: Vec<TestQuestion>) -> Self {
        QualificationSession { training, test, grade: None }
    }

    /// Lowest-index question not yet passed.
    pub fn next_training(&self) -> Option<usize> {
        self.training.iter().position(|q| q.state != TrainingState::Passed)
    }

    pub fn training_complete(&self) -> bool {
        self.next_training().is_none()
    }

    /// Judges an answer without changing state.
    pub fn check_training_answer(
        &self,
        question: usize,
        answer: LabelSet,
        config: &SystemConfig,
    ) -> Result<bool, WorkflowError> {
        let q = self.training.get(question).ok_or(WorkflowError::NoSuchQuestion(question))?;
        match self.next_training() {
            Some(next) if next == question => Ok(config.gold_rule.is_correct(answer, q.gold)),
            Some(next) => Err(WorkflowError::LockedQuestion { question, next }),
            // Every question is passed; nothing is left unlocked.
            None => Err(WorkflowError::LockedQuestion { question, next: self.training.len() }),
        }
    }

    pub(crate) fn record_training(&mut self, question: usize, correct: bool) -> TrainingOutcome {
        let q = &mut self.training[question];
        if correct {
            q.state = TrainingState::Passed;
            TrainingOutcome::Correct { next: self.next_training() }
        } else {
            q.state = TrainingState::Retrying;
            TrainingOutcome::IncorrectWithHint { hint: q.hint.clone() }
        }
    }

    pub fn verify_training_answer(
        &mut self,
        question: usize,
        answer: LabelSet,
        config: &SystemConfig,
    ) -> Result<TrainingOutcome, WorkflowError> {
        let correct = self.check_training_answer(question, answer, config)?;
        Ok(self.record_training(question, correct))
    }

    pub fn test_gold(&self) -> Vec<LabelSet> {
        self.test.iter().map(|q| q.gold).collect()
    }
}

/// Scores the 15-question test; qualified iff score >= `qualification_pass`.
pub fn grade_qualification(
    answers: &[LabelSet],
    gold: &[LabelSet],
    config: &SystemConfig,
) -> Result<QualificationGrade, WorkflowError> {
    if answers.len() != TEST_QUESTIONS {
        return Err(WorkflowError::AnswerCount { expected: TEST_QUESTIONS, got: answers.len() });
    }
    if gold.len() != TEST_QUESTIONS {
        return Err(WorkflowError::AnswerCount { expected: TEST_QUESTIONS, got: gold.len() });
    }
    let correct = answers
        .iter()
        .zip(gold)
        .filter(|(answer, gold)| config.gold_rule.is_correct(**answer, **gold))
        .count();
    let score = correct as f64 / TEST_QUESTIONS as f64;
    let status = if score >= config.qualification_pass - SCORE_EPS {
        Qualification::Qualified
    } else {
        Qualification::Failed
    };
    Ok(QualificationGrade { score, correct, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EmotionLabel::*;

    fn answers(correct: usize) -> (Vec<LabelSet>, Vec<LabelSet>) {
        let gold = vec![LabelSet::single(Anger); TEST_QUESTIONS];
        let answers = (0..TEST_QUESTIONS)
            .map(|i| LabelSet::single(if i < correct { Anger } else { Hope }))
            .collect();
        (answers, gold)
    }

    #[test]
    fn boundary_is_inclusive() {
        let config = SystemConfig::default();
        let (a, g) = answers(6);
        let grade = grade_qualification(&a, &g, &config).unwrap();
        assert!((grade.score - 0.4).abs() < 1e-12);
        assert_eq!(grade.status, Qualification::Qualified);

        let (a, g) = answers(15);
        assert_eq!(grade_qualification(&a, &g, &config).unwrap().score, 1.0);

        let (a, g) = answers(5);
        let grade = grade_qualification(&a, &g, &config).unwrap();
        assert_eq!(grade.status, Qualification::Failed);
        assert!((grade.score - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_answer_count() {
        let (a, g) = answers(6);
        let err = grade_qualification(&a[..14], &g, &SystemConfig::default()).unwrap_err();
        assert!(matches!(err, WorkflowError::AnswerCount { expected: 15, got: 14 }));
    }

    fn session() -> QualificationSession {
        let training = (0..TRAINING_QUESTIONS)
            .map(|i| TrainingQuestion {
                item_id: format!("g{i}"),
                gold: LabelSet::single(Sorrow),
                hint: format!("hint {i}"),
                state: TrainingState::Unanswered,
            })
            .collect();
        QualificationSession::new(training, Vec::new())
    }

    #[test]
    fn training_unlocks_in_order_with_retries() {
        let config = SystemConfig::default();
        let mut s = session();
        let right = LabelSet::single(Sorrow);
        let wrong = LabelSet::single(Fear);

        assert!(matches!(
            s.verify_training_answer(1, right, &config),
            Err(WorkflowError::LockedQuestion { question: 1, next: 0 })
        ));
        assert_eq!(
            s.verify_training_answer(0, wrong, &config).unwrap(),
            TrainingOutcome::IncorrectWithHint { hint: "hint 0".into() }
        );
        assert_eq!(s.training[0].state, TrainingState::Retrying);
        assert_eq!(
            s.verify_training_answer(0, right, &config).unwrap(),
            TrainingOutcome::Correct { next: Some(1) }
        );
        for q in 1..TRAINING_QUESTIONS {
            s.verify_training_answer(q, right, &config).unwrap();
        }
        assert!(s.training_complete());
        assert!(s.verify_training_answer(4, right, &config).is_err());
    }
}
