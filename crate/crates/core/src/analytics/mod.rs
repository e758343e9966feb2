//! Consistency between expert-based and majority-vote-based scores,
//! confusion matrices and multi-label statistics.

mod confusion;
mod consistency;
mod multilabel;
mod snapshot;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use consistency::{
    consistency_curve, score_pairs, ConsistencyCurve, ConsistencyCurvePoint, CurveVariant, CurveWarning, ScorePair,
};
pub use multilabel::{multilabel_report, MultilabelReport, Rate};
pub use snapshot::{AnnotationSnapshot, GradedAssignment};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("missing aggregate for item `{0}`")]
    MissingAggregate(String),
    #[error("missing answer for item `{item}` in assignment `{assignment}`")]
    MissingAnswer { assignment: String, item: String },
    #[error("eta {0} outside (0,1]")]
    InvalidEta(f64),
    #[error("empty selection")]
    EmptySelection,
}

fn mean(u: &[f64]) -> f64 {
    u.iter().sum::<f64>() / u.len() as f64
}

/// Pearson correlation coefficient of two equally long vectors.
pub fn pearson(u1: &[f64], u2: &[f64]) -> Result<f64, AnalyticsError> {
    if u1.len() != u2.len() {
        return Err(AnalyticsError::LengthMismatch(u1.len(), u2.len()));
    }
    if u1.len() < 2 {
        return Err(AnalyticsError::TooShort { needed: 2, got: u1.len() });
    }
    let (m1, m2) = (mean(u1), mean(u2));
    let (mut cov, mut v1, mut v2) = (0.0, 0.0, 0.0);
    for (a, b) in u1.iter().zip(u2) {
        let (d1, d2) = (a - m1, b - m2);
        cov += d1 * d2;
        v1 += d1 * d1;
        v2 += d2 * d2;
    }
    if v1 == 0.0 || v2 == 0.0 {
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok((cov / (v1 * v2).sqrt()).clamp(-1.0, 1.0))
}

/// Mean absolute error of two equally long vectors.
pub fn mae(u1: &[f64], u2: &[f64]) -> Result<f64, AnalyticsError> {
    if u1.len() != u2.len() {
        return Err(AnalyticsError::LengthMismatch(u1.len(), u2.len()));
    }
    if u1.is_empty() {
        return Err(AnalyticsError::TooShort { needed: 1, got: 0 });
    }
    Ok(u1.iter().zip(u2).map(|(a, b)| (a - b).abs()).sum::<f64>() / u1.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        let u = [0.2, 0.4, 0.9, 0.1];
        assert!((pearson(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        assert!((pearson(&u, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(AnalyticsError::ZeroVariance));
        assert_eq!(AnalyticsError::ZeroVariance.to_string(), "zero variance");
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(AnalyticsError::LengthMismatch(2, 1)));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).unwrap(), 1.0);
        assert_eq!(mae(&[0.0], &[1.0]).unwrap(), 1.0);
        assert!(mae(&[0.0], &[1.0, 2.0]).is_err());
    }
}
