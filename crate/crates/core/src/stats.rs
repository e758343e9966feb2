//! Summary statistics of a worker's assignment score series.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty score series")]
    Empty,
    #[error("score {0} at index {1} outside [0,1]")]
    OutOfRange(f64, usize),
}

/// Mean, sample standard deviation and least-squares trend of a score series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeriesStats {
    pub m: f64,
    pub sigma: f64,
    pub k: f64,
}

/// Computes `m`, `sigma` (n-1 denominator) and the OLS slope `k` of score
/// against assignment index 1..n. A single score has `sigma = k = 0`.
pub fn score_series_stats(scores: &[f64]) -> Result<ScoreSeriesStats, StatsError> {
    if scores.is_empty() {
        return Err(StatsError::Empty);
    }
    if let Some((i, &s)) = scores
        .iter()
        .enumerate()
        .find(|(_, s)| !(0.0..=1.0).contains(*s))
    {
        return Err(StatsError::OutOfRange(s, i));
    }
    let n = scores.len() as f64;
    let m = scores.iter().sum::<f64>() / n;
    if scores.len() == 1 {
        return Ok(ScoreSeriesStats { m, sigma: 0.0, k: 0.0 });
    }
    let ss = scores.iter().map(|s| (s - m).powi(2)).sum::<f64>();
    let sigma = (ss / (n - 1.0)).sqrt();

    let x_mean = (n + 1.0) / 2.0;
    let (sxy, sxx) = scores
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(sxy, sxx), (i, s)| {
            let dx = (i + 1) as f64 - x_mean;
            (sxy + dx * (s - m), sxx + dx * dx)
        });
    Ok(ScoreSeriesStats { m, sigma, k: sxy / sxx })
}
