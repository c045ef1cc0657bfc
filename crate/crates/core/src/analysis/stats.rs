//! Rank correlation and two-sample tests. No p-values: reports carry the
//! statistic and degrees of freedom.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum StatsError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Degenerate("a sample is constant".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatsError::TooShort {
            needed: 3,
            got: xs.len(),
        });
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Cohen's d with the pooled standard deviation.
    pub d: f64,
}

/// Welch's t for `mean(a) - mean(b)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooShort {
                needed: 2,
                got: s.len(),
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a), variance(b));
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::Degenerate("both samples have zero variance".into()));
    }
    let diff = mean(a) - mean(b);
    let (qa, qb) = (va / na, vb / nb);
    let t = diff / (qa + qb).sqrt();
    let df = (qa + qb).powi(2) / (qa.powi(2) / (na - 1.0) + qb.powi(2) / (nb - 1.0));
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    Ok(WelchResult {
        t,
        df,
        d: diff / pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn perfect_correlations() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap(), -1.0);
    }

    #[test]
    fn tied_example_matches_hand_value() {
        // ranks x: 1, 2.5, 2.5, 4; ranks y: 1, 3, 2, 4.
        // Centered: x = -1.5, 0, 0, 1.5; y = -1.5, 0.5, -0.5, 1.5.
        // sxy = 4.5, sxx = 4.5, syy = 5 -> rho = 4.5 / sqrt(22.5).
        let rho = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - 4.5 / 22.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_input_is_degenerate() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::Degenerate(_))
        ));
    }

    #[test]
    fn welch_identical_samples() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.t, r.d), (0.0, 0.0));
    }

    #[test]
    fn welch_zero_variances() {
        assert!(matches!(
            welch_t(&[0.0; 4], &[1.0; 4]),
            Err(StatsError::Degenerate(_))
        ));
    }

    #[test]
    fn welch_shifted_samples() {
        // Both variances 5/3, n = 4: se = sqrt(5/6), t = -1 / se.
        // df = (5/6)^2 / (2 * (5/12)^2 / 3) = 6. Pooled sd = sqrt(5/3).
        let r = welch_t(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((r.t + 1.0 / (5.0f64 / 6.0).sqrt()).abs() < 1e-12);
        assert!((r.df - 6.0).abs() < 1e-12);
        assert!((r.d + 1.0 / (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
