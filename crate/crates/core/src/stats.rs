//! Small statistical helpers for trace analysis.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_err: f64,
    /// Residual degrees of freedom, `len - 2`.
    pub df: f64,
}

impl SlopeFit {
    /// Two-sided `level` confidence interval for the slope.
    pub fn ci(&self, level: f64) -> (f64, f64) {
        let h = t_quantile(self.df, 0.5 + level / 2.0) * self.std_err;
        (self.slope - h, self.slope + h)
    }
}

fn t_quantile(df: f64, q: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(q)
}

/// Ordinary least squares fit of `ys` on `xs`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(SimError::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let n = xs.len();
    if n < 3 {
        return Err(SimError::UndefinedMetric("a slope standard error needs at least three points".into()));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(SimError::UndefinedMetric("regressor has zero variance".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let df = (n - 2) as f64;
    Ok(SlopeFit { slope, intercept, std_err: (sse / df / sxx).sqrt(), df })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Student-t confidence interval for the mean of `xs`.
pub fn mean_ci(xs: &[f64], level: f64) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(SimError::UndefinedMetric("an interval needs at least two points".into()));
    }
    let h = t_quantile(xs.len() as f64 - 1.0, 0.5 + level / 2.0) * sample_std(xs) / (xs.len() as f64).sqrt();
    let m = mean(xs);
    Ok((m - h, m + h))
}

/// Two-sided exact sign test on paired differences; zeros are dropped.
/// Returns `(positives, negatives, p_value)`.
pub fn sign_test(diffs: &[f64]) -> (u64, u64, f64) {
    let pos = diffs.iter().filter(|d| **d > 0.0).count() as u64;
    let neg = diffs.iter().filter(|d| **d < 0.0).count() as u64;
    let n = pos + neg;
    if n == 0 {
        return (0, 0, 1.0);
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    let tail = b.cdf(pos.min(neg));
    (pos, neg, (2.0 * tail).min(1.0))
}

/// One-sided exact sign test that the differences are positive.
pub fn sign_test_greater(diffs: &[f64]) -> f64 {
    let (pos, neg, _) = sign_test(diffs);
    let n = pos + neg;
    if n == 0 {
        return 1.0;
    }
    // P(X >= pos) under Binomial(n, 1/2)
    let b = Binomial::new(0.5, n).expect("valid binomial");
    if pos == 0 { 1.0 } else { 1.0 - b.cdf(pos - 1) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ols_recovers_a_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let fit = ols(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 2.0, epsilon = 1e-12);
        assert!(fit.std_err < 1e-12);
    }

    #[test]
    fn ols_standard_error_matches_hand_computation() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 3.0, 2.0, 4.0];
        let fit = ols(&xs, &ys).unwrap();
        // slope 0.8, residuals (-0.2, 1.0, -0.8, 0.4), sse 1.8, sxx 5
        assert_relative_eq!(fit.slope, 0.8, epsilon = 1e-12);
        assert_relative_eq!(fit.std_err, (1.8f64 / 2.0 / 5.0).sqrt(), epsilon = 1e-12);
        let (lo, hi) = fit.ci(0.95);
        // t_{0.975, 2} = 4.302653
        assert_relative_eq!(hi - fit.slope, 4.302653 * fit.std_err, epsilon = 1e-5);
        assert!(lo < 0.0);
    }

    #[test]
    fn sign_test_tails() {
        let all_pos = vec![1.0; 20];
        let (p, n, pv) = sign_test(&all_pos);
        assert_eq!((p, n), (20, 0));
        assert_relative_eq!(pv, 2.0 * 0.5f64.powi(20), epsilon = 1e-15);
        assert_relative_eq!(sign_test_greater(&all_pos), 0.5f64.powi(20), epsilon = 1e-15);
        // five pairs can never reach 0.05 two-sided
        assert_relative_eq!(sign_test(&[1.0; 5]).2, 0.0625, epsilon = 1e-15);
        assert_eq!(sign_test(&[0.0, 0.0]).2, 1.0);
        let mixed = [1.0, -1.0, 1.0, -1.0];
        assert_relative_eq!(sign_test(&mixed).2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_ci_contains_mean() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (lo, hi) = mean_ci(&xs, 0.95).unwrap();
        assert!(lo < 3.0 && hi > 3.0);
        assert_relative_eq!((hi - lo) / 2.0, 2.776445 * sample_std(&xs) / 5f64.sqrt(), epsilon = 1e-5);
    }
}
