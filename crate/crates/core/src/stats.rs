//! Summary statistics for Monte Carlo trials.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Mean, unbiased variance and the standard error of that variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub stderr_mean: f64,
    /// Standard error of `variance`, from the fourth central moment.
    pub stderr_variance: f64,
}

impl VarianceSummary {
    pub fn from_samples(xs: &[f64]) -> Self {
        let count = xs.len();
        assert!(count >= 2, "need at least two samples");
        let n = count as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let (m2, m4) = xs.iter().fold((0.0, 0.0), |(m2, m4), &x| {
            let d = (x - mean) * (x - mean);
            (m2 + d, m4 + d * d)
        });
        let variance = m2 / (n - 1.0);
        let mu2 = m2 / n;
        let mu4 = m4 / n;
        // Var(s^2) = (mu4 - sigma^4 (n - 3) / (n - 1)) / n
        let var_of_var = ((mu4 - mu2 * mu2 * (n - 3.0) / (n - 1.0)) / n).max(0.0);
        Self {
            count,
            mean,
            variance,
            stderr_mean: (variance / n).sqrt(),
            stderr_variance: var_of_var.sqrt(),
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median; the mean of the two central values for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Least-squares slope of `y` against `x`.
pub fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Pearson chi-square statistic and p-value against the uniform distribution.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("positive degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_samples_have_zero_variance() {
        let s = VarianceSummary::from_samples(&[1.0; 50]);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.stderr_variance, 0.0);
    }

    #[test]
    fn known_small_sample() {
        let s = VarianceSummary::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn variance_stderr_matches_gaussian_theory() {
        // for N(0,1), Var(s^2) ~ 2 / (n - 1)
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..200_000).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let s = VarianceSummary::from_samples(&xs);
        let theory = (2.0 / (xs.len() as f64 - 1.0)).sqrt();
        assert!((s.stderr_variance / theory - 1.0).abs() < 0.05);
        assert!((s.variance - 1.0).abs() < 4.0 * theory);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[1.0, 2.0, 100.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        assert!((regression_slope(&x, &y) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn chi_square_extremes() {
        let (stat, p) = chi_square_uniform(&[100; 24]);
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        let mut skew = [100u64; 24];
        skew[0] = 400;
        assert!(chi_square_uniform(&skew).1 < 1e-6);
    }
}
