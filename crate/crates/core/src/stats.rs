//! Estimators and goodness-of-fit tests shared by the geometry checks and
//! the experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Per-outcome tallies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn zeros(n: usize) -> Self {
        Self { counts: vec![0; n], total: 0 }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    #[inline]
    pub fn record(&mut self, k: usize) {
        self.counts[k] += 1;
        self.total += 1;
    }

    /// Adds another table's counts. Panics if the lengths differ.
    pub fn merge(&mut self, other: &FrequencyTable) {
        assert_eq!(self.counts.len(), other.counts.len());
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.total += other.total;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `counts / total`; all zeros for an empty table.
    pub fn frequencies(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

pub fn normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, total: u64, confidence: f64) -> Result<(f64, f64)> {
    if total == 0 {
        return Err(Error::InvalidCount("total must be at least 1".into()));
    }
    if successes > total {
        return Err(Error::InvalidCount(format!("{successes} successes out of {total}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidCount(format!("confidence {confidence} outside (0, 1)")));
    }
    let z = normal_quantile(1.0 - (1.0 - confidence) / 2.0);
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Pin the boundaries: at p = 0 (or 1) the bound is 0 (or 1) analytically.
    let low = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if successes == total { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((low, high))
}

/// Result of a Pearson chi-square test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Upper tail of the chi-square distribution by the Wilson-Hilferty
/// cube-root normal approximation.
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    let k = dof as f64;
    let v = 2.0 / (9.0 * k);
    let z = ((statistic / k).cbrt() - (1.0 - v)) / v.sqrt();
    (1.0 - normal_cdf(z)).clamp(0.0, 1.0)
}

/// Pearson's statistic `sum (o - e)^2 / e` with `bins - 1` degrees of freedom.
pub fn chi_square(counts: &[u64], expected: &[f64]) -> Result<ChiSquare> {
    if counts.len() != expected.len() {
        return Err(Error::DimensionMismatch { expected: expected.len(), actual: counts.len() });
    }
    if counts.len() < 2 {
        return Err(Error::InvalidCount("chi-square needs at least 2 bins".into()));
    }
    if let Some(i) = expected.iter().position(|&e| e.is_nan() || e <= 0.0) {
        return Err(Error::ZeroExpected(i));
    }
    let statistic = counts
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dof = counts.len() - 1;
    Ok(ChiSquare { statistic, dof, p_value: chi_square_sf(statistic, dof) })
}

/// Two-sided Kolmogorov-Smirnov statistic of sorted `samples` against `cdf`.
///
/// `cdf` must be monotone; this is not checked.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    debug_assert!(samples.windows(2).all(|w| w[0] <= w[1]), "samples must be sorted");
    let m = samples.len() as f64;
    let d = samples.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / m - f;
        let below = f - i as f64 / m;
        d.max(above).max(below)
    });
    Ok(d.clamp(0.0, 1.0))
}

/// Critical value of the KS statistic for `m` samples at significance
/// `alpha`, from the asymptotic table with Stephens' finite-size correction.
/// Only the tabulated levels 0.10, 0.05, 0.01 and 0.001 are available.
pub fn ks_critical_value(m: usize, alpha: f64) -> Option<f64> {
    const TABLE: [(f64, f64); 4] = [(0.10, 1.224), (0.05, 1.358), (0.01, 1.628), (0.001, 1.949)];
    let (_, c) = TABLE.iter().find(|(a, _)| (a - alpha).abs() < 1e-12)?;
    if m == 0 {
        return None;
    }
    let s = (m as f64).sqrt();
    Some(c / (s + 0.12 + 0.11 / s))
}

/// Total variation distance `(1/2) sum |p_i - q_i|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), actual: q.len() });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);

        // Closed form with z = 1.959964: center 0.5, halfwidth
        // z * sqrt(0.25/100 + z^2/40000) / (1 + z^2/100) = 0.096170.
        let (lo, hi) = wilson_interval(50, 100, 0.95).unwrap();
        assert_abs_diff_eq!((lo + hi) / 2.0, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!((hi - lo) / 2.0, 0.096170, epsilon = 1e-5);

        let (lo, hi) = wilson_interval(100, 100, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo < 1.0);

        assert!(wilson_interval(5, 4, 0.95).is_err());
        assert!(wilson_interval(0, 0, 0.95).is_err());
        assert!(wilson_interval(1, 4, 1.0).is_err());
    }

    #[test]
    fn wilson_width_shrinks_as_inverse_sqrt() {
        let widths: Vec<f64> = [100u64, 10_000, 1_000_000]
            .iter()
            .map(|&n| {
                let (lo, hi) = wilson_interval(3 * n / 10, n, 0.95).unwrap();
                hi - lo
            })
            .collect();
        // Each 100-fold increase in the total shrinks the width about 10-fold.
        assert!((widths[0] / widths[1] - 10.0).abs() < 0.3, "{widths:?}");
        assert!((widths[1] / widths[2] - 10.0).abs() < 0.01, "{widths:?}");
    }

    #[test]
    fn chi_square_examples() {
        let r = chi_square(&[50, 50], &[50.0, 50.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        let r = chi_square(&[60, 40], &[50.0, 50.0]).unwrap();
        assert_abs_diff_eq!(r.statistic, 4.0, epsilon = 1e-12);
        assert_eq!(r.dof, 1);

        assert!(matches!(chi_square(&[1, 2, 3], &[2.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(chi_square(&[1, 2], &[3.0, 0.0]), Err(Error::ZeroExpected(1)));
    }

    #[test]
    fn wilson_hilferty_tracks_exact_tail() {
        use statrs::distribution::ChiSquared;
        for dof in [3usize, 5, 10, 49, 100] {
            let exact = ChiSquared::new(dof as f64).unwrap();
            for q in [0.5, 0.9, 0.99, 0.999] {
                let x = exact.inverse_cdf(q);
                let approx = chi_square_sf(x, dof);
                assert!((approx - (1.0 - q)).abs() < 0.01 / dof as f64, "dof {dof} q {q}: {approx}");
            }
        }
    }

    #[test]
    fn ks_examples() {
        let m = 20;
        let xs: Vec<f64> = (1..=m).map(|i| i as f64 / (m + 1) as f64).collect();
        let d = ks_statistic(&xs, |x| x).unwrap();
        assert!(d <= 1.0 / m as f64);

        assert_abs_diff_eq!(ks_statistic(&[0.5], |x| x).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(ks_statistic(&[], |x| x), Err(Error::EmptySample));
    }

    #[test]
    fn ks_critical_values() {
        let c = ks_critical_value(100_000, 0.001).unwrap();
        assert_abs_diff_eq!(c, 1.949 / 100_000f64.sqrt(), epsilon = 1e-5);
        assert!(ks_critical_value(100, 0.02).is_none());
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(total_variation(&[0.5, 0.3, 0.2], &[0.3, 0.5, 0.2]).unwrap(), 0.2, epsilon = 1e-15);
        assert!(total_variation(&[1.0, 0.0], &[0.2, 0.3, 0.5]).is_err());
    }

    #[test]
    fn frequency_tables() {
        let mut a = FrequencyTable::zeros(3);
        a.record(0);
        a.record(2);
        a.record(2);
        let b = FrequencyTable::from_counts(vec![1, 1, 0]);
        a.merge(&b);
        assert_eq!(a.counts(), &[2, 1, 2]);
        assert_eq!(a.total(), 5);
        assert_eq!(a.frequencies(), vec![0.4, 0.2, 0.4]);
        assert_eq!(FrequencyTable::zeros(2).frequencies(), vec![0.0, 0.0]);
    }

    #[test]
    fn slope_of_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| -0.5 * x + 3.0).collect();
        assert_abs_diff_eq!(ols_slope(&xs, &ys).unwrap(), -0.5, epsilon = 1e-12);
        assert!(ols_slope(&[1.0], &[1.0]).is_none());
    }
}
