//! Sample statistics, histograms and the paired t-test.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n - 1 denominator; 0 when n < 2.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub const MIN_BINS: usize = 20;
pub const MAX_BINS: usize = 1000;

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Histogram {
    /// Freedman-Diaconis bin width `2 IQR / n^(1/3)` over [min, max], with
    /// the bin count clamped to [`MIN_BINS`, `MAX_BINS`]. Constant data gets
    /// `MIN_BINS` bins over [v - 0.5, v + 0.5]. The last bin is closed.
    pub fn freedman_diaconis(xs: &[f64]) -> Self {
        let mut sorted: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        if sorted.is_empty() {
            return Histogram {
                edges: vec![0.0; MIN_BINS + 1],
                counts: vec![0; MIN_BINS],
            };
        }
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        let bins = if iqr > 0.0 {
            let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
            ((hi - lo) / width).ceil() as usize
        } else {
            MIN_BINS
        }
        .clamp(MIN_BINS, MAX_BINS);
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for x in &sorted {
            let idx = (((x - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_difference: f64,
    pub difference_std: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub confidence: f64,
    pub reject_equal_means: bool,
}

/// Two-sided paired t-test of H0: mean difference = 0. `mean_difference`
/// is taken as given so callers can pass `mean(a) - mean(b)`.
pub fn paired_t_test(mean_difference: f64, differences: &[f64], confidence: f64) -> PairedTTest {
    let n = differences.len();
    let sd = sample_std(differences);
    let df = n.saturating_sub(1) as f64;
    let (t, p) = if n < 2 {
        (f64::NAN, 1.0)
    } else if sd == 0.0 {
        if mean_difference == 0.0 {
            (0.0, 1.0)
        } else {
            (mean_difference.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean_difference / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    PairedTTest {
        n,
        mean_difference,
        difference_std: sd,
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        confidence,
        reject_equal_means: p < 1.0 - confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&xs), 5.0);
        assert!((sample_variance(&xs) - 32.0 / 7.0).abs() < 1e-15);
        assert_eq!(sample_std(&[3.0]), 0.0);
    }

    #[test]
    fn histogram_counts_everything() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 10_007) as f64).collect();
        let h = Histogram::freedman_diaconis(&xs);
        assert_eq!(h.total(), 10_000);
        assert_eq!(h.edges.len(), h.counts.len() + 1);
        assert!(h.counts.len() >= MIN_BINS);
        assert_eq!(h.edges[0], 0.0);
        assert!((h.edges[h.counts.len()] - 10_006.0).abs() < 1e-9);
    }

    #[test]
    fn constant_histogram() {
        let h = Histogram::freedman_diaconis(&[3.0; 17]);
        assert_eq!(h.counts.len(), MIN_BINS);
        assert_eq!(h.total(), 17);
        assert_eq!(h.edges[0], 2.5);
    }

    #[test]
    fn t_test_reference() {
        // scipy.stats.ttest_1samp([1.2, 0.8, 1.9, 0.3, 1.1], 0):
        // t = 4.047098806102428, p = 0.015512809225634885.
        let d = [1.2, 0.8, 1.9, 0.3, 1.1];
        let r = paired_t_test(mean(&d), &d, 0.99);
        assert!(
            (r.t_statistic - 4.047_098_806_102_428).abs() < 1e-12,
            "{}",
            r.t_statistic
        );
        assert!(
            (r.p_value - 0.015_512_809_225_634_885).abs() < 1e-10,
            "{}",
            r.p_value
        );
        assert!(!r.reject_equal_means);
        assert!(paired_t_test(mean(&d), &d, 0.95).reject_equal_means);
    }

    #[test]
    fn zero_differences_never_reject() {
        let r = paired_t_test(0.0, &[0.0; 100], 0.99);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject_equal_means);
    }
}
