//! Small statistics helpers for the Monte-Carlo experiments.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }
}

/// Mean with a normal-approximation 95% interval.
pub fn mean_ci95(xs: &[f64]) -> Estimate {
    let m = mean(xs);
    let hw = Z95 * std_dev(xs) / (xs.len().max(1) as f64).sqrt();
    Estimate { value: m, lo: m - hw, hi: m + hw }
}

/// Ratio of totals `sum(num) / sum(den)` over independent clusters, with a
/// delta-method 95% interval.
pub fn ratio_ci95(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len() as f64;
    let (sn, sd): (f64, f64) = (num.iter().sum(), den.iter().sum());
    if sd == 0.0 {
        return Estimate { value: f64::NAN, lo: f64::NAN, hi: f64::NAN };
    }
    let r = sn / sd;
    if num.len() < 2 {
        return Estimate { value: r, lo: r, hi: r };
    }
    let dbar = sd / n;
    let resid: f64 = num.iter().zip(den).map(|(a, b)| (a - r * b).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (resid / n).sqrt() / dbar;
    Estimate { value: r, lo: r - Z95 * se, hi: r + Z95 * se }
}

/// One-sided paired t-test p-value for `H1: mean(diffs) > 0`.
pub fn paired_t_greater(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    if n < 2 {
        return 1.0;
    }
    let m = mean(diffs);
    let sd = std_dev(diffs);
    if sd == 0.0 {
        return if m > 0.0 { 0.0 } else { 1.0 };
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
    1.0 - dist.cdf(t)
}
