//! Jackknife variance estimation, approximate confidence intervals, and the
//! propriety hypothesis tests.
//!
//! The variance of a dataset statistic is estimated by repeated random equal
//! splits: each replicate evaluates the statistic on both halves and stores
//! the pair average; the variance is the spread of those pair averages. The
//! estimator targets genuinely nonlinear statistics (the score); for a
//! statistic linear in the rows the pair averages are split-invariant and
//! the estimate degenerates to zero.

use crate::seed::{self, stream};
use rand::seq::SliceRandom;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub const DEFAULT_B: usize = 30;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("statistic failed on the full dataset: {0}")]
    PointStatisticFailed(String),
    #[error("only {kept} of {requested} replicates succeeded (minimum 5)")]
    TooFewReplicates { kept: usize, requested: usize },
    #[error("dataset needs at least 4 rows for half-splitting, got {0}")]
    TooFewRows(usize),
}

/// Half-split variance estimate of a dataset statistic.
#[derive(Debug, Clone)]
pub struct JackknifeResult {
    /// Statistic on the full dataset.
    pub point: f64,
    /// (1/B) sum of squared deviations of the pair averages.
    pub variance: f64,
    /// Replicates that survived (statistic succeeded on both halves).
    pub b_effective: usize,
    /// Per-replicate statistic values on the two halves.
    pub halves: Vec<(f64, f64)>,
    pub n_dropped: usize,
}

/// Recompute the variance from stored half pairs; the stored value must
/// match exactly.
pub fn recompute_variance(halves: &[(f64, f64)]) -> f64 {
    if halves.is_empty() {
        return 0.0;
    }
    let bars: Vec<f64> = halves.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let mean = bars.iter().sum::<f64>() / bars.len() as f64;
    bars.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / bars.len() as f64
}

/// Random equal split of `0..n`; the odd extra row goes to the first half.
/// Both halves come back sorted.
pub fn half_split(n: usize, seed_value: u64, replicate: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::rng(seed_value, &[stream::JACKKNIFE, replicate]);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let cut = n.div_ceil(2);
    let mut first = rows[..cut].to_vec();
    let mut second = rows[cut..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

/// Estimate the variance of `statistic` under data resampling by `b` random
/// half-splits of the `n_rows` rows.
///
/// The statistic receives a sorted row-index subset. Replicates where it
/// fails on either half are dropped with a note; fewer than 5 surviving
/// replicates is an error.
pub fn jackknife_variance<E: std::fmt::Display>(
    n_rows: usize,
    b: usize,
    seed_value: u64,
    statistic: impl Fn(&[usize]) -> Result<f64, E>,
) -> Result<JackknifeResult, InferenceError> {
    if n_rows < 4 {
        return Err(InferenceError::TooFewRows(n_rows));
    }
    let all: Vec<usize> = (0..n_rows).collect();
    let point = statistic(&all).map_err(|e| InferenceError::PointStatisticFailed(e.to_string()))?;

    let mut halves = Vec::with_capacity(b);
    let mut n_dropped = 0usize;
    for j in 0..b {
        let (first, second) = half_split(n_rows, seed_value, j as u64);
        match (statistic(&first), statistic(&second)) {
            (Ok(s1), Ok(s2)) => halves.push((s1, s2)),
            _ => n_dropped += 1,
        }
    }
    if halves.len() < 5 {
        return Err(InferenceError::TooFewReplicates {
            kept: halves.len(),
            requested: b,
        });
    }
    let variance = recompute_variance(&halves);
    Ok(JackknifeResult {
        point,
        variance,
        b_effective: halves.len(),
        halves,
        n_dropped,
    })
}

/// Standard normal quantile (rational approximation, relative error below
/// 1e-8) and CDF.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// `point +- z_{1-alpha/2} * sqrt(variance)`.
pub fn confidence_interval(point: f64, variance: f64, alpha: f64) -> (f64, f64) {
    debug_assert!(variance >= 0.0);
    let z = normal_quantile(1.0 - alpha / 2.0);
    let half = z * variance.sqrt();
    (point - half, point + half)
}

/// Result of the superiority/inferiority tests on the score difference
/// D = score(imputation) - score(true data).
#[derive(Debug, Clone)]
pub struct ProprietyResult {
    pub method_name: String,
    pub d_h: f64,
    pub sigma: f64,
    /// P-value of the one-sided test against D > 0 (imputation better than
    /// truth); small values would contradict propriety.
    pub p_superiority: f64,
    /// P-value of the one-sided test against D < 0 (imputation worse than
    /// truth).
    pub p_inferiority: f64,
    pub b_effective: usize,
    /// Set when sigma is exactly zero and the p-values are degenerate.
    pub degenerate: bool,
}

/// Run the propriety pipeline on statistic closures for the imputation score
/// and the true-data score. Both receive sorted row-index subsets of the
/// same `n_rows` rows; the difference statistic is jackknifed with `b`
/// half-splits.
pub fn propriety_test<E: std::fmt::Display>(
    method_name: impl Into<String>,
    n_rows: usize,
    b: usize,
    seed_value: u64,
    score_h: impl Fn(&[usize]) -> Result<f64, E>,
    score_true: impl Fn(&[usize]) -> Result<f64, E>,
) -> Result<ProprietyResult, InferenceError> {
    let diff = |rows: &[usize]| -> Result<f64, E> { Ok(score_h(rows)? - score_true(rows)?) };
    let jk = jackknife_variance(n_rows, b, seed_value, diff)?;
    let sigma = jk.variance.sqrt();
    let (p_superiority, p_inferiority, degenerate) = if sigma == 0.0 {
        match jk.point.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => (0.0, 1.0, true),
            Some(std::cmp::Ordering::Less) => (1.0, 0.0, true),
            _ => (0.5, 0.5, true),
        }
    } else {
        let z = jk.point / sigma;
        (1.0 - normal_cdf(z), normal_cdf(z), false)
    };
    Ok(ProprietyResult {
        method_name: method_name.into(),
        d_h: jk.point,
        sigma,
        p_superiority,
        p_inferiority,
        b_effective: jk.b_effective,
        degenerate,
    })
}

/// Significance bucket used by the report heatmaps.
pub fn p_value_bucket(p: f64) -> &'static str {
    if p <= 0.01 {
        "(0,0.01]"
    } else if p <= 0.05 {
        "(0.01,0.05]"
    } else if p <= 0.1 {
        "(0.05,0.1]"
    } else {
        "(0.1,1]"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ampute::gen_gaussian;
    use std::convert::Infallible;

    #[test]
    fn constant_statistic_has_zero_variance() {
        let jk = jackknife_variance(100, DEFAULT_B, 1, |_rows| Ok::<f64, Infallible>(3.25)).unwrap();
        assert_eq!(jk.variance, 0.0);
        assert_eq!(jk.point, 3.25);
        assert_eq!(jk.b_effective, 30);
    }

    #[test]
    fn stored_variance_matches_recomputation_exactly() {
        let x = gen_gaussian(200, 1, 0.0, 3);
        let jk = jackknife_variance(200, DEFAULT_B, 5, |rows| {
            let m = rows.iter().map(|&r| x.value(r, 0)).sum::<f64>() / rows.len() as f64;
            Ok::<f64, Infallible>(m * m)
        })
        .unwrap();
        assert_eq!(jk.variance, recompute_variance(&jk.halves));
        assert_eq!(jk.halves.len(), jk.b_effective);
    }

    #[test]
    fn linear_statistic_degenerates_for_even_n() {
        // Complementary equal halves make the pair average of a sample mean
        // split-invariant, so the estimate is exactly zero.
        let x = gen_gaussian(1000, 1, 0.0, 7);
        let jk = jackknife_variance(1000, DEFAULT_B, 9, |rows| {
            Ok::<f64, Infallible>(
                rows.iter().map(|&r| x.value(r, 0)).sum::<f64>() / rows.len() as f64,
            )
        })
        .unwrap();
        assert!(jk.variance < 1e-28, "variance {}", jk.variance);
    }

    #[test]
    fn squared_mean_variance_tracks_analytic_value() {
        // For S = (sample mean)^2 of standard normal data the sampling
        // variance is 2 sigma^4 / n^2; average the estimate over fresh
        // datasets and compare within a factor of 2.
        let n = 1000;
        let mut total = 0.0;
        let reps = 20;
        for meta in 0..reps {
            let x = gen_gaussian(n, 1, 0.0, 100 + meta);
            let jk = jackknife_variance(n, DEFAULT_B, 200 + meta, |rows| {
                let m = rows.iter().map(|&r| x.value(r, 0)).sum::<f64>() / rows.len() as f64;
                Ok::<f64, Infallible>(m * m)
            })
            .unwrap();
            total += jk.variance;
        }
        let mean_estimate = total / reps as f64;
        let analytic = 2.0 / (n as f64 * n as f64);
        let ratio = mean_estimate / analytic;
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn failing_halves_are_dropped() {
        // a half fails when it holds both of two marker rows, which happens
        // for roughly half of the random splits
        let n = 40;
        let jk = jackknife_variance(n, DEFAULT_B, 11, |rows| {
            if rows.len() < n && rows.contains(&0) && rows.contains(&1) {
                Err("pattern vanished")
            } else {
                Ok(rows.len() as f64 + (rows.iter().sum::<usize>() as f64).sqrt())
            }
        })
        .unwrap();
        assert!(jk.n_dropped > 0);
        assert!(jk.b_effective >= 5);
        assert_eq!(jk.b_effective + jk.n_dropped, DEFAULT_B);
    }

    #[test]
    fn too_many_failures_is_a_hard_error() {
        let n = 40;
        let err = jackknife_variance(n, DEFAULT_B, 13, |rows| {
            if rows.len() < n {
                Err("always fails on halves")
            } else {
                Ok(1.0)
            }
        })
        .unwrap_err();
        assert!(matches!(err, InferenceError::TooFewReplicates { kept: 0, .. }));
    }

    #[test]
    fn half_split_partitions_rows() {
        let (a, b) = half_split(11, 3, 0);
        assert_eq!(a.len(), 6);
        assert_eq!(b.len(), 5);
        let mut all: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(half_split(11, 3, 0), (a, b));
    }

    #[test]
    fn confidence_interval_quantile() {
        let (lo, hi) = confidence_interval(0.0, 1.0, DEFAULT_ALPHA);
        assert!((lo + 1.959964).abs() < 1e-5, "lo {lo}");
        assert!((hi - 1.959964).abs() < 1e-5, "hi {hi}");
        assert_eq!(confidence_interval(2.5, 0.0, 0.05), (2.5, 2.5));
    }

    #[test]
    fn intervals_widen_as_alpha_decreases() {
        let widths: Vec<f64> = [0.2, 0.1, 0.05, 0.01]
            .iter()
            .map(|&a| {
                let (lo, hi) = confidence_interval(0.0, 2.0, a);
                hi - lo
            })
            .collect();
        assert!(widths.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn identical_statistics_give_half_p_values() {
        let stat = |rows: &[usize]| Ok::<f64, Infallible>(rows.len() as f64);
        let res = propriety_test("self", 50, DEFAULT_B, 17, stat, stat).unwrap();
        assert_eq!(res.d_h, 0.0);
        assert_eq!(res.p_superiority, 0.5);
        assert_eq!(res.p_inferiority, 0.5);
        assert!(res.degenerate);
    }

    #[test]
    fn p_superiority_decreases_in_d() {
        // fixed sigma, increasing D: p_sup must fall, p_inf must rise
        let mut last = 1.0;
        for k in 0..10 {
            let d = -1.0 + 0.25 * k as f64;
            let z = d / 0.5;
            let p_sup = 1.0 - normal_cdf(z);
            assert!(p_sup < last);
            last = p_sup;
            assert!((p_sup + normal_cdf(z) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn buckets_have_the_documented_cutpoints() {
        assert_eq!(p_value_bucket(0.005), "(0,0.01]");
        assert_eq!(p_value_bucket(0.01), "(0,0.01]");
        assert_eq!(p_value_bucket(0.03), "(0.01,0.05]");
        assert_eq!(p_value_bucket(0.07), "(0.05,0.1]");
        assert_eq!(p_value_bucket(0.5), "(0.1,1]");
    }
}
