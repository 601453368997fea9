//! Downstream relevancy metrics for imputation methods.
//!
//! Coverage and width of per-cell multiple-imputation intervals (computed
//! against the held-back truth), the negative RMSE baseline, and score-based
//! method rankings.

use crate::data::{ColumnKind, CompleteMatrix, IncompleteMatrix, Quadrant};
use crate::impute::ImputationSet;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_COVERAGE_IMPUTATIONS: usize = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("coverage needs at least 2 imputations, got {0}")]
    TooFewImputations(usize),
    #[error("no missing numeric cells to evaluate")]
    NoMissingNumericCells,
    #[error("no missing cells to evaluate")]
    NoMissingCells,
    #[error("truth matrix shape does not match the mask")]
    ShapeMismatch,
}

/// Marginal coverage and width of per-cell imputation intervals.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub method_name: String,
    /// Nested mean over rows, then missing cells, of the indicator that the
    /// true value falls inside the closed empirical 95% interval.
    pub coverage: f64,
    /// Same nested mean of the interval length.
    pub raw_width: f64,
    /// `raw_width` divided by the largest raw width among the methods
    /// evaluated together; set by [`normalize_widths`].
    pub normalized_width: Option<f64>,
    pub n_cells: usize,
}

impl CoverageReport {
    /// Quadrant of the width-vs-coverage unit square, numbered like plane
    /// quadrants: I high width / high coverage, II low width / high
    /// coverage, III low/low, IV high width / low coverage.
    pub fn quadrant(&self) -> Option<Quadrant> {
        let w = self.normalized_width?;
        Some(match (self.coverage >= 0.5, w >= 0.5) {
            (true, true) => Quadrant::I,
            (true, false) => Quadrant::II,
            (false, false) => Quadrant::III,
            (false, true) => Quadrant::IV,
        })
    }
}

/// Empirical quantile with type-7 linear interpolation on sorted values.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Coverage and raw width against the true data.
///
/// Numeric cells use the closed interval between the empirical 0.025 and
/// 0.975 quantiles of the imputed values; categorical cells use membership
/// of the true level in the imputed-level set for coverage and
/// `(distinct - 1)/(levels - 1)` for width.
pub fn coverage_width(
    imp: &ImputationSet,
    x_true: &CompleteMatrix,
    mask: &IncompleteMatrix,
) -> Result<CoverageReport, EvalError> {
    let n_imp = imp.n_imputations();
    if n_imp < 2 {
        return Err(EvalError::TooFewImputations(n_imp));
    }
    if x_true.n_rows() != mask.n_rows() || x_true.n_cols() != mask.n_cols() {
        return Err(EvalError::ShapeMismatch);
    }
    let mut row_cover = Vec::new();
    let mut row_width = Vec::new();
    let mut n_cells = 0usize;
    for r in 0..mask.n_rows() {
        let missing: Vec<usize> = (0..mask.n_cols())
            .filter(|&c| mask.cell(r, c).is_missing())
            .collect();
        if missing.is_empty() {
            continue;
        }
        let mut cover_sum = 0.0;
        let mut width_sum = 0.0;
        for &c in &missing {
            n_cells += 1;
            let truth = x_true.value(r, c);
            let imputed: Vec<f64> = imp.completions().iter().map(|m| m.value(r, c)).collect();
            match &mask.columns()[c] {
                ColumnKind::Numeric => {
                    let mut sorted = imputed;
                    sorted.sort_by(f64::total_cmp);
                    let lo = quantile_type7(&sorted, 0.025);
                    let hi = quantile_type7(&sorted, 0.975);
                    if (lo..=hi).contains(&truth) {
                        cover_sum += 1.0;
                    }
                    width_sum += hi - lo;
                }
                ColumnKind::Categorical { levels } => {
                    let mut codes: Vec<i64> = imputed.iter().map(|&v| v as i64).collect();
                    codes.sort_unstable();
                    codes.dedup();
                    if codes.contains(&(truth as i64)) {
                        cover_sum += 1.0;
                    }
                    if levels.len() > 1 {
                        width_sum += (codes.len() - 1) as f64 / (levels.len() - 1) as f64;
                    }
                }
            }
        }
        row_cover.push(cover_sum / missing.len() as f64);
        row_width.push(width_sum / missing.len() as f64);
    }
    if row_cover.is_empty() {
        return Err(EvalError::NoMissingCells);
    }
    let n = row_cover.len() as f64;
    Ok(CoverageReport {
        method_name: imp.method_name().to_string(),
        coverage: row_cover.iter().sum::<f64>() / n,
        raw_width: row_width.iter().sum::<f64>() / n,
        normalized_width: None,
        n_cells,
    })
}

/// Set each report's normalized width relative to the largest raw width in
/// the batch (zero when every method has zero width).
pub fn normalize_widths(reports: &mut [CoverageReport]) {
    let max = reports
        .iter()
        .map(|r| r.raw_width)
        .fold(0.0f64, f64::max);
    for r in reports {
        r.normalized_width = Some(if max > 0.0 { r.raw_width / max } else { 0.0 });
    }
}

/// Negative root-mean-squared error over missing numeric cells and all
/// completions; categorical cells are excluded.
pub fn neg_rmse(
    imp: &ImputationSet,
    x_true: &CompleteMatrix,
    mask: &IncompleteMatrix,
) -> Result<f64, EvalError> {
    if x_true.n_rows() != mask.n_rows() || x_true.n_cols() != mask.n_cols() {
        return Err(EvalError::ShapeMismatch);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in 0..mask.n_rows() {
        for c in 0..mask.n_cols() {
            if mask.columns()[c].is_categorical() || !mask.cell(r, c).is_missing() {
                continue;
            }
            let truth = x_true.value(r, c);
            for comp in imp.completions() {
                let e = comp.value(r, c) - truth;
                sum += e * e;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(EvalError::NoMissingNumericCells);
    }
    Ok(-(sum / count as f64).sqrt())
}

/// Competition ranks by descending score: rank 1 is best, exact ties share
/// the lower (better) rank.
pub fn rank_methods(scores: &[f64]) -> Vec<usize> {
    scores
        .iter()
        .map(|&s| 1 + scores.iter().filter(|&&t| t > s).count())
        .collect()
}
