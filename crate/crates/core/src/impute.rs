//! Baseline multiple-imputation methods.
//!
//! Four methods spanning the behavior classes compared downstream: column
//! mean/mode (destroys the joint distribution), chained least-squares
//! regression with mean predictions (conditional means), marginal resampling
//! (preserves margins, ignores dependence), and chained predictive-mean
//! matching with donor draws (approximates conditional draws).
//!
//! Every completion agrees with the source exactly on all observed cells:
//! the coupling invariant checked by [`ImputationSet::new`].

use crate::data::{Cell, ColumnKind, CompleteMatrix, IncompleteMatrix};
use crate::seed::{self, stream};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

pub const DEFAULT_N_IMPUTATIONS: usize = 5;
pub const DEFAULT_N_CYCLES: usize = 5;
pub const DEFAULT_K_DONORS: usize = 5;

#[derive(Debug, Error)]
pub enum ImputeError {
    #[error("column `{column}` has no observed values")]
    AllMissingColumn { column: String },
    #[error("completion {completion} alters observed cell (row {row}, col {col})")]
    CouplingViolation {
        completion: usize,
        row: usize,
        col: usize,
    },
    #[error("completion {completion} has shape {got_rows}x{got_cols}, expected {rows}x{cols}")]
    ShapeMismatch {
        completion: usize,
        got_rows: usize,
        got_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("imputation set needs at least one completion")]
    Empty,
    #[error("regression design for column `{column}` is degenerate even after ridge fallback")]
    DegenerateDesign { column: String },
}

/// A multiple imputation: `N` completed matrices coupled to one incomplete
/// source.
#[derive(Debug, Clone)]
pub struct ImputationSet {
    completions: Vec<CompleteMatrix>,
    method_name: String,
    seed: u64,
    notes: Vec<String>,
}

impl ImputationSet {
    /// Validate shapes and the coupling invariant against the source.
    pub fn new(
        source: &IncompleteMatrix,
        completions: Vec<CompleteMatrix>,
        method_name: impl Into<String>,
        seed: u64,
    ) -> Result<Self, ImputeError> {
        if completions.is_empty() {
            return Err(ImputeError::Empty);
        }
        for (j, comp) in completions.iter().enumerate() {
            check_coupling(source, comp, j)?;
        }
        Ok(ImputationSet {
            completions,
            method_name: method_name.into(),
            seed,
            notes: Vec::new(),
        })
    }

    pub fn completions(&self) -> &[CompleteMatrix] {
        &self.completions
    }

    pub fn n_imputations(&self) -> usize {
        self.completions.len()
    }

    pub fn method_name(&self) -> &str {
        &self.method_name
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Free-form diagnostics accumulated while imputing (donor-pool
    /// shortfalls and similar).
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// Restrict the set to a row subset, preserving coupling.
    pub fn restrict_rows(&self, rows: &[usize], source: &IncompleteMatrix) -> ImputationSet {
        let completions = self
            .completions
            .iter()
            .map(|comp| {
                let values: Vec<f64> = rows
                    .iter()
                    .flat_map(|&r| comp.row(r).iter().copied())
                    .collect();
                CompleteMatrix::new(source.column_names().to_vec(), source.columns().to_vec(), values)
                    .expect("restriction preserves validity")
            })
            .collect();
        ImputationSet {
            completions,
            method_name: self.method_name.clone(),
            seed: self.seed,
            notes: Vec::new(),
        }
    }
}

/// Check that a completion agrees with the source on every observed cell.
pub fn check_coupling(
    source: &IncompleteMatrix,
    completion: &CompleteMatrix,
    index: usize,
) -> Result<(), ImputeError> {
    if completion.n_rows() != source.n_rows() || completion.n_cols() != source.n_cols() {
        return Err(ImputeError::ShapeMismatch {
            completion: index,
            got_rows: completion.n_rows(),
            got_cols: completion.n_cols(),
            rows: source.n_rows(),
            cols: source.n_cols(),
        });
    }
    for r in 0..source.n_rows() {
        for c in 0..source.n_cols() {
            if let Cell::Present(v) = source.cell(r, c) {
                if completion.value(r, c) != v {
                    return Err(ImputeError::CouplingViolation {
                        completion: index,
                        row: r,
                        col: c,
                    });
                }
            }
        }
    }
    Ok(())
}

fn observed_values(x: &IncompleteMatrix, col: usize) -> Vec<f64> {
    (0..x.n_rows())
        .filter_map(|r| x.cell(r, col).value())
        .collect()
}

/// Column mean (numeric) or mode with lowest-code tie break (categorical)
/// over the observed cells.
fn column_center(x: &IncompleteMatrix, col: usize) -> Result<f64, ImputeError> {
    let obs = observed_values(x, col);
    if obs.is_empty() {
        return Err(ImputeError::AllMissingColumn {
            column: x.column_names()[col].clone(),
        });
    }
    match &x.columns()[col] {
        ColumnKind::Numeric => Ok(obs.iter().sum::<f64>() / obs.len() as f64),
        ColumnKind::Categorical { levels } => {
            let mut counts = vec![0usize; levels.len()];
            for v in obs {
                counts[v as usize] += 1;
            }
            let best = counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(code, _)| code)
                .unwrap();
            Ok(best as f64)
        }
    }
}

fn mean_completion(x: &IncompleteMatrix) -> Result<CompleteMatrix, ImputeError> {
    let centers: Vec<f64> = (0..x.n_cols())
        .map(|c| column_center(x, c))
        .collect::<Result<_, _>>()?;
    let mut values = Vec::with_capacity(x.n_rows() * x.n_cols());
    for r in 0..x.n_rows() {
        for c in 0..x.n_cols() {
            values.push(match x.cell(r, c) {
                Cell::Present(v) => v,
                Cell::Missing => centers[c],
            });
        }
    }
    Ok(
        CompleteMatrix::new(x.column_names().to_vec(), x.columns().to_vec(), values)
            .expect("centers are valid values"),
    )
}

/// Mean/mode single imputation; all `n` completions are identical.
pub fn impute_mean(
    x: &IncompleteMatrix,
    n: usize,
    seed: u64,
) -> Result<ImputationSet, ImputeError> {
    let completion = mean_completion(x)?;
    ImputationSet::new(x, vec![completion; n.max(1)], "mean", seed)
}

/// Marginal hot deck: each missing cell is drawn uniformly with replacement
/// from its column's observed values, independently per completion.
pub fn impute_sample(
    x: &IncompleteMatrix,
    n: usize,
    seed: u64,
) -> Result<ImputationSet, ImputeError> {
    let pools: Vec<Vec<f64>> = (0..x.n_cols()).map(|c| observed_values(x, c)).collect();
    for (c, pool) in pools.iter().enumerate() {
        if pool.is_empty() {
            return Err(ImputeError::AllMissingColumn {
                column: x.column_names()[c].clone(),
            });
        }
    }
    let mut completions = Vec::with_capacity(n.max(1));
    for j in 0..n.max(1) {
        let mut rng = seed::rng(seed, &[stream::IMPUTE, 0, j as u64]);
        let mut values = Vec::with_capacity(x.n_rows() * x.n_cols());
        for r in 0..x.n_rows() {
            for c in 0..x.n_cols() {
                values.push(match x.cell(r, c) {
                    Cell::Present(v) => v,
                    Cell::Missing => pools[c][rng.gen_range(0..pools[c].len())],
                });
            }
        }
        completions.push(
            CompleteMatrix::new(x.column_names().to_vec(), x.columns().to_vec(), values)
                .expect("pool values are valid"),
        );
    }
    ImputationSet::new(x, completions, "sample", seed)
}

/// Least-squares fit of `target` on all other columns (plus intercept) using
/// the rows where `target` is observed; returns predictions for all rows.
/// Falls back to a 1e-8 ridge on a singular Gram matrix.
fn regress_predict(
    x: &IncompleteMatrix,
    work: &CompleteMatrix,
    target: usize,
) -> Result<Vec<f64>, ImputeError> {
    let d = work.n_cols();
    let n = work.n_rows();
    let obs_rows: Vec<usize> = (0..n)
        .filter(|&r| !x.cell(r, target).is_missing())
        .collect();
    let predictors: Vec<usize> = (0..d).filter(|&c| c != target).collect();
    let p = predictors.len() + 1;

    // No predictors or too few observations: predict the observed mean.
    if predictors.is_empty() || obs_rows.len() < 2 {
        let mean = obs_rows
            .iter()
            .map(|&r| work.value(r, target))
            .sum::<f64>()
            / obs_rows.len().max(1) as f64;
        return Ok(vec![mean; n]);
    }

    let mut design = DMatrix::zeros(obs_rows.len(), p);
    let mut response = DVector::zeros(obs_rows.len());
    for (i, &r) in obs_rows.iter().enumerate() {
        design[(i, 0)] = 1.0;
        for (k, &c) in predictors.iter().enumerate() {
            design[(i, k + 1)] = work.value(r, c);
        }
        response[i] = work.value(r, target);
    }
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * response;
    let coef = match Cholesky::new(gram.clone()) {
        Some(chol) => chol.solve(&rhs),
        None => {
            let ridge = &gram + DMatrix::identity(p, p) * 1e-8;
            Cholesky::new(ridge)
                .ok_or_else(|| ImputeError::DegenerateDesign {
                    column: x.column_names()[target].clone(),
                })?
                .solve(&rhs)
        }
    };
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(ImputeError::DegenerateDesign {
            column: x.column_names()[target].clone(),
        });
    }

    let preds = (0..n)
        .map(|r| {
            let mut y = coef[0];
            for (k, &c) in predictors.iter().enumerate() {
                y += coef[k + 1] * work.value(r, c);
            }
            y
        })
        .collect();
    Ok(preds)
}

fn clamp_to_kind(v: f64, kind: &ColumnKind) -> f64 {
    match kind {
        ColumnKind::Numeric => v,
        ColumnKind::Categorical { levels } => {
            let max_code = (levels.len() - 1) as f64;
            v.round().clamp(0.0, max_code)
        }
    }
}

/// Incomplete columns in ascending-missing-count visit order (column index
/// breaks ties).
fn visit_order(x: &IncompleteMatrix) -> Vec<usize> {
    let mut cols: Vec<(usize, usize)> = (0..x.n_cols())
        .filter_map(|c| {
            let miss = (0..x.n_rows())
                .filter(|&r| x.cell(r, c).is_missing())
                .count();
            (miss > 0).then_some((miss, c))
        })
        .collect();
    cols.sort_unstable();
    cols.into_iter().map(|(_, c)| c).collect()
}

/// Chained-equations regression imputation predicting conditional means.
/// Deterministic given the data; all `n` completions are identical.
pub fn impute_regress_mean(
    x: &IncompleteMatrix,
    n: usize,
    seed: u64,
    n_cycles: usize,
) -> Result<ImputationSet, ImputeError> {
    let mut work = mean_completion(x)?;
    let order = visit_order(x);
    for _ in 0..n_cycles {
        for &c in &order {
            let preds = regress_predict(x, &work, c)?;
            for r in 0..x.n_rows() {
                if x.cell(r, c).is_missing() {
                    work.set(r, c, clamp_to_kind(preds[r], &x.columns()[c]));
                }
            }
        }
    }
    ImputationSet::new(x, vec![work; n.max(1)], "regress-mean", seed)
}

/// Chained predictive-mean matching: each missing cell takes the observed
/// value of a donor drawn uniformly among the `k_donors` observed rows whose
/// regression predictions are closest; independent draws per completion.
pub fn impute_donor(
    x: &IncompleteMatrix,
    n: usize,
    seed: u64,
    k_donors: usize,
    n_cycles: usize,
) -> Result<ImputationSet, ImputeError> {
    assert!(k_donors >= 1);
    let order = visit_order(x);
    let mut completions = Vec::with_capacity(n.max(1));
    let mut notes = Vec::new();
    for j in 0..n.max(1) {
        let mut rng = seed::rng(seed, &[stream::IMPUTE, 1, j as u64]);
        let mut work = mean_completion(x)?;
        for _ in 0..n_cycles {
            for &c in &order {
                let preds = regress_predict(x, &work, c)?;
                // (prediction, row) pairs of donor candidates, sorted once
                let mut donors: Vec<(f64, usize)> = (0..x.n_rows())
                    .filter(|&r| !x.cell(r, c).is_missing())
                    .map(|r| (preds[r], r))
                    .collect();
                donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let k = k_donors.min(donors.len());
                if k < k_donors && notes.is_empty() {
                    notes.push(format!(
                        "column `{}` has only {} donor candidates (requested {})",
                        x.column_names()[c],
                        donors.len(),
                        k_donors
                    ));
                }
                for r in 0..x.n_rows() {
                    if !x.cell(r, c).is_missing() {
                        continue;
                    }
                    let chosen = draw_donor(&donors, preds[r], k, &mut rng);
                    work.set(r, c, x.cell(chosen, c).value().expect("donor is observed"));
                }
            }
        }
        completions.push(work);
    }
    let mut set = ImputationSet::new(x, completions, "donor", seed)?;
    set.notes = notes;
    Ok(set)
}

/// Pick uniformly among the `k` donors with predictions closest to `target`
/// (ties resolved toward smaller prediction, then smaller row index).
fn draw_donor(donors: &[(f64, usize)], target: f64, k: usize, rng: &mut impl Rng) -> usize {
    let pos = donors.partition_point(|&(p, _)| p < target);
    // walk outwards from the insertion point collecting the k nearest
    let (mut lo, mut hi) = (pos, pos);
    let mut nearest = Vec::with_capacity(k);
    while nearest.len() < k {
        let take_lo = if lo > 0 {
            if hi < donors.len() {
                (target - donors[lo - 1].0) <= (donors[hi].0 - target)
            } else {
                true
            }
        } else {
            false
        };
        if take_lo {
            lo -= 1;
            nearest.push(donors[lo].1);
        } else {
            nearest.push(donors[hi].1);
            hi += 1;
        }
    }
    nearest[rng.gen_range(0..nearest.len())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ampute::{ampute_mcar, gen_gaussian};
    use crate::data::IncompleteMatrix;

    fn numeric(cells: Vec<Cell>, d: usize) -> IncompleteMatrix {
        IncompleteMatrix::new(
            (0..d).map(|j| format!("x{}", j + 1)).collect(),
            vec![ColumnKind::Numeric; d],
            cells,
        )
        .unwrap()
    }

    #[test]
    fn mean_imputes_column_mean() {
        use Cell::{Missing, Present};
        let x = numeric(vec![Present(1.0), Missing, Present(3.0)], 1);
        let set = impute_mean(&x, 5, 0).unwrap();
        assert_eq!(set.n_imputations(), 5);
        for comp in set.completions() {
            assert_eq!(comp.value(1, 0), 2.0);
        }
        assert_eq!(set.completions()[0], set.completions()[4]);
    }

    #[test]
    fn mean_uses_mode_with_lowest_code_tiebreak() {
        use Cell::{Missing, Present};
        let x = IncompleteMatrix::new(
            vec!["c".into()],
            vec![ColumnKind::Categorical {
                levels: vec!["a".into(), "b".into(), "z".into()],
            }],
            vec![Present(0.0), Present(0.0), Present(1.0), Missing],
        )
        .unwrap();
        let set = impute_mean(&x, 1, 0).unwrap();
        assert_eq!(set.completions()[0].value(3, 0), 0.0);
        // exact tie: codes 0 and 1 both appear twice -> lowest code wins
        let y = IncompleteMatrix::new(
            vec!["c".into()],
            vec![ColumnKind::Categorical {
                levels: vec!["a".into(), "b".into()],
            }],
            vec![Present(1.0), Present(0.0), Present(1.0), Present(0.0), Missing],
        )
        .unwrap();
        let set = impute_mean(&y, 1, 0).unwrap();
        assert_eq!(set.completions()[0].value(4, 0), 0.0);
    }

    #[test]
    fn mean_errors_on_all_missing_column() {
        use Cell::{Missing, Present};
        let x = numeric(vec![Present(1.0), Missing, Present(2.0), Missing], 2);
        assert!(matches!(
            impute_mean(&x, 1, 0).unwrap_err(),
            ImputeError::AllMissingColumn { .. }
        ));
    }

    #[test]
    fn sample_single_donor_is_deterministic() {
        use Cell::{Missing, Present};
        let x = numeric(vec![Present(1.0), Missing], 1);
        let set = impute_sample(&x, 20, 3).unwrap();
        for comp in set.completions() {
            assert_eq!(comp.value(1, 0), 1.0);
        }
    }

    #[test]
    fn sample_draws_approach_uniform_donor_frequencies() {
        use Cell::{Missing, Present};
        let x = numeric(vec![Present(1.0), Present(2.0), Missing], 1);
        let set = impute_sample(&x, 10_000, 7).unwrap();
        let ones = set
            .completions()
            .iter()
            .filter(|c| c.value(2, 0) == 1.0)
            .count() as f64
            / 10_000.0;
        assert!((ones - 0.5).abs() < 0.02, "frequency {ones}");
    }

    #[test]
    fn regress_recovers_exact_linear_relation() {
        use Cell::{Missing, Present};
        // X2 = 2 * X1 exactly; half of X2 missing.
        let n = 40;
        let mut cells = Vec::new();
        for i in 0..n {
            let v = i as f64 / 7.0 - 2.0;
            cells.push(Present(v));
            cells.push(if i % 2 == 0 { Present(2.0 * v) } else { Missing });
        }
        let x = numeric(cells, 2);
        let set = impute_regress_mean(&x, 1, 0, DEFAULT_N_CYCLES).unwrap();
        let comp = &set.completions()[0];
        for i in 0..n {
            let v = i as f64 / 7.0 - 2.0;
            assert!((comp.value(i, 1) - 2.0 * v).abs() < 1e-6, "row {i}");
        }
    }

    #[test]
    fn regress_single_column_falls_back_to_mean() {
        use Cell::{Missing, Present};
        let x = numeric(vec![Present(1.0), Present(3.0), Missing], 1);
        let set = impute_regress_mean(&x, 1, 0, 5).unwrap();
        assert_eq!(set.completions()[0].value(2, 0), 2.0);
    }

    #[test]
    fn regress_is_deterministic() {
        let x = ampute_mcar(&gen_gaussian(80, 3, 0.6, 5), 0.25, 6)
            .unwrap()
            .matrix;
        let a = impute_regress_mean(&x, 2, 9, 5).unwrap();
        let b = impute_regress_mean(&x, 2, 9, 5).unwrap();
        assert_eq!(a.completions()[0], b.completions()[0]);
        assert_eq!(a.completions()[0], a.completions()[1]);
    }

    #[test]
    fn donor_k1_is_nearest_prediction() {
        let x = ampute_mcar(&gen_gaussian(60, 2, 0.8, 11), 0.2, 12)
            .unwrap()
            .matrix;
        let a = impute_donor(&x, 1, 13, 1, 3).unwrap();
        let b = impute_donor(&x, 1, 13, 1, 3).unwrap();
        assert_eq!(a.completions()[0], b.completions()[0]);
    }

    #[test]
    fn donor_values_come_from_observed_support() {
        let x = ampute_mcar(&gen_gaussian(100, 3, 0.5, 21), 0.3, 22)
            .unwrap()
            .matrix;
        let set = impute_donor(&x, 3, 23, DEFAULT_K_DONORS, DEFAULT_N_CYCLES).unwrap();
        for comp in set.completions() {
            for c in 0..x.n_cols() {
                let support = observed_values(&x, c);
                for r in 0..x.n_rows() {
                    if x.cell(r, c).is_missing() {
                        assert!(support.contains(&comp.value(r, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn donor_pool_shortfall_is_noted() {
        use Cell::{Missing, Present};
        let x = numeric(
            vec![Present(1.0), Present(0.5), Present(2.0), Present(1.5), Missing, Present(2.5)],
            2,
        );
        let set = impute_donor(&x, 1, 0, 50, 1).unwrap();
        assert!(!set.notes().is_empty());
    }

    #[test]
    fn donor_reproduces_conditional_spread() {
        // Bivariate Gaussian with rho = 0.9: sd(X2 | X1) = sqrt(1 - 0.81).
        let truth = gen_gaussian(2000, 2, 0.9, 31);
        let x = ampute_mcar(&truth, 0.2, 32).unwrap().matrix;
        let set = impute_donor(&x, 10, 33, DEFAULT_K_DONORS, DEFAULT_N_CYCLES).unwrap();
        let cond_sd = (1.0f64 - 0.81).sqrt();
        let mut zs = Vec::new();
        for comp in set.completions() {
            for r in 0..x.n_rows() {
                if x.cell(r, 1).is_missing() && !x.cell(r, 0).is_missing() {
                    let e = 0.9 * x.cell(r, 0).value().unwrap();
                    zs.push((comp.value(r, 1) - e) / cond_sd);
                }
            }
        }
        let n = zs.len() as f64;
        let mean = zs.iter().sum::<f64>() / n;
        let sd = (zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.75..=1.25).contains(&sd), "standardized spread {sd}");
    }

    #[test]
    fn stochastic_methods_vary_across_completions() {
        let x = ampute_mcar(&gen_gaussian(100, 3, 0.5, 41), 0.3, 42)
            .unwrap()
            .matrix;
        let sample = impute_sample(&x, 2, 43).unwrap();
        assert_ne!(sample.completions()[0], sample.completions()[1]);
        let donor = impute_donor(&x, 2, 44, 5, 5).unwrap();
        assert_ne!(donor.completions()[0], donor.completions()[1]);
    }

    #[test]
    fn all_methods_respect_coupling_and_levels() {
        use Cell::{Missing, Present};
        // mixed numeric + categorical data with scattered missingness
        let levels = vec!["a".into(), "b".into(), "c".into()];
        let mut cells = Vec::new();
        let g = gen_gaussian(60, 1, 0.0, 51);
        for r in 0..60 {
            cells.push(if r % 7 == 0 { Missing } else { Present(g.value(r, 0)) });
            cells.push(if r % 5 == 0 {
                Missing
            } else {
                Present((r % 3) as f64)
            });
        }
        let x = IncompleteMatrix::new(
            vec!["num".into(), "cat".into()],
            vec![ColumnKind::Numeric, ColumnKind::Categorical { levels }],
            cells,
        )
        .unwrap();
        let sets = [
            impute_mean(&x, 3, 1).unwrap(),
            impute_sample(&x, 3, 2).unwrap(),
            impute_regress_mean(&x, 3, 3, 5).unwrap(),
            impute_donor(&x, 3, 4, 5, 5).unwrap(),
        ];
        for set in &sets {
            for (j, comp) in set.completions().iter().enumerate() {
                check_coupling(&x, comp, j).unwrap();
                for r in 0..x.n_rows() {
                    let v = comp.value(r, 1);
                    assert!(v == v.trunc() && (0.0..3.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn coupling_violation_reports_first_offender() {
        use Cell::Present;
        let x = numeric(vec![Present(1.0), Present(2.0)], 2);
        let bad = CompleteMatrix::new(
            x.column_names().to_vec(),
            x.columns().to_vec(),
            vec![1.0, 99.0],
        )
        .unwrap();
        let err = ImputationSet::new(&x, vec![bad], "bad", 0).unwrap_err();
        assert!(matches!(
            err,
            ImputeError::CouplingViolation {
                completion: 0,
                row: 0,
                col: 1
            }
        ));
    }
}
