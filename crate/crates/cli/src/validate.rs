//! The validation harness: mask complete data, impute with each method,
//! score with confidence intervals, test propriety against the true-data
//! score, and evaluate coverage/width and negative RMSE.
//!
//! Subsample replicates re-impute each half (the score difference is a
//! statistic of the data, not of one fixed imputation), and the same random
//! splits are shared by every method so their uncertainties are comparable.
//! The true-data half scores are computed once and reused across methods.

use crate::error::CliError;
use crate::util::SCHEMA_VERSION;
use crate::{Mechanism, Method, ScoreParamArgs};
use iscore::ampute::{ampute_mar, ampute_mcar, ampute_spiral, default_n_patterns, random_mar_spec};
use iscore::data::Quadrant;
use iscore::evaluate::{coverage_width, neg_rmse, normalize_widths, rank_methods, EvalError};
use iscore::impute::ImputationSet;
use iscore::inference::{
    confidence_interval, half_split, normal_cdf, p_value_bucket, recompute_variance,
};
use iscore::score::{dr_iscore, ForestClassifier, ScoreParams, ScoreReport};
use iscore::seed;
use iscore::{CompleteMatrix, IncompleteMatrix};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

pub struct Config {
    pub input: PathBuf,
    pub mechanism: Mechanism,
    pub p_miss: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub params: ScoreParamArgs,
    pub n_imputations: usize,
    pub b_reps: usize,
    pub alpha: f64,
    pub coverage_imputations: usize,
    pub mar_patterns: Option<usize>,
    pub out_prefix: String,
}

#[derive(Serialize)]
struct MethodReport {
    method: &'static str,
    score: f64,
    variance: f64,
    ci_lo: f64,
    ci_hi: f64,
    d_h: f64,
    sigma: f64,
    p_superiority: f64,
    p_inferiority: f64,
    bucket: &'static str,
    coverage: f64,
    raw_width: f64,
    normalized_width: f64,
    quadrant: Quadrant,
    neg_rmse: Option<f64>,
    rank: usize,
}

#[derive(Serialize)]
struct ScatterPoint {
    method: &'static str,
    coverage: f64,
    width_norm: f64,
    quadrant: Quadrant,
}

#[derive(Serialize)]
struct ValidateReport {
    schema_version: u32,
    mechanism: &'static str,
    p_miss: f64,
    seed: u64,
    n_rows: usize,
    n_cols: usize,
    true_score: f64,
    b_effective: usize,
    methods: Vec<MethodReport>,
    scatter: Vec<ScatterPoint>,
}

fn mechanism_name(m: Mechanism) -> &'static str {
    match m {
        Mechanism::Mcar => "mcar",
        Mechanism::Mar => "mar",
        Mechanism::Spiral => "spiral",
    }
}

pub fn apply_mechanism(
    complete: &CompleteMatrix,
    mechanism: Mechanism,
    p_miss: f64,
    seed_value: u64,
    mar_patterns: Option<usize>,
) -> Result<IncompleteMatrix, CliError> {
    Ok(match mechanism {
        Mechanism::Mcar => ampute_mcar(complete, p_miss, seed::derive(seed_value, &[10]))?.matrix,
        Mechanism::Mar => {
            let k = mar_patterns.unwrap_or_else(|| default_n_patterns(complete.n_cols()));
            let spec = random_mar_spec(complete.n_cols(), k, p_miss, seed::derive(seed_value, &[11]));
            ampute_mar(complete, &spec, seed::derive(seed_value, &[12]))?
        }
        Mechanism::Spiral => ampute_spiral(complete, p_miss, seed::derive(seed_value, &[13]))?,
    })
}

fn restrict_complete(complete: &CompleteMatrix, rows: &[usize]) -> CompleteMatrix {
    let values: Vec<f64> = rows
        .iter()
        .flat_map(|&r| complete.row(r).iter().copied())
        .collect();
    CompleteMatrix::new(
        complete.column_names().to_vec(),
        complete.columns().to_vec(),
        values,
    )
    .expect("row restriction preserves validity")
}

fn impute_with(
    method: Method,
    matrix: &IncompleteMatrix,
    n: usize,
    seed_value: u64,
) -> Result<ImputationSet, CliError> {
    crate::run_method(method, matrix, n, seed_value, 5, 5)
}

/// Score a hand-built imputation set whose completions all equal the truth;
/// replicating the completion averages the estimator's own randomness the
/// same way the methods' scores are averaged over their completions.
fn score_truth(
    truth: &CompleteMatrix,
    mask: &IncompleteMatrix,
    n: usize,
    params: &ScoreParams,
    classifier: &ForestClassifier,
) -> Result<ScoreReport, CliError> {
    let set = ImputationSet::new(mask, vec![truth.clone(); n], "truth", params.seed)?;
    Ok(dr_iscore(mask, &set, params, classifier)?)
}

pub fn run(config: Config) -> Result<ExitCode, CliError> {
    let complete = crate::util::load_complete(&config.input)?;
    let n_rows = complete.n_rows();
    let mask = apply_mechanism(
        &complete,
        config.mechanism,
        config.p_miss,
        config.seed,
        config.mar_patterns,
    )?;
    let params = config.params.build(seed::derive(config.seed, &[20]))?;
    let classifier = ForestClassifier::from_params(&params);
    let n_imp = config.n_imputations;

    let true_full = score_truth(&complete, &mask, n_imp, &params, &classifier)?;

    // the same B half-splits are used for every method
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..config.b_reps)
        .map(|j| half_split(n_rows, seed::derive(config.seed, &[21]), j as u64))
        .collect();

    // true-data score per half, shared across methods; replicates where any
    // score fails are dropped consistently
    let mut true_halves: Vec<Option<(f64, f64)>> = Vec::with_capacity(splits.len());
    for (first, second) in &splits {
        let value = |rows: &[usize]| -> Option<f64> {
            let mask_sub = mask.restrict_rows(rows);
            let truth_sub = restrict_complete(&complete, rows);
            score_truth(&truth_sub, &mask_sub, n_imp, &params, &classifier)
                .ok()
                .map(|r| r.score)
        };
        true_halves.push(match (value(first), value(second)) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        });
    }

    let mut method_rows = Vec::new();
    let mut coverage_reports = Vec::new();
    let mut b_effective_overall = config.b_reps;
    for (idx, &method) in config.methods.iter().enumerate() {
        let method_seed = seed::derive(config.seed, &[30, idx as u64]);
        let imp = impute_with(method, &mask, n_imp, method_seed)?;
        let full = dr_iscore(&mask, &imp, &params, &classifier)?;

        // half scores with re-imputation
        let mut score_pairs = Vec::new();
        let mut diff_pairs = Vec::new();
        for (j, (first, second)) in splits.iter().enumerate() {
            let Some((t1, t2)) = true_halves[j] else { continue };
            let value = |rows: &[usize]| -> Option<f64> {
                let mask_sub = mask.restrict_rows(rows);
                let imp_sub = impute_with(method, &mask_sub, n_imp, method_seed).ok()?;
                dr_iscore(&mask_sub, &imp_sub, &params, &classifier)
                    .ok()
                    .map(|r| r.score)
            };
            if let (Some(s1), Some(s2)) = (value(first), value(second)) {
                score_pairs.push((s1, s2));
                diff_pairs.push((s1 - t1, s2 - t2));
            }
        }
        if score_pairs.len() < 5 {
            return Err(CliError::Degenerate(format!(
                "only {} of {} jackknife replicates succeeded for {}",
                score_pairs.len(),
                config.b_reps,
                method.name()
            )));
        }
        b_effective_overall = b_effective_overall.min(score_pairs.len());

        let variance = recompute_variance(&score_pairs);
        let (ci_lo, ci_hi) = confidence_interval(full.score, variance, config.alpha);
        let d_h = full.score - true_full.score;
        let sigma = recompute_variance(&diff_pairs).sqrt();
        let (p_sup, p_inf) = if sigma == 0.0 {
            match d_h.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => (0.0, 1.0),
                Some(std::cmp::Ordering::Less) => (1.0, 0.0),
                _ => (0.5, 0.5),
            }
        } else {
            let z = d_h / sigma;
            (1.0 - normal_cdf(z), normal_cdf(z))
        };

        let cov_imp = impute_with(
            method,
            &mask,
            config.coverage_imputations,
            seed::derive(config.seed, &[33, idx as u64]),
        )?;
        let coverage = coverage_width(&cov_imp, &complete, &mask)?;
        let rmse = match neg_rmse(&imp, &complete, &mask) {
            Ok(v) => Some(v),
            Err(EvalError::NoMissingNumericCells) => None,
            Err(e) => return Err(e.into()),
        };

        coverage_reports.push(coverage);
        method_rows.push((method.name(), full.score, variance, ci_lo, ci_hi, d_h, sigma, p_sup, p_inf, rmse));
    }

    normalize_widths(&mut coverage_reports);
    let scores: Vec<f64> = method_rows.iter().map(|r| r.1).collect();
    let ranks = rank_methods(&scores);

    let methods: Vec<MethodReport> = method_rows
        .iter()
        .zip(&coverage_reports)
        .zip(&ranks)
        .map(|((row, cov), &rank)| MethodReport {
            method: row.0,
            score: row.1,
            variance: row.2,
            ci_lo: row.3,
            ci_hi: row.4,
            d_h: row.5,
            sigma: row.6,
            p_superiority: row.7,
            p_inferiority: row.8,
            bucket: p_value_bucket(row.7),
            coverage: cov.coverage,
            raw_width: cov.raw_width,
            normalized_width: cov.normalized_width.expect("normalized above"),
            quadrant: cov.quadrant().expect("normalized above"),
            neg_rmse: row.9,
            rank,
        })
        .collect();
    let scatter: Vec<ScatterPoint> = methods
        .iter()
        .map(|m| ScatterPoint {
            method: m.method,
            coverage: m.coverage,
            width_norm: m.normalized_width,
            quadrant: m.quadrant,
        })
        .collect();

    let report = ValidateReport {
        schema_version: SCHEMA_VERSION,
        mechanism: mechanism_name(config.mechanism),
        p_miss: config.p_miss,
        seed: config.seed,
        n_rows,
        n_cols: complete.n_cols(),
        true_score: true_full.score,
        b_effective: b_effective_overall,
        methods,
        scatter,
    };

    let json_path = format!("{}.json", config.out_prefix);
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(|e| CliError::input(format!("cannot write {json_path}: {e}")))?;

    let csv_path = format!("{}.csv", config.out_prefix);
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| CliError::input(format!("cannot write {csv_path}: {e}")))?;
    writer
        .write_record([
            "method", "score", "ci_lo", "ci_hi", "coverage", "width_norm", "neg_rmse", "rank",
        ])
        .and_then(|()| {
            for m in &report.methods {
                writer.write_record([
                    m.method.to_string(),
                    m.score.to_string(),
                    m.ci_lo.to_string(),
                    m.ci_hi.to_string(),
                    m.coverage.to_string(),
                    m.normalized_width.to_string(),
                    m.neg_rmse.map(|v| v.to_string()).unwrap_or_default(),
                    m.rank.to_string(),
                ])?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliError::input(format!("cannot write {csv_path}: {e}")))?;

    for m in &report.methods {
        println!(
            "{}: score {:.4} [{:.4}, {:.4}] D {:.4} p_sup {:.3} p_inf {:.3} rank {}",
            m.method, m.score, m.ci_lo, m.ci_hi, m.d_h, m.p_superiority, m.p_inferiority, m.rank
        );
    }
    println!("wrote {csv_path} and {json_path}");
    Ok(ExitCode::SUCCESS)
}
