//! The density-ratio imputation score estimator.
//!
//! For every completion and every missingness-pattern group, projections of
//! the variable space are sampled and a probability classifier is trained to
//! discriminate rows that are complete on the projection (the reference
//! class) from the group's imputed rows. Each held-out imputed row
//! contributes the truncated log-ratio of the predicted class probabilities;
//! contributions are averaged over rows, projections, patterns and
//! completions. High scores mean the classifier cannot tell imputations from
//! complete observations.
//!
//! The classifier is pluggable through [`ProbClassifier`]; the shipped
//! implementation is the probability forest. Training sets are balanced to
//! equal class counts so the classifier posterior coincides with the density
//! ratio.

use crate::data::{FeatureKind, IncompleteMatrix, Pattern, PatternGroup, Projection, Table};
use crate::forest::{self, ForestError, ForestModel, ForestParams};
use crate::impute::{check_coupling, ImputationSet, ImputeError};
use crate::inference::{confidence_interval, jackknife_variance, InferenceError};
use crate::projection::{default_num_proj, sample_projections, ProjectionError, ProjectionMode};
use crate::seed::{self, stream};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

pub const DEFAULT_TAU: f64 = 0.75;
pub const DEFAULT_TRUNCATION_EPS: f64 = 1e-9;

/// Key used for the merged group of single-row patterns in per-pattern maps.
pub const SINGLETON_KEY: &str = "singletons";

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("nothing to score: the dataset has no incomplete rows")]
    NothingToScore,
    #[error("invalid score parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Coupling(#[from] ImputeError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("the {0} class is empty")]
    EmptyClass(&'static str),
    #[error("every pattern group was skipped: no complete reference rows on any sampled projection")]
    AllGroupsSkipped,
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Estimator parameters with the documented defaults.
#[derive(Debug, Clone)]
pub struct ScoreParams {
    /// Projections per pattern group; `None` picks the dimension-adaptive
    /// default (50 / 100 / 200).
    pub num_proj: Option<usize>,
    pub num_trees_per_proj: usize,
    pub min_node_size: usize,
    /// Class-balance threshold: when the imputed class is smaller than
    /// `tau` times the reference class, imputed rows of other patterns are
    /// pooled in before upsampling.
    pub tau: f64,
    /// Predicted probabilities are clamped to
    /// `[truncation_eps, 1 - truncation_eps]` before taking log-ratios.
    pub truncation_eps: f64,
    pub projection_mode: ProjectionMode,
    pub seed: u64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            num_proj: None,
            num_trees_per_proj: forest::DEFAULT_NUM_TREES,
            min_node_size: forest::DEFAULT_MIN_NODE_SIZE,
            tau: DEFAULT_TAU,
            truncation_eps: DEFAULT_TRUNCATION_EPS,
            projection_mode: ProjectionMode::Unrestricted,
            seed: 0,
        }
    }
}

impl ScoreParams {
    fn validate(&self) -> Result<(), ScoreError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(ScoreError::InvalidParams(format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        if !(self.truncation_eps > 0.0 && self.truncation_eps < 0.5) {
            return Err(ScoreError::InvalidParams(format!(
                "truncation_eps must lie in (0, 0.5), got {}",
                self.truncation_eps
            )));
        }
        if self.num_trees_per_proj < 1 || self.min_node_size < 1 || self.num_proj == Some(0) {
            return Err(ScoreError::InvalidParams(
                "counts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Score value with its decomposition and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub score: f64,
    /// One score per completion; their mean is `score`.
    pub per_imputation: Vec<f64>,
    /// Pattern bitstring (or [`SINGLETON_KEY`]) to its contribution averaged
    /// over completions.
    pub per_pattern: BTreeMap<String, f64>,
    pub n_projections_used: usize,
    /// Sampled projections dropped for lack of complete reference rows.
    pub n_projections_skipped: usize,
    pub n_singleton_patterns_merged: usize,
    /// (completion, group) units whose every projection was skipped.
    pub n_groups_skipped: usize,
    pub variance: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

/// Clamp a probability to `[eps, 1 - eps]`.
pub fn truncate_prob(p: f64, eps: f64) -> f64 {
    p.max(eps).min(1.0 - eps)
}

/// `log(p / (1 - p))`: the log density ratio of an already-truncated
/// classifier probability.
pub fn log_density_ratio(p_hat: f64) -> f64 {
    (p_hat / (1.0 - p_hat)).ln()
}

/// Everything a classifier sees when fitted for one work item.
pub struct TrainContext<'a> {
    /// Distinct training rows on the projection.
    pub features: &'a Table,
    /// 1 marks reference rows (complete on the projection), 0 imputed rows.
    pub labels: &'a [u8],
    pub kinds: &'a [FeatureKind],
    /// Balancing multiplicities; row `r` counts `multiplicity[r]` times.
    pub multiplicity: &'a [u32],
    pub projection: &'a Projection,
    pub seed: u64,
}

/// Fitted conditional class-1 probability.
pub trait Probability: Send + Sync {
    fn prob_real(&self, row: &[f64]) -> f64;
}

/// Classifier factory used per (completion, group, half, projection) item.
pub trait ProbClassifier: Sync {
    fn fit(&self, ctx: &TrainContext<'_>) -> Result<Box<dyn Probability>, ScoreError>;
}

impl Probability for ForestModel {
    fn prob_real(&self, row: &[f64]) -> f64 {
        self.predict_prob(row)
    }
}

/// The shipped probability-forest classifier.
#[derive(Debug, Clone)]
pub struct ForestClassifier {
    pub num_trees: usize,
    pub min_node_size: usize,
}

impl ForestClassifier {
    pub fn from_params(params: &ScoreParams) -> Self {
        ForestClassifier {
            num_trees: params.num_trees_per_proj,
            min_node_size: params.min_node_size,
        }
    }
}

impl ProbClassifier for ForestClassifier {
    fn fit(&self, ctx: &TrainContext<'_>) -> Result<Box<dyn Probability>, ScoreError> {
        let model = forest::fit_forest_weighted(
            ctx.features,
            ctx.labels,
            ctx.kinds,
            ctx.multiplicity,
            &ForestParams {
                num_trees: self.num_trees,
                min_node_size: self.min_node_size,
                bootstrap: true,
                seed: ctx.seed,
            },
        )?;
        Ok(Box::new(model))
    }
}

/// Rows with class labels after balancing; `imputed_rows` may include pooled
/// rows of other patterns, all of which take the completion's values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalancedSample {
    pub real_rows: Vec<usize>,
    pub imputed_rows: Vec<usize>,
}

/// Equalize class counts by upsampling with replacement.
///
/// When the imputed class is smaller than `tau` times the reference class,
/// rows are first drawn (with replacement) from `other_pattern_pool` until
/// the imputed class reaches `ceil(tau * reference)`, and only then
/// upsampled to equality. A small reference class is plainly upsampled; no
/// pool exists for real rows.
pub fn balance_classes(
    real_rows: &[usize],
    imputed_rows: &[usize],
    other_pattern_pool: &[usize],
    tau: f64,
    seed_value: u64,
) -> Result<BalancedSample, ScoreError> {
    if real_rows.is_empty() {
        return Err(ScoreError::EmptyClass("reference"));
    }
    if imputed_rows.is_empty() {
        return Err(ScoreError::EmptyClass("imputed"));
    }
    let mut rng = seed::rng(seed_value, &[stream::SCORE_BALANCE]);
    let n_real = real_rows.len();
    let n_imp = imputed_rows.len();

    let upsample = |base: &[usize], target: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let mut out = base.to_vec();
        while out.len() < target {
            out.push(base[rng.gen_range(0..base.len())]);
        }
        out
    };

    if n_imp < n_real {
        let mut base = imputed_rows.to_vec();
        let tau_floor = (tau * n_real as f64).ceil() as usize;
        if (n_imp as f64) < tau * n_real as f64 && !other_pattern_pool.is_empty() {
            while base.len() < tau_floor {
                base.push(other_pattern_pool[rng.gen_range(0..other_pattern_pool.len())]);
            }
        }
        let imputed = upsample(&base, n_real, &mut rng);
        Ok(BalancedSample {
            real_rows: real_rows.to_vec(),
            imputed_rows: imputed,
        })
    } else if n_real < n_imp {
        let real = upsample(real_rows, n_imp, &mut rng);
        Ok(BalancedSample {
            real_rows: real,
            imputed_rows: imputed_rows.to_vec(),
        })
    } else {
        Ok(BalancedSample {
            real_rows: real_rows.to_vec(),
            imputed_rows: imputed_rows.to_vec(),
        })
    }
}

/// One scoring unit: a pattern group or the merged singleton meta-group.
struct ScoringGroup {
    /// Key in the per-pattern map.
    key: String,
    rows: Vec<usize>,
    /// Regular groups carry their single pattern; the meta-group lists the
    /// member patterns of its rows (parallel to `rows`).
    kind: GroupKind,
}

enum GroupKind {
    Regular(Pattern),
    /// Merged single-row patterns: train and test on all rows, no split.
    Singletons(Vec<Pattern>),
}

fn build_scoring_groups(groups: Vec<PatternGroup>) -> (Vec<ScoringGroup>, usize) {
    let mut out = Vec::new();
    let mut single_rows = Vec::new();
    let mut single_patterns = Vec::new();
    for g in groups {
        if g.rows.len() == 1 {
            single_rows.push(g.rows[0]);
            single_patterns.push(g.pattern);
        } else {
            out.push(ScoringGroup {
                key: g.pattern.to_string(),
                rows: g.rows,
                kind: GroupKind::Regular(g.pattern),
            });
        }
    }
    let n_merged = single_patterns.len();
    if !single_rows.is_empty() {
        out.push(ScoringGroup {
            key: SINGLETON_KEY.to_string(),
            rows: single_rows,
            kind: GroupKind::Singletons(single_patterns),
        });
    }
    (out, n_merged)
}

/// Per-(completion, group) outcome collected from the parallel phase.
struct GroupOutcome {
    value: Option<f64>,
    used: usize,
    skipped: usize,
}

/// The score estimator.
///
/// Work decomposes into independent (completion, group) units whose
/// sub-seeds derive from `params.seed` and the unit coordinates, so results
/// are identical under any scheduling. Aggregation runs serially in
/// canonical order.
pub fn dr_iscore(
    x: &IncompleteMatrix,
    imp: &ImputationSet,
    params: &ScoreParams,
    classifier: &dyn ProbClassifier,
) -> Result<ScoreReport, ScoreError> {
    params.validate()?;
    for (j, comp) in imp.completions().iter().enumerate() {
        check_coupling(x, comp, j)?;
    }
    let (raw_groups, _reference) = x.pattern_groups();
    if raw_groups.is_empty() {
        return Err(ScoreError::NothingToScore);
    }
    let (groups, n_merged) = build_scoring_groups(raw_groups);
    let num_proj = params.num_proj.unwrap_or_else(|| default_num_proj(x.n_cols()));
    let n_comp = imp.n_imputations();

    // rows outside each group, for the balancing pool
    let group_row_sets: Vec<Vec<bool>> = groups
        .iter()
        .map(|g| {
            let mut inside = vec![false; x.n_rows()];
            for &r in &g.rows {
                inside[r] = true;
            }
            inside
        })
        .collect();
    let incomplete_rows: Vec<usize> = groups.iter().flat_map(|g| g.rows.iter().copied()).collect();

    let units: Vec<(usize, usize)> = (0..n_comp)
        .flat_map(|j| (0..groups.len()).map(move |g| (j, g)))
        .collect();
    let outcomes: Vec<Result<GroupOutcome, ScoreError>> = units
        .par_iter()
        .map(|&(j, g)| {
            score_group(
                x,
                imp,
                params,
                classifier,
                num_proj,
                j,
                g,
                &groups[g],
                &group_row_sets[g],
                &incomplete_rows,
            )
        })
        .collect();

    // canonical-order aggregation; first error (in unit order) wins
    let mut per_unit: Vec<GroupOutcome> = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        per_unit.push(outcome?);
    }

    let mut per_imputation = Vec::with_capacity(n_comp);
    let mut pattern_sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut groups_skipped = 0usize;
    for j in 0..n_comp {
        let mut sum = 0.0;
        let mut count = 0usize;
        for g in 0..groups.len() {
            let outcome = &per_unit[j * groups.len() + g];
            used += outcome.used;
            skipped += outcome.skipped;
            match outcome.value {
                Some(v) => {
                    sum += v;
                    count += 1;
                    let entry = pattern_sums.entry(groups[g].key.clone()).or_insert((0.0, 0));
                    entry.0 += v;
                    entry.1 += 1;
                }
                None => groups_skipped += 1,
            }
        }
        if count == 0 {
            return Err(ScoreError::AllGroupsSkipped);
        }
        per_imputation.push(sum / count as f64);
    }
    let score = per_imputation.iter().sum::<f64>() / per_imputation.len() as f64;
    let per_pattern = pattern_sums
        .into_iter()
        .map(|(k, (sum, count))| (k, sum / count as f64))
        .collect();
    Ok(ScoreReport {
        score,
        per_imputation,
        per_pattern,
        n_projections_used: used,
        n_projections_skipped: skipped,
        n_singleton_patterns_merged: n_merged,
        n_groups_skipped: groups_skipped,
        variance: None,
        ci: None,
    })
}

/// Tags for the per-unit seed streams.
mod tag {
    pub const PROJ: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const BALANCE: u64 = 3;
    pub const FIT: u64 = 4;
    pub const META_MEMBER: u64 = 5;
}

#[allow(clippy::too_many_arguments)]
fn score_group(
    x: &IncompleteMatrix,
    imp: &ImputationSet,
    params: &ScoreParams,
    classifier: &dyn ProbClassifier,
    num_proj: usize,
    j: usize,
    g: usize,
    group: &ScoringGroup,
    inside_group: &[bool],
    incomplete_rows: &[usize],
) -> Result<GroupOutcome, ScoreError> {
    let completion = &imp.completions()[j];
    let (ju, gu) = (j as u64, g as u64);

    // sampled projections for this unit
    let projections: Vec<Projection> = match &group.kind {
        GroupKind::Regular(pattern) => sample_projections(
            pattern,
            num_proj,
            &params.projection_mode,
            seed::derive(params.seed, &[stream::PROJECTION, tag::PROJ, ju, gu]),
        )?,
        GroupKind::Singletons(patterns) => {
            let mut rng = seed::rng(
                params.seed,
                &[stream::PROJECTION, tag::META_MEMBER, ju, gu],
            );
            let mut projs = Vec::with_capacity(num_proj);
            for k in 0..num_proj {
                let member = rng.gen_range(0..patterns.len());
                let one = sample_projections(
                    &patterns[member],
                    1,
                    &params.projection_mode,
                    seed::derive(params.seed, &[stream::PROJECTION, tag::PROJ, ju, gu, k as u64]),
                )?;
                projs.extend(one);
            }
            projs
        }
    };

    // train/test halves; the merged singleton group trains and tests on all
    // of its rows
    let halves: Vec<(Vec<usize>, Vec<usize>)> = match &group.kind {
        GroupKind::Regular(_) => {
            let mut rows = group.rows.clone();
            let mut rng = seed::rng(params.seed, &[stream::SCORE_SPLIT, tag::SPLIT, ju, gu]);
            rows.shuffle(&mut rng);
            let cut = rows.len().div_ceil(2);
            let (mut a, mut b) = (rows[..cut].to_vec(), rows[cut..].to_vec());
            a.sort_unstable();
            b.sort_unstable();
            vec![(a.clone(), b.clone()), (b, a)]
        }
        GroupKind::Singletons(_) => vec![(group.rows.clone(), group.rows.clone())],
    };

    // deduplicate sampled projections; repeats share one fitted value
    let mut order: Vec<(Vec<usize>, Pattern)> = Vec::new();
    let mut multiplicity: BTreeMap<(Vec<usize>, Pattern), usize> = BTreeMap::new();
    for p in &projections {
        let key = (p.indices().to_vec(), p.projected_pattern().clone());
        let entry = multiplicity.entry(key.clone()).or_insert(0);
        if *entry == 0 {
            order.push(key);
        }
        *entry += 1;
    }

    let mut weighted_sum = 0.0;
    let mut weight_used = 0usize;
    let mut skipped = 0usize;
    for (a_idx, (indices, m_a)) in order.iter().enumerate() {
        let mult = multiplicity[&(indices.clone(), m_a.clone())];
        // reference class: rows complete on A, never rows of this group
        let real_rows: Vec<usize> = x
            .complete_on(indices)
            .into_iter()
            .filter(|&r| !inside_group[r])
            .collect();
        if real_rows.is_empty() {
            skipped += mult;
            continue;
        }
        // pool: other incomplete rows that are themselves incomplete on A
        let pool: Vec<usize> = incomplete_rows
            .iter()
            .copied()
            .filter(|&r| {
                !inside_group[r] && indices.iter().any(|&c| x.cell(r, c).is_missing())
            })
            .collect();
        let projection = Projection::new(indices.clone(), &pattern_for(m_a, indices, x.n_cols()));
        let kinds = x.feature_kinds(indices);

        let mut term_sum = 0.0;
        for (l, (train, test)) in halves.iter().enumerate() {
            let lu = l as u64;
            let au = a_idx as u64;
            let balanced = balance_classes(
                &real_rows,
                train,
                &pool,
                params.tau,
                seed::derive(params.seed, &[stream::SCORE_BALANCE, tag::BALANCE, ju, gu, lu, au]),
            )?;
            // upsampled rows are duplicates; train on distinct rows with
            // multiplicities
            let (real_ids, real_mult) = run_length(&balanced.real_rows);
            let (imp_ids, imp_mult) = run_length(&balanced.imputed_rows);
            let real_table = x
                .project_rows(indices, &real_ids)
                .expect("reference rows are complete on the projection");
            let imputed_table = x.project_rows_with(indices, &imp_ids, completion);
            let n_real = real_table.n_rows();
            let n_imp = imputed_table.n_rows();
            let mut values =
                Vec::with_capacity((n_real + n_imp) * indices.len());
            values.extend_from_slice(real_table.values());
            values.extend_from_slice(imputed_table.values());
            let features = Table::from_rows(indices.len(), values);
            let mut labels = vec![1u8; n_real];
            labels.extend(std::iter::repeat(0u8).take(n_imp));
            let mut multiplicity = real_mult;
            multiplicity.extend_from_slice(&imp_mult);

            let ctx = TrainContext {
                features: &features,
                labels: &labels,
                kinds: &kinds,
                multiplicity: &multiplicity,
                projection: &projection,
                seed: seed::derive(params.seed, &[stream::FOREST, tag::FIT, ju, gu, lu, au]),
            };
            let model = classifier.fit(&ctx)?;

            let eval_table = x.project_rows_with(indices, test, completion);
            for r in 0..eval_table.n_rows() {
                let p_hat = truncate_prob(model.prob_real(eval_table.row(r)), params.truncation_eps);
                term_sum += log_density_ratio(p_hat);
            }
            if halves.len() == 1 {
                // singleton meta-group: the single pass already covered
                // every row
                break;
            }
        }
        // across both halves every group row was evaluated exactly once
        let value = term_sum / group.rows.len() as f64;
        weighted_sum += mult as f64 * value;
        weight_used += mult;
    }

    if weight_used == 0 {
        return Ok(GroupOutcome {
            value: None,
            used: 0,
            skipped,
        });
    }
    Ok(GroupOutcome {
        value: Some(weighted_sum / weight_used as f64),
        used: weight_used,
        skipped,
    })
}

/// Collapse a row list with repeats into sorted distinct ids and counts.
fn run_length(rows: &[usize]) -> (Vec<usize>, Vec<u32>) {
    let mut sorted = rows.to_vec();
    sorted.sort_unstable();
    let mut ids = Vec::with_capacity(sorted.len());
    let mut counts: Vec<u32> = Vec::with_capacity(sorted.len());
    for &r in &sorted {
        if ids.last() == Some(&r) {
            *counts.last_mut().unwrap() += 1;
        } else {
            ids.push(r);
            counts.push(1);
        }
    }
    (ids, counts)
}

/// Rebuild a full-length pattern that projects onto `m_a` over `indices`
/// (missing exactly at the projected-missing positions).
fn pattern_for(m_a: &Pattern, indices: &[usize], d: usize) -> Pattern {
    let mut bits = vec![false; d];
    for (k, &c) in indices.iter().enumerate() {
        bits[c] = m_a.is_missing(k);
    }
    Pattern::new(bits)
}

/// Score the fully observed data itself: the imputation whose single
/// completion is the complete matrix underlying the mask.
pub fn score_true_data(
    x_complete: &crate::data::CompleteMatrix,
    mask: &IncompleteMatrix,
    params: &ScoreParams,
    classifier: &dyn ProbClassifier,
) -> Result<ScoreReport, ScoreError> {
    let imp = ImputationSet::new(mask, vec![x_complete.clone()], "truth", params.seed)?;
    dr_iscore(mask, &imp, params, classifier)
}

/// Point score plus a jackknife confidence interval from `b` half-splits of
/// the rows (completions are restricted alongside the mask).
pub fn dr_iscore_with_ci(
    x: &IncompleteMatrix,
    imp: &ImputationSet,
    params: &ScoreParams,
    classifier: &dyn ProbClassifier,
    b: usize,
    alpha: f64,
) -> Result<ScoreReport, ScoreError> {
    let mut report = dr_iscore(x, imp, params, classifier)?;
    let jk = jackknife_variance(x.n_rows(), b, params.seed, |rows| {
        let x_sub = x.restrict_rows(rows);
        let imp_sub = imp.restrict_rows(rows, x);
        dr_iscore(&x_sub, &imp_sub, params, classifier).map(|r| r.score)
    })?;
    report.variance = Some(jk.variance);
    report.ci = Some(confidence_interval(report.score, jk.variance, alpha));
    Ok(report)
}
