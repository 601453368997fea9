//! Scoring missing-value imputations on a single incomplete dataset.
//!
//! The score of an imputation method is an estimate of the expected log
//! density ratio between fully observed data and imputed data, averaged over
//! random projections of the variable space and over missingness patterns.
//! Density ratios come from a probability-forest classifier discriminating
//! complete rows from imputed rows on each projection; higher scores mean
//! the imputations are harder to tell apart from real data. Jackknife
//! half-sampling supplies approximate confidence intervals and propriety
//! hypothesis tests against the true-data score.
//!
//! Modules follow the pipeline: [`data`] holds incomplete matrices and
//! projections, [`ampute`] generates missingness for validation, [`impute`]
//! ships four baseline imputers, [`projection`]/[`forest`]/[`score`]
//! implement the estimator, [`inference`] the uncertainty layer, and
//! [`evaluate`] the downstream coverage/width and RMSE comparisons.

pub mod ampute;
pub mod data;
pub mod evaluate;
pub mod forest;
pub mod impute;
pub mod inference;
pub mod io;
pub mod projection;
pub mod score;
pub mod seed;

pub use data::{Cell, ColumnKind, CompleteMatrix, DataError, IncompleteMatrix, Pattern, Projection};
pub use impute::ImputationSet;
pub use score::{dr_iscore, score_true_data, ScoreParams, ScoreReport};
