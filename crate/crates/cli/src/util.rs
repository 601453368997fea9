//! Shared helpers: complete-CSV loading, imputation file resolution, and
//! report serialization.

use crate::error::CliError;
use iscore::score::ScoreReport;
use iscore::{CompleteMatrix, IncompleteMatrix};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Load a CSV that must contain no missing cells.
pub fn load_complete(path: &Path) -> Result<CompleteMatrix, CliError> {
    let matrix = iscore::io::load_csv(path, iscore::io::DEFAULT_MISSING_TOKEN)?;
    incomplete_to_complete(&matrix)
}

pub fn incomplete_to_complete(matrix: &IncompleteMatrix) -> Result<CompleteMatrix, CliError> {
    let mut values = Vec::with_capacity(matrix.n_rows() * matrix.n_cols());
    for r in 0..matrix.n_rows() {
        for c in 0..matrix.n_cols() {
            match matrix.cell(r, c).value() {
                Some(v) => values.push(v),
                None => {
                    return Err(CliError::input(format!(
                        "input must be fully observed but cell (row {r}, col {c}) is missing"
                    )))
                }
            }
        }
    }
    Ok(CompleteMatrix::new(
        matrix.column_names().to_vec(),
        matrix.columns().to_vec(),
        values,
    )?)
}

/// Resolve `--imputations`: a pattern containing `*` matches file names in
/// its directory; anything else is a file-name prefix. Matches are sorted.
pub fn resolve_imputation_files(spec: &str) -> Result<Vec<PathBuf>, CliError> {
    let path = Path::new(spec);
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let dir = dir.unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::input("empty imputations pattern"))?
        .to_string_lossy()
        .to_string();

    let matches_name: Box<dyn Fn(&str) -> bool> = if name.contains('*') {
        let parts: Vec<String> = name.split('*').map(str::to_string).collect();
        Box::new(move |candidate: &str| wildcard_match(&parts, candidate))
    } else {
        let prefix = name.clone();
        Box::new(move |candidate: &str| candidate.starts_with(&prefix))
    };

    let mut files = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::input(format!("cannot list {}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::input(e.to_string()))?;
        let file_name = entry.file_name().to_string_lossy().to_string();
        if matches_name(&file_name) && entry.path().is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::input(format!(
            "no imputation files match `{spec}`"
        )));
    }
    Ok(files)
}

fn wildcard_match(parts: &[String], candidate: &str) -> bool {
    let mut rest = candidate;
    for (i, part) in parts.iter().enumerate() {
        if i == 0 {
            match rest.strip_prefix(part.as_str()) {
                Some(r) => rest = r,
                None => return false,
            }
        } else if i == parts.len() - 1 {
            return rest.ends_with(part.as_str());
        } else {
            match rest.find(part.as_str()) {
                Some(pos) => rest = &rest[pos + part.len()..],
                None => return false,
            }
        }
    }
    true
}

#[derive(Serialize)]
struct ScoreReportJson<'a> {
    schema_version: u32,
    method: &'a str,
    score: f64,
    per_imputation: &'a [f64],
    per_pattern: &'a BTreeMap<String, f64>,
    n_projections_used: usize,
    n_projections_skipped: usize,
    n_singleton_patterns_merged: usize,
    n_groups_skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_hi: Option<f64>,
}

/// Deterministic pretty JSON mirroring the score report fields.
pub fn score_report_json(method: &str, report: &ScoreReport) -> String {
    let json = ScoreReportJson {
        schema_version: SCHEMA_VERSION,
        method,
        score: report.score,
        per_imputation: &report.per_imputation,
        per_pattern: &report.per_pattern,
        n_projections_used: report.n_projections_used,
        n_projections_skipped: report.n_projections_skipped,
        n_singleton_patterns_merged: report.n_singleton_patterns_merged,
        n_groups_skipped: report.n_groups_skipped,
        variance: report.variance,
        ci_lo: report.ci.map(|c| c.0),
        ci_hi: report.ci.map(|c| c.1),
    };
    serde_json::to_string_pretty(&json).expect("report serializes")
}
