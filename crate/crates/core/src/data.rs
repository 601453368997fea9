//! Incomplete data matrices, missingness patterns, and variable-subset
//! projections.
//!
//! An [`IncompleteMatrix`] is the observed sample: an `n x d` grid of cells,
//! each either `Present(value)` or `Missing`, with a per-column kind (numeric
//! or categorical). Rows are grouped by their missingness pattern and can be
//! projected onto index subsets to recover complete lower-dimensional
//! samples.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cell grid has {got} entries, expected {expected} ({n_rows} rows x {n_cols} cols)")]
    DimensionMismatch {
        got: usize,
        expected: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("invalid categorical code {code} at row {row}, column {col} ({n_levels} levels)")]
    InvalidCategoryCode {
        row: usize,
        col: usize,
        code: f64,
        n_levels: usize,
    },
    #[error("row {row} has all cells missing")]
    FullyMissingRow { row: usize },
    #[error("column {col} selected for row {row} is missing and no imputed value was supplied")]
    MissingCellSelected { row: usize, col: usize },
    #[error("duplicate header name `{name}`")]
    DuplicateHeader { name: String },
    #[error("column `{column}` mixes numeric and non-numeric values (first offender row {row})")]
    MixedTypeColumn { column: String, row: usize },
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("file has no header row")]
    MissingHeader,
    #[error("unknown categorical label `{label}` in column `{column}` at row {row}")]
    UnknownLabel {
        column: String,
        label: String,
        row: usize,
    },
    #[error("column count mismatch: file has {got} columns, schema expects {expected}")]
    SchemaMismatch { got: usize, expected: usize },
    #[error("completion contains a missing marker at row {row}, column {col}")]
    MissingInCompletion { row: usize, col: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single cell of an incomplete matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    /// Observed value: a finite real for numeric columns, an integer level
    /// code for categorical ones.
    Present(f64),
    Missing,
}

impl Cell {
    pub fn is_missing(self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Present(v) => Some(v),
            Cell::Missing => None,
        }
    }
}

/// Column type of a data matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Numeric,
    /// Categorical with a stable label dictionary; code `i` means `levels[i]`.
    Categorical { levels: Vec<String> },
}

impl ColumnKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnKind::Categorical { .. })
    }

    pub fn n_levels(&self) -> Option<usize> {
        match self {
            ColumnKind::Numeric => None,
            ColumnKind::Categorical { levels } => Some(levels.len()),
        }
    }

    pub fn feature_kind(&self) -> FeatureKind {
        match self {
            ColumnKind::Numeric => FeatureKind::Numeric,
            ColumnKind::Categorical { levels } => FeatureKind::Categorical {
                n_levels: levels.len(),
            },
        }
    }
}

/// Column type as seen by classifiers working on projected value tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    Categorical { n_levels: usize },
}

/// Missingness pattern: one bit per column, `true` = missing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    bits: Vec<bool>,
}

impl Pattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Pattern { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_missing(&self, j: usize) -> bool {
        self.bits[j]
    }

    /// Number of missing coordinates.
    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Index set of missing coordinates (O_m^c), ascending.
    pub fn missing_indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&j| self.bits[j]).collect()
    }

    /// Index set of observed coordinates (O_m), ascending.
    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&j| !self.bits[j]).collect()
    }

    /// Valid group patterns have at least one missing and one observed
    /// coordinate.
    pub fn is_mixed(&self) -> bool {
        let w = self.weight();
        w >= 1 && w < self.bits.len()
    }

    /// Restrict the pattern to the given sorted column indices.
    pub fn project(&self, indices: &[usize]) -> Pattern {
        Pattern::new(indices.iter().map(|&j| self.bits[j]).collect())
    }

    /// Coordinate-wise union of missingness (missing where either is).
    pub fn union(&self, other: &Pattern) -> Pattern {
        debug_assert_eq!(self.len(), other.len());
        Pattern::new(
            self.bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a || b)
                .collect(),
        )
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Rows of the source matrix sharing one missingness pattern.
#[derive(Debug, Clone)]
pub struct PatternGroup {
    pub pattern: Pattern,
    /// Sorted row indices carrying the pattern.
    pub rows: Vec<usize>,
}

/// A sampled variable subset together with its induced projected pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    indices: Vec<usize>,
    projected_pattern: Pattern,
}

impl Projection {
    /// Build a projection onto `indices` for rows carrying pattern `m`.
    /// `indices` must be sorted, unique and nonempty.
    pub fn new(indices: Vec<usize>, m: &Pattern) -> Self {
        debug_assert!(!indices.is_empty());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        let projected_pattern = m.project(&indices);
        Projection {
            indices,
            projected_pattern,
        }
    }

    /// The full projection A = {1..d}.
    pub fn full(d: usize, m: &Pattern) -> Self {
        Self::new((0..d).collect(), m)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn projected_pattern(&self) -> &Pattern {
        &self.projected_pattern
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Dense `n x k` value table produced by projecting rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl Table {
    pub fn from_rows(n_cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len() % n_cols.max(1), 0);
        Table {
            n_rows: if n_cols == 0 { 0 } else { values.len() / n_cols },
            n_cols,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Fully observed matrix sharing the schema of an incomplete source.
/// Categorical values are stored as level codes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteMatrix {
    n_rows: usize,
    n_cols: usize,
    columns: Vec<ColumnKind>,
    column_names: Vec<String>,
    values: Vec<f64>,
}

impl CompleteMatrix {
    pub fn new(
        column_names: Vec<String>,
        columns: Vec<ColumnKind>,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        let n_cols = columns.len();
        assert_eq!(column_names.len(), n_cols);
        if n_cols == 0 || values.len() % n_cols != 0 {
            return Err(DataError::DimensionMismatch {
                got: values.len(),
                expected: values.len() / n_cols.max(1) * n_cols,
                n_rows: values.len() / n_cols.max(1),
                n_cols,
            });
        }
        let n_rows = values.len() / n_cols;
        let m = CompleteMatrix {
            n_rows,
            n_cols,
            columns,
            column_names,
            values,
        };
        for r in 0..n_rows {
            for c in 0..n_cols {
                validate_value(m.value(r, c), &m.columns[c], r, c)?;
            }
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn columns(&self) -> &[ColumnKind] {
        &self.columns
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.n_cols + col] = v;
    }

    /// View with every cell present, e.g. for masking by an amputer.
    pub fn cells(&self) -> Vec<Cell> {
        self.values.iter().map(|&v| Cell::Present(v)).collect()
    }
}

fn validate_value(v: f64, kind: &ColumnKind, row: usize, col: usize) -> Result<(), DataError> {
    if !v.is_finite() {
        return Err(DataError::NonFiniteValue { row, col });
    }
    if let ColumnKind::Categorical { levels } = kind {
        if v.fract() != 0.0 || v < 0.0 || v >= levels.len() as f64 {
            return Err(DataError::InvalidCategoryCode {
                row,
                col,
                code: v,
                n_levels: levels.len(),
            });
        }
    }
    Ok(())
}

/// The observed sample: an immutable `n x d` grid of `Present`/`Missing`
/// cells with per-column kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteMatrix {
    n_rows: usize,
    n_cols: usize,
    columns: Vec<ColumnKind>,
    column_names: Vec<String>,
    cells: Vec<Cell>,
}

impl IncompleteMatrix {
    /// Validates dimensions, finiteness of present numerics, and categorical
    /// code ranges. Rows with every cell missing are rejected at CSV load,
    /// not here; the amputers never produce them.
    pub fn new(
        column_names: Vec<String>,
        columns: Vec<ColumnKind>,
        cells: Vec<Cell>,
    ) -> Result<Self, DataError> {
        let n_cols = columns.len();
        assert_eq!(column_names.len(), n_cols);
        if n_cols == 0 || cells.len() % n_cols != 0 {
            return Err(DataError::DimensionMismatch {
                got: cells.len(),
                expected: cells.len() / n_cols.max(1) * n_cols,
                n_rows: cells.len() / n_cols.max(1),
                n_cols,
            });
        }
        let n_rows = cells.len() / n_cols;
        let m = IncompleteMatrix {
            n_rows,
            n_cols,
            columns,
            column_names,
            cells,
        };
        for r in 0..n_rows {
            for c in 0..n_cols {
                if let Cell::Present(v) = m.cell(r, c) {
                    validate_value(v, &m.columns[c], r, c)?;
                }
            }
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn columns(&self) -> &[ColumnKind] {
        &self.columns
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.n_cols + col]
    }

    pub fn n_missing_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_missing()).count()
    }

    /// Missingness pattern of one row.
    pub fn row_pattern(&self, row: usize) -> Pattern {
        Pattern::new(
            (0..self.n_cols)
                .map(|c| self.cell(row, c).is_missing())
                .collect(),
        )
    }

    /// Feature kinds of a projected column subset, in `indices` order.
    pub fn feature_kinds(&self, indices: &[usize]) -> Vec<FeatureKind> {
        indices.iter().map(|&c| self.columns[c].feature_kind()).collect()
    }

    /// Group incomplete rows by distinct missingness pattern.
    ///
    /// Returns the groups ordered by descending size (ties broken by
    /// lexicographic pattern order) and the reference index set of fully
    /// observed rows. Fully observed matrices yield no groups.
    pub fn pattern_groups(&self) -> (Vec<PatternGroup>, Vec<usize>) {
        let mut by_pattern: BTreeMap<Pattern, Vec<usize>> = BTreeMap::new();
        let mut reference = Vec::new();
        for r in 0..self.n_rows {
            let p = self.row_pattern(r);
            if p.weight() == 0 {
                reference.push(r);
            } else {
                by_pattern.entry(p).or_default().push(r);
            }
        }
        let mut groups: Vec<PatternGroup> = by_pattern
            .into_iter()
            .map(|(pattern, rows)| PatternGroup { pattern, rows })
            .collect();
        // BTreeMap iteration already gives lexicographic pattern order; a
        // stable sort by descending size preserves it within ties.
        groups.sort_by(|a, b| b.rows.len().cmp(&a.rows.len()));
        (groups, reference)
    }

    /// Rows with no missing cell among the given columns (M_A = 0).
    pub fn complete_on(&self, indices: &[usize]) -> Vec<usize> {
        (0..self.n_rows)
            .filter(|&r| indices.iter().all(|&c| !self.cell(r, c).is_missing()))
            .collect()
    }

    /// Project the selected rows onto the given sorted column subset.
    ///
    /// Every selected row must be fully observed on the subset; selecting a
    /// missing cell is a contract violation.
    pub fn project_rows(&self, indices: &[usize], rows: &[usize]) -> Result<Table, DataError> {
        let mut values = Vec::with_capacity(rows.len() * indices.len());
        for &r in rows {
            for &c in indices {
                match self.cell(r, c) {
                    Cell::Present(v) => values.push(v),
                    Cell::Missing => return Err(DataError::MissingCellSelected { row: r, col: c }),
                }
            }
        }
        Ok(Table::from_rows(indices.len(), values))
    }

    /// Copy of the matrix keeping only the given rows, in the given order.
    pub fn restrict_rows(&self, rows: &[usize]) -> IncompleteMatrix {
        let cells: Vec<Cell> = rows
            .iter()
            .flat_map(|&r| (0..self.n_cols).map(move |c| self.cell(r, c)))
            .collect();
        IncompleteMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            columns: self.columns.clone(),
            column_names: self.column_names.clone(),
            cells,
        }
    }

    /// Project the selected rows, filling missing cells from a completion.
    /// Observed cells come from the source matrix; by the coupling invariant
    /// the completion agrees on them anyway.
    pub fn project_rows_with(
        &self,
        indices: &[usize],
        rows: &[usize],
        completion: &CompleteMatrix,
    ) -> Table {
        let mut values = Vec::with_capacity(rows.len() * indices.len());
        for &r in rows {
            for &c in indices {
                values.push(match self.cell(r, c) {
                    Cell::Present(v) => v,
                    Cell::Missing => completion.value(r, c),
                });
            }
        }
        Table::from_rows(indices.len(), values)
    }
}

/// Quadrant of the coverage-vs-width unit square (see the evaluation module).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quadrant {
    I,
    II,
    III,
    IV,
}
