//! CSV reading and writing for incomplete matrices.
//!
//! RFC-4180 quoting via the `csv` crate. On read, cells equal to the missing
//! token or empty are treated as missing; a column is numeric when every
//! observed cell parses as a number, categorical when none does, and an error
//! otherwise. Categorical labels get lexicographic integer codes, serialized
//! to a JSON sidecar next to the file on write.

use crate::data::{Cell, ColumnKind, CompleteMatrix, DataError, IncompleteMatrix};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// Missing marker emitted on write; read accepts it plus the empty string.
pub const DEFAULT_MISSING_TOKEN: &str = "NA";

#[derive(Debug, Serialize, Deserialize)]
struct LevelsSidecar {
    schema_version: u32,
    levels: BTreeMap<String, Vec<String>>,
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.is_empty() {
        return Err(DataError::MissingHeader);
    }
    for (i, name) in header.iter().enumerate() {
        if header[..i].contains(name) {
            return Err(DataError::DuplicateHeader { name: name.clone() });
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                row: i,
                got: record.len(),
                expected: header.len(),
            });
        }
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }
    Ok((header, rows))
}

fn is_missing(field: &str, token: &str) -> bool {
    field.is_empty() || field == token
}

/// Load an incomplete matrix, inferring column kinds from the data.
pub fn load_csv(path: impl AsRef<Path>, missing_token: &str) -> Result<IncompleteMatrix, DataError> {
    let (header, rows) = read_records(path.as_ref())?;
    let n_cols = header.len();

    let mut columns = Vec::with_capacity(n_cols);
    for c in 0..n_cols {
        let mut n_numeric = 0usize;
        let mut n_other = 0usize;
        let mut first_other_row = 0usize;
        let mut first_numeric_row = 0usize;
        let mut labels: Vec<String> = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            let field = &row[c];
            if is_missing(field, missing_token) {
                continue;
            }
            if field.parse::<f64>().is_ok() {
                if n_numeric == 0 {
                    first_numeric_row = r;
                }
                n_numeric += 1;
            } else {
                if n_other == 0 {
                    first_other_row = r;
                }
                n_other += 1;
                labels.push(field.clone());
            }
        }
        if n_numeric > 0 && n_other > 0 {
            return Err(DataError::MixedTypeColumn {
                column: header[c].clone(),
                row: first_other_row.max(first_numeric_row),
            });
        }
        if n_other > 0 {
            labels.sort_unstable();
            labels.dedup();
            columns.push(ColumnKind::Categorical { levels: labels });
        } else {
            columns.push(ColumnKind::Numeric);
        }
    }

    let mut cells = Vec::with_capacity(rows.len() * n_cols);
    for (r, row) in rows.iter().enumerate() {
        if row.iter().all(|field| is_missing(field, missing_token)) {
            return Err(DataError::FullyMissingRow { row: r });
        }
        for (c, field) in row.iter().enumerate() {
            if is_missing(field, missing_token) {
                cells.push(Cell::Missing);
            } else {
                cells.push(Cell::Present(encode_field(field, &columns[c])?));
            }
        }
    }
    IncompleteMatrix::new(header, columns, cells)
}

fn encode_field(field: &str, kind: &ColumnKind) -> Result<f64, DataError> {
    match kind {
        ColumnKind::Numeric => Ok(field.parse::<f64>().expect("typed as numeric")),
        ColumnKind::Categorical { levels } => Ok(levels
            .binary_search(&field.to_string())
            .expect("label collected during typing") as f64),
    }
}

/// Load a fully observed matrix against a known schema (column names, kinds
/// and level dictionaries of the source it must couple to).
pub fn load_complete_csv_with_schema(
    path: impl AsRef<Path>,
    missing_token: &str,
    names: &[String],
    kinds: &[ColumnKind],
) -> Result<CompleteMatrix, DataError> {
    let (header, rows) = read_records(path.as_ref())?;
    if header.len() != names.len() {
        return Err(DataError::SchemaMismatch {
            got: header.len(),
            expected: names.len(),
        });
    }
    let mut values = Vec::with_capacity(rows.len() * names.len());
    for (r, row) in rows.iter().enumerate() {
        for (c, field) in row.iter().enumerate() {
            if is_missing(field, missing_token) {
                return Err(DataError::MissingInCompletion { row: r, col: c });
            }
            let v = match &kinds[c] {
                ColumnKind::Numeric => {
                    field.parse::<f64>().map_err(|_| DataError::MixedTypeColumn {
                        column: names[c].clone(),
                        row: r,
                    })?
                }
                ColumnKind::Categorical { levels } => levels
                    .iter()
                    .position(|l| l == field)
                    .ok_or_else(|| DataError::UnknownLabel {
                        column: names[c].clone(),
                        label: field.clone(),
                        row: r,
                    })? as f64,
            };
            values.push(v);
        }
    }
    CompleteMatrix::new(names.to_vec(), kinds.to_vec(), values)
}

fn format_value(v: f64, kind: &ColumnKind) -> String {
    match kind {
        ColumnKind::Numeric => format!("{v}"),
        ColumnKind::Categorical { levels } => levels[v as usize].clone(),
    }
}

fn write_levels_sidecar(
    path: &Path,
    names: &[String],
    kinds: &[ColumnKind],
) -> Result<(), DataError> {
    let mut levels = BTreeMap::new();
    for (name, kind) in names.iter().zip(kinds) {
        if let ColumnKind::Categorical { levels: l } = kind {
            levels.insert(name.clone(), l.clone());
        }
    }
    if levels.is_empty() {
        return Ok(());
    }
    let sidecar = LevelsSidecar {
        schema_version: 1,
        levels,
    };
    let mut sidecar_path = path.as_os_str().to_owned();
    sidecar_path.push(".levels.json");
    fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar).expect("serialize"))?;
    Ok(())
}

/// Write an incomplete matrix; missing cells become the `NA` token. Level
/// dictionaries go to a `<path>.levels.json` sidecar when categoricals are
/// present.
pub fn write_csv(path: impl AsRef<Path>, matrix: &IncompleteMatrix) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(matrix.column_names())?;
    for r in 0..matrix.n_rows() {
        let record: Vec<String> = (0..matrix.n_cols())
            .map(|c| match matrix.cell(r, c) {
                Cell::Present(v) => format_value(v, &matrix.columns()[c]),
                Cell::Missing => DEFAULT_MISSING_TOKEN.to_string(),
            })
            .collect();
        writer.write_record(&record)?;
    }
    writer.flush()?;
    write_levels_sidecar(path, matrix.column_names(), matrix.columns())
}

/// Write a fully observed matrix.
pub fn write_complete_csv(
    path: impl AsRef<Path>,
    matrix: &CompleteMatrix,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(matrix.column_names())?;
    for r in 0..matrix.n_rows() {
        let record: Vec<String> = (0..matrix.n_cols())
            .map(|c| format_value(matrix.value(r, c), &matrix.columns()[c]))
            .collect();
        writer.write_record(&record)?;
    }
    writer.flush()?;
    write_levels_sidecar(path, matrix.column_names(), matrix.columns())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_missing_and_values() {
        let f = write_temp("a,b\n1,NA\n2,3\n");
        let m = load_csv(f.path(), "NA").unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.cell(0, 1), Cell::Missing);
        assert_eq!(m.cell(1, 0), Cell::Present(2.0));
    }

    #[test]
    fn duplicate_header_rejected() {
        let f = write_temp("x,x\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), "NA").unwrap_err(),
            DataError::DuplicateHeader { .. }
        ));
    }

    #[test]
    fn categorical_codes_are_lexicographic() {
        let f = write_temp("c,y\nred,1\nblue,2\nred,3\n");
        let m = load_csv(f.path(), "NA").unwrap();
        match &m.columns()[0] {
            ColumnKind::Categorical { levels } => {
                assert_eq!(levels, &["blue".to_string(), "red".to_string()]);
            }
            _ => panic!("expected categorical"),
        }
        assert_eq!(m.cell(0, 0), Cell::Present(1.0));
        assert_eq!(m.cell(1, 0), Cell::Present(0.0));
        assert_eq!(m.cell(2, 0), Cell::Present(1.0));
    }

    #[test]
    fn mixed_column_rejected() {
        let f = write_temp("a\n1\nred\n");
        assert!(matches!(
            load_csv(f.path(), "NA").unwrap_err(),
            DataError::MixedTypeColumn { .. }
        ));
    }

    #[test]
    fn fully_missing_row_rejected_at_load() {
        let f = write_temp("a,b\n1,2\nNA,\n");
        assert!(matches!(
            load_csv(f.path(), "NA").unwrap_err(),
            DataError::FullyMissingRow { row: 1 }
        ));
    }

    #[test]
    fn empty_string_counts_as_missing() {
        let f = write_temp("a,b\n1,\n2,3\n");
        let m = load_csv(f.path(), "NA").unwrap();
        assert_eq!(m.cell(0, 1), Cell::Missing);
    }

    #[test]
    fn round_trip_preserves_cells() {
        let f = write_temp("num,cat\n1.5,red\nNA,blue\n-2,NA\n0.25,\"a,b\"\n");
        let m = load_csv(f.path(), "NA").unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(out.path(), &m).unwrap();
        let back = load_csv(out.path(), "NA").unwrap();
        assert_eq!(m, back);
        // sidecar written because a categorical column is present
        let sidecar = format!("{}.levels.json", out.path().display());
        let text = std::fs::read_to_string(sidecar).unwrap();
        assert!(text.contains("\"a,b\""));
    }

    #[test]
    fn schema_load_rejects_unknown_label_and_missing() {
        let f = write_temp("c\nred\n");
        let kinds = vec![ColumnKind::Categorical {
            levels: vec!["blue".to_string()],
        }];
        let names = vec!["c".to_string()];
        assert!(matches!(
            load_complete_csv_with_schema(f.path(), "NA", &names, &kinds).unwrap_err(),
            DataError::UnknownLabel { .. }
        ));
        let g = write_temp("c\nNA\n");
        assert!(matches!(
            load_complete_csv_with_schema(g.path(), "NA", &names, &kinds).unwrap_err(),
            DataError::MissingInCompletion { .. }
        ));
    }
}
