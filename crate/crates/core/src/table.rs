//! Columnar table model.

use std::collections::HashSet;

use serde::Serialize;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Axis, TableError};
use crate::value::{ColumnType, Value};

/// Maximum number of cells a desk-scale table may hold.
pub const MAX_CELLS: usize = 1_000_000;

/// Canonical form used to compare column names: NFC, lowercase, and each
/// run of whitespace collapsed to one underscore.
pub fn normalize_name(name: &str) -> String {
    let lowered: String = name.nfc().collect::<String>().to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join("_")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnMeta {
    pub name: String,
    #[serde(rename = "type")]
    pub ctype: ColumnType,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub synonyms: Vec<String>,
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, ctype: ColumnType) -> Self {
        ColumnMeta {
            name: name.into(),
            ctype,
            synonyms: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schema {
    pub table_name: String,
    pub columns: Vec<ColumnMeta>,
}

impl Schema {
    pub fn new(table_name: impl Into<String>, columns: Vec<ColumnMeta>) -> Result<Self, TableError> {
        let schema = Schema {
            table_name: table_name.into(),
            columns,
        };
        schema.check_names()?;
        Ok(schema)
    }

    fn check_names(&self) -> Result<(), TableError> {
        let mut seen = HashSet::new();
        for (index, col) in self.columns.iter().enumerate() {
            if col.name.is_empty() {
                return Err(TableError::EmptyColumnName { index });
            }
            if !seen.insert(normalize_name(&col.name)) {
                return Err(TableError::DuplicateColumn(col.name.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Exact (verbatim) lookup.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMeta> {
        self.index_of(name).map(|i| &self.columns[i])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Attach synonym lists keyed by (normalized) column name.
    pub fn with_synonyms<'a, I>(mut self, synonyms: I) -> Self
    where
        I: IntoIterator<Item = (&'a String, &'a Vec<String>)>,
    {
        for (name, list) in synonyms {
            let key = normalize_name(name);
            if let Some(col) = self.columns.iter_mut().find(|c| normalize_name(&c.name) == key) {
                for syn in list {
                    if !col.synonyms.contains(syn) {
                        col.synonyms.push(syn.clone());
                    }
                }
            }
        }
        self
    }
}

/// Immutable columnar table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: Schema,
    columns: Vec<Vec<Value>>,
    rows: usize,
}

impl Table {
    /// Build a table, checking column lengths and cell types.
    pub fn new(schema: Schema, columns: Vec<Vec<Value>>) -> Result<Self, TableError> {
        schema.check_names()?;
        if columns.len() != schema.columns.len() {
            return Err(TableError::LengthMismatch {
                column: "<schema>".into(),
                expected: schema.columns.len(),
                got: columns.len(),
            });
        }
        let rows = columns.first().map_or(0, Vec::len);
        for (meta, cells) in schema.columns.iter().zip(&columns) {
            if cells.len() != rows {
                return Err(TableError::LengthMismatch {
                    column: meta.name.clone(),
                    expected: rows,
                    got: cells.len(),
                });
            }
            if let Some(bad) = cells
                .iter()
                .find(|v| v.column_type().is_some_and(|t| t != meta.ctype))
            {
                return Err(TableError::CellTypeMismatch {
                    column: meta.name.clone(),
                    expected: meta.ctype.to_string(),
                    found: bad.type_name().to_string(),
                });
            }
        }
        let cells = rows * columns.len();
        if cells > MAX_CELLS {
            return Err(TableError::TooLarge {
                cells,
                limit: MAX_CELLS,
            });
        }
        Ok(Table {
            schema,
            columns,
            rows,
        })
    }

    /// Build from row-major cells.
    pub fn from_rows(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Self, TableError> {
        let width = schema.columns.len();
        let mut columns: Vec<Vec<Value>> = (0..width).map(|_| Vec::with_capacity(rows.len())).collect();
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(TableError::RaggedRow {
                    line: i as u64 + 1,
                    expected: width,
                    found: row.len(),
                });
            }
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Table::new(schema, columns)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<Value>] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&[Value], TableError> {
        self.schema
            .index_of(name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn column_at(&self, index: usize) -> &[Value] {
        &self.columns[index]
    }

    pub fn cell(&self, row: usize, col: usize) -> &Value {
        &self.columns[col][row]
    }

    pub fn row(&self, row: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c[row].clone()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<Value>> {
        (0..self.rows).map(|r| self.row(r)).collect()
    }

    /// Replace the schema's synonym lists, keeping everything else.
    pub fn with_schema_synonyms(mut self, schema: Schema) -> Self {
        for (dst, src) in self.schema.columns.iter_mut().zip(schema.columns) {
            if dst.name == src.name {
                dst.synonyms = src.synonyms;
            }
        }
        self
    }

    pub fn into_parts(self) -> (Schema, Vec<Vec<Value>>) {
        (self.schema, self.columns)
    }
}

fn check_permutation(perm: &[usize], expected: usize, kind: Axis) -> Result<(), TableError> {
    if perm.len() != expected {
        return Err(TableError::BadPermutation {
            kind,
            expected,
            got: perm.len(),
        });
    }
    let mut seen = vec![false; expected];
    for &p in perm {
        if p >= expected || std::mem::replace(&mut seen[p], true) {
            return Err(TableError::NotAPermutation { kind });
        }
    }
    Ok(())
}

/// Reorder rows and/or columns. Output row `i` is input row `row_perm[i]`,
/// and likewise for columns.
pub fn permute(
    t: &Table,
    row_perm: Option<&[usize]>,
    col_perm: Option<&[usize]>,
) -> Result<Table, TableError> {
    if let Some(p) = row_perm {
        check_permutation(p, t.num_rows(), Axis::Row)?;
    }
    if let Some(p) = col_perm {
        check_permutation(p, t.num_columns(), Axis::Column)?;
    }
    let col_order: Vec<usize> = match col_perm {
        Some(p) => p.to_vec(),
        None => (0..t.num_columns()).collect(),
    };
    let columns = col_order
        .iter()
        .map(|&c| {
            let src = &t.columns[c];
            match row_perm {
                Some(p) => p.iter().map(|&r| src[r].clone()).collect(),
                None => src.clone(),
            }
        })
        .collect();
    let schema = Schema {
        table_name: t.schema.table_name.clone(),
        columns: col_order.iter().map(|&c| t.schema.columns[c].clone()).collect(),
    };
    Ok(Table {
        schema,
        columns,
        rows: t.rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Table {
        let schema = Schema::new(
            "t",
            vec![
                ColumnMeta::new("a", ColumnType::Int),
                ColumnMeta::new("b", ColumnType::String),
            ],
        )
        .unwrap();
        Table::new(
            schema,
            vec![
                vec![Value::Int(1), Value::Int(2), Value::Null],
                vec![Value::text("x"), Value::text("y"), Value::text("z")],
            ],
        )
        .unwrap()
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_name("Box Office"), "box_office");
        assert_eq!(normalize_name("  Box \t Office "), "box_office");
        // composed vs decomposed e-acute
        assert_eq!(normalize_name("Caf\u{e9}"), normalize_name("Cafe\u{301}"));
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = Schema::new(
            "t",
            vec![
                ColumnMeta::new("Box Office", ColumnType::Int),
                ColumnMeta::new("box_office", ColumnType::Int),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, TableError::DuplicateColumn(_)));
    }

    #[test]
    fn cell_type_checked() {
        let schema = Schema::new("t", vec![ColumnMeta::new("a", ColumnType::Int)]).unwrap();
        assert!(Table::new(schema, vec![vec![Value::text("x")]]).is_err());
    }

    #[test]
    fn identity_permutation() {
        let t = small();
        let p = permute(&t, Some(&[0, 1, 2]), Some(&[0, 1])).unwrap();
        assert_eq!(p, t);
    }

    #[test]
    fn permutation_moves_rows_and_columns() {
        let t = small();
        let p = permute(&t, Some(&[2, 0, 1]), Some(&[1, 0])).unwrap();
        assert_eq!(p.schema().columns[0].name, "b");
        assert_eq!(p.row(0), vec![Value::text("z"), Value::Null]);
        assert_eq!(p.row(1), vec![Value::text("x"), Value::Int(1)]);
    }

    #[test]
    fn bad_permutations() {
        let t = small();
        assert_eq!(
            permute(&t, Some(&[0, 1]), None).unwrap_err(),
            TableError::BadPermutation {
                kind: Axis::Row,
                expected: 3,
                got: 2
            }
        );
        assert_eq!(
            permute(&t, None, Some(&[0, 0])).unwrap_err(),
            TableError::NotAPermutation { kind: Axis::Column }
        );
    }
}
