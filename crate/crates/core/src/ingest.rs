//! CSV ingestion, type inference and CSV serialization.

use crate::error::TableError;
use crate::table::{ColumnMeta, Schema, Table};
use crate::value::{ColumnType, Value};

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub table_name: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
            table_name: "table".to_string(),
        }
    }
}

impl CsvOptions {
    pub fn named(table_name: impl Into<String>) -> Self {
        CsvOptions {
            table_name: table_name.into(),
            ..CsvOptions::default()
        }
    }
}

/// Promotion order tried for each column; the first type that admits every
/// non-empty cell wins.
const PROMOTION: [ColumnType; 5] = [
    ColumnType::Bool,
    ColumnType::Int,
    ColumnType::Float,
    ColumnType::DateTime,
    ColumnType::String,
];

fn is_empty_cell(s: &str) -> bool {
    s.trim().is_empty()
}

/// Narrowest type per column. Empty cells do not constrain the type and an
/// all-empty column is `string`.
pub fn infer_column_types(width: usize, rows: &[Vec<String>]) -> Vec<ColumnType> {
    (0..width)
        .map(|c| {
            let cells: Vec<&str> = rows
                .iter()
                .map(|r| r[c].as_str())
                .filter(|s| !is_empty_cell(s))
                .collect();
            if cells.is_empty() {
                return ColumnType::String;
            }
            PROMOTION
                .into_iter()
                .find(|&ty| cells.iter().all(|s| Value::parse_as(s, ty).is_some()))
                .unwrap_or(ColumnType::String)
        })
        .collect()
}

/// Infer a schema from a header and a rectangular grid of raw cells.
pub fn infer_schema(
    table_name: &str,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<Schema, TableError> {
    let types = infer_column_types(header.len(), rows);
    Schema::new(
        table_name,
        header
            .iter()
            .zip(types)
            .map(|(name, ty)| ColumnMeta::new(name.clone(), ty))
            .collect(),
    )
}

/// Parse CSV bytes into a typed table. Row order is preserved.
pub fn load_csv(bytes: &[u8], opts: &CsvOptions) -> Result<Table, TableError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TableError::Utf8Error {
        offset: e.valid_up_to(),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| TableError::Csv(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        match &header {
            None if opts.has_header => {
                header = Some(fields.iter().map(|f| f.trim().to_string()).collect());
                continue;
            }
            None => {
                header = Some((1..=fields.len()).map(|i| format!("col_{i}")).collect());
            }
            Some(_) => {}
        }
        let width = header.as_ref().map_or(0, Vec::len);
        if fields.len() != width {
            return Err(TableError::RaggedRow {
                line,
                expected: width,
                found: fields.len(),
            });
        }
        rows.push(fields);
    }

    let header = header.unwrap_or_default();
    let schema = infer_schema(&opts.table_name, &header, &rows)?;
    let columns = schema
        .columns
        .iter()
        .enumerate()
        .map(|(c, meta)| {
            rows.iter()
                .map(|r| {
                    let raw = &r[c];
                    if is_empty_cell(raw) {
                        Value::Null
                    } else {
                        Value::parse_as(raw, meta.ctype).unwrap_or(Value::Null)
                    }
                })
                .collect()
        })
        .collect();
    Table::new(schema, columns)
}

/// Serialize a table as RFC 4180 CSV with a header row.
pub fn to_csv(t: &Table, delimiter: u8) -> String {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(Vec::new());
    let header: Vec<&str> = t.schema().names().collect();
    // Writing into a Vec cannot fail.
    if !header.is_empty() {
        writer.write_record(&header).expect("in-memory write");
    }
    for r in 0..t.num_rows() {
        let fields: Vec<String> = t.columns().iter().map(|c| c[r].to_csv_field()).collect();
        writer.write_record(&fields).expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv writer emits the UTF-8 it was given")
}
