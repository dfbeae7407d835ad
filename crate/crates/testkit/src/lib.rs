//! Shared test support: fixtures, random tables and chains, and a naive
//! reference interpreter to check the executor against.

pub mod arb;
pub mod gen;
pub mod naive;

use tabchain_core::{load_csv, CsvOptions, Table, Value};

pub const MOVIES_CSV: &str = "title,box_office,cost\nA,100,50\nB,300,100\nC,60,80\nD,240,120\nE,90,30\nF,30,20\n";

pub const GOLDEN_QUERY: &str = "Show me the five movies with the highest profit margin";

pub fn movies() -> Table {
    load_csv(MOVIES_CSV.as_bytes(), &CsvOptions::named("movies")).expect("fixture loads")
}

/// Cell equality for oracle checks: exact, except floats which may differ
/// by `rel` relative to their magnitude (at least 1).
pub fn cells_match(a: &Value, b: &Value, rel: f64) -> bool {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => x == y || (x - y).abs() <= rel * x.abs().max(y.abs()).max(1.0),
        _ => a == b,
    }
}

/// First mismatch between two tables, described for a failure message.
pub fn table_diff(a: &Table, b: &Table, rel: f64) -> Option<String> {
    let names = |t: &Table| -> Vec<(String, String)> {
        t.schema()
            .columns
            .iter()
            .map(|c| (c.name.clone(), c.ctype.to_string()))
            .collect()
    };
    if names(a) != names(b) {
        return Some(format!("schemas differ: {:?} vs {:?}", names(a), names(b)));
    }
    if a.num_rows() != b.num_rows() {
        return Some(format!("row counts differ: {} vs {}", a.num_rows(), b.num_rows()));
    }
    for r in 0..a.num_rows() {
        for c in 0..a.num_columns() {
            if !cells_match(a.cell(r, c), b.cell(r, c), rel) {
                return Some(format!("cell ({r}, {c}) differs: {:?} vs {:?}", a.cell(r, c), b.cell(r, c)));
            }
        }
    }
    None
}
