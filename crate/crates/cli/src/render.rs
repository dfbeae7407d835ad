//! Text renderings of result tables.

use tabchain_core::{Table, Value};

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "NULL".to_string(),
        other => other.to_string(),
    }
}

/// Aligned grid of the first `limit` rows; numbers are right-aligned.
pub fn grid(t: &Table, limit: Option<usize>) -> String {
    let shown = limit.map_or(t.num_rows(), |l| l.min(t.num_rows()));
    let names: Vec<&str> = t.schema().names().collect();
    let cells: Vec<Vec<String>> = (0..shown)
        .map(|r| (0..t.num_columns()).map(|c| cell(t.cell(r, c))).collect())
        .collect();
    let widths: Vec<usize> = names
        .iter()
        .enumerate()
        .map(|(c, n)| {
            cells
                .iter()
                .map(|row| row[c].chars().count())
                .chain([n.chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let numeric: Vec<bool> = t.schema().columns.iter().map(|c| c.ctype.is_numeric()).collect();
    let line = |fields: &[String], align_num: bool| -> String {
        let parts: Vec<String> = fields
            .iter()
            .enumerate()
            .map(|(c, f)| {
                if align_num && numeric[c] {
                    format!("{f:>w$}", w = widths[c])
                } else {
                    format!("{f:<w$}", w = widths[c])
                }
            })
            .collect();
        parts.join(" | ").trim_end().to_string()
    };
    let header: Vec<String> = names.iter().map(|n| n.to_string()).collect();
    let mut out = vec![line(&header, false)];
    out.push(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    out.extend(cells.iter().map(|r| line(r, true)));
    if shown < t.num_rows() {
        out.push(format!("... {} more rows", t.num_rows() - shown));
    }
    out.push(format!(
        "({} row{})",
        t.num_rows(),
        if t.num_rows() == 1 { "" } else { "s" }
    ));
    out.join("\n")
}
