//! Per-column descriptive statistics.
//!
//! Every statistic is computed from the sorted non-null values, so results
//! are bit-identical under any row permutation.

use serde::Serialize;

use crate::error::TableError;
use crate::table::Table;
use crate::value::{ColumnType, Value};

/// Number of most frequent values that enter the entropy estimate.
pub const ENTROPY_TOP_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub count_nonnull: usize,
    pub null_frac: f64,
    pub distinct_count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub q25: Option<f64>,
    pub q50: Option<f64>,
    pub q75: Option<f64>,
    pub top_value: Option<Value>,
    pub top_freq_ratio: Option<f64>,
    pub entropy_norm: Option<f64>,
}

/// Linear-interpolation quantile of an ascending, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn column_stats(t: &Table, name: &str) -> Result<ColumnStats, TableError> {
    let idx = t
        .schema()
        .index_of(name)
        .ok_or_else(|| TableError::UnknownColumn(name.to_string()))?;
    Ok(stats_for_values(t.column_at(idx), t.schema().columns[idx].ctype))
}

pub fn stats_for_values(cells: &[Value], ctype: ColumnType) -> ColumnStats {
    let total = cells.len();
    let mut values: Vec<&Value> = cells.iter().filter(|v| !v.is_null()).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    let null_frac = if total == 0 { 0.0 } else { (total - n) as f64 / total as f64 };

    // Run-length counts over the sorted values: (value, frequency).
    let mut runs: Vec<(&Value, usize)> = Vec::new();
    for v in &values {
        match runs.last_mut() {
            Some((last, count)) if last.total_cmp(v).is_eq() => *count += 1,
            _ => runs.push((v, 1)),
        }
    }
    let distinct_count = runs.len();

    let (top_value, top_freq_ratio) = if n == 0 {
        (None, None)
    } else {
        // Earliest run wins ties, i.e. the smallest value.
        let mut best = runs[0];
        for &run in &runs[1..] {
            if run.1 > best.1 {
                best = run;
            }
        }
        (Some(best.0.clone()), Some(best.1 as f64 / n as f64))
    };

    let entropy_norm = if distinct_count <= 1 {
        None
    } else {
        let mut freqs: Vec<usize> = runs.iter().map(|r| r.1).collect();
        freqs.sort_by(|a, b| b.cmp(a));
        let h: f64 = freqs
            .iter()
            .take(ENTROPY_TOP_K)
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.ln()
            })
            .sum();
        Some((h / (distinct_count as f64).ln()).clamp(0.0, 1.0))
    };

    let mut stats = ColumnStats {
        count_nonnull: n,
        null_frac,
        distinct_count,
        mean: None,
        std: None,
        min: None,
        max: None,
        q25: None,
        q50: None,
        q75: None,
        top_value,
        top_freq_ratio,
        entropy_norm,
    };

    if ctype.is_numeric() && n > 0 {
        let mut xs: Vec<f64> = values.iter().filter_map(|v| v.as_f64()).collect();
        xs.sort_by(f64::total_cmp);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        stats.mean = Some(mean);
        stats.std = Some(var.sqrt());
        stats.min = Some(xs[0]);
        stats.max = Some(xs[n - 1]);
        stats.q25 = Some(quantile_sorted(&xs, 0.25));
        stats.q50 = Some(quantile_sorted(&xs, 0.5));
        stats.q75 = Some(quantile_sorted(&xs, 0.75));
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.25), 1.75);
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_eq!(quantile_sorted(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn empty_column() {
        let s = stats_for_values(&[], ColumnType::Int);
        assert_eq!(s.count_nonnull, 0);
        assert_eq!(s.null_frac, 0.0);
        assert!(s.mean.is_none() && s.std.is_none() && s.q50.is_none());
        assert!(s.top_value.is_none() && s.entropy_norm.is_none());
    }

    #[test]
    fn all_null_column() {
        let s = stats_for_values(&[Value::Null, Value::Null], ColumnType::Float);
        assert_eq!(s.null_frac, 1.0);
        assert_eq!(s.distinct_count, 0);
        assert!(s.mean.is_none());
    }

    #[test]
    fn top_value_tie_is_smallest() {
        let cells = [Value::text("b"), Value::text("a"), Value::text("b"), Value::text("a")];
        let s = stats_for_values(&cells, ColumnType::String);
        assert_eq!(s.top_value, Some(Value::text("a")));
        assert_eq!(s.top_freq_ratio, Some(0.5));
        assert_eq!(s.entropy_norm, Some(1.0));
        assert!(s.mean.is_none());
    }

    #[test]
    fn entropy_uses_top_twenty_against_full_distinct_base() {
        let cells: Vec<Value> = (0..40).map(Value::Int).collect();
        let s = stats_for_values(&cells, ColumnType::Int);
        let expected = 20.0 * (1.0 / 40.0) * 40f64.ln() / 40f64.ln();
        assert!((s.entropy_norm.unwrap() - expected).abs() < 1e-12);
    }
}
