//! Column descriptors: a fixed-length summary of each column's values and a
//! hashed encoding of its name and type. Columns, not rows, are the set
//! elements the encoder attends over.

use tabchain_core::stats::stats_for_values;
use tabchain_core::table::normalize_name;
use tabchain_core::text::trigram_vector;
use tabchain_core::{ColumnType, Table, Value};

use crate::error::EncoderError;

pub const NUM_FEATURES: usize = 12;
pub const NAME_HASH_DIM: usize = 32;
pub const TYPE_DIM: usize = 5;
pub const META_DIM: usize = NAME_HASH_DIM + TYPE_DIM;

/// Slot names of [`ColumnFeatures::numeric`], in order.
pub const NUMERIC_SLOTS: [&str; NUM_FEATURES] = [
    "null_frac",
    "distinct_ratio",
    "frac_positive",
    "frac_zero",
    "log_mean",
    "log_std",
    "iqr_over_range",
    "median_position",
    "skew_proxy",
    "entropy_norm",
    "top_freq_ratio",
    "is_numeric",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnFeatures {
    pub numeric: [f64; NUM_FEATURES],
    pub meta: [f64; META_DIM],
}

fn log_magnitude(x: f64) -> f64 {
    x.signum() * ((1.0 + x.abs()).ln() / 10.0).min(1.0)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Hashed trigrams of the anchored, normalized name followed by a type one-hot.
pub fn meta_vector(name: &str, ctype: ColumnType) -> [f64; META_DIM] {
    let mut out = [0.0; META_DIM];
    let hashed = trigram_vector(&format!("^{}$", normalize_name(name)), NAME_HASH_DIM);
    out[..NAME_HASH_DIM].copy_from_slice(&hashed);
    out[NAME_HASH_DIM + ctype.one_hot_index()] = 1.0;
    out
}

pub fn numeric_vector(cells: &[Value], ctype: ColumnType) -> [f64; NUM_FEATURES] {
    let s = stats_for_values(cells, ctype);
    let n = s.count_nonnull as f64;
    let mut f = [0.0; NUM_FEATURES];
    f[0] = s.null_frac;
    f[1] = ratio(s.distinct_count as f64, n);
    f[9] = s.entropy_norm.unwrap_or(0.0);
    f[10] = s.top_freq_ratio.unwrap_or(0.0);
    if !ctype.is_numeric() {
        return f;
    }
    f[11] = 1.0;
    let xs: Vec<f64> = cells.iter().filter_map(Value::as_f64).collect();
    f[2] = ratio(xs.iter().filter(|&&x| x > 0.0).count() as f64, n);
    f[3] = ratio(xs.iter().filter(|&&x| x == 0.0).count() as f64, n);
    if let (Some(mean), Some(std), Some(min), Some(max), Some(q25), Some(q50), Some(q75)) =
        (s.mean, s.std, s.min, s.max, s.q25, s.q50, s.q75)
    {
        let range = max - min;
        f[4] = log_magnitude(mean);
        f[5] = log_magnitude(std);
        f[6] = if range > 0.0 { ((q75 - q25) / range).clamp(0.0, 1.0) } else { 0.0 };
        f[7] = if range > 0.0 { ((q50 - min) / range).clamp(0.0, 1.0) } else { 0.5 };
        f[8] = if std > 0.0 { ((mean - q50) / std).clamp(-1.0, 1.0) } else { 0.0 };
    }
    for v in &mut f {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    f
}

/// One descriptor per column, in schema order.
pub fn featurize(t: &Table) -> Result<Vec<ColumnFeatures>, EncoderError> {
    if t.num_columns() == 0 {
        return Err(EncoderError::EmptySchema);
    }
    Ok(t.schema()
        .columns
        .iter()
        .enumerate()
        .map(|(i, meta)| ColumnFeatures {
            numeric: numeric_vector(t.column_at(i), meta.ctype),
            meta: meta_vector(&meta.name, meta.ctype),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tabchain_core::{load_csv, CsvOptions};

    fn movies() -> Table {
        let csv = "title,box_office,cost\nA,100,50\nB,300,100\nC,60,80\nD,240,120\nE,90,30\nF,30,20\n";
        load_csv(csv.as_bytes(), &CsvOptions::named("movies")).unwrap()
    }

    #[test]
    fn numeric_column() {
        let f = featurize(&movies()).unwrap();
        let b = &f[1].numeric;
        assert_eq!(b[11], 1.0);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[1], 1.0);
        assert_eq!(b[2], 1.0);
        // median of box_office is 95 over range 30..300
        assert!((b[7] - 65.0 / 270.0).abs() < 1e-12);
        assert_eq!(f[1].meta[NAME_HASH_DIM], 1.0);
    }

    #[test]
    fn string_column_has_no_moments() {
        let f = featurize(&movies()).unwrap();
        let t = &f[0].numeric;
        assert_eq!(t[11], 0.0);
        assert_eq!(&t[2..9], &[0.0; 7]);
        assert_eq!(t[10], 1.0 / 6.0);
        assert!((t[9] - 1.0).abs() < 1e-12);
        assert_eq!(f[0].meta[NAME_HASH_DIM + 2], 1.0);
    }

    #[test]
    fn all_null_column() {
        let f = numeric_vector(&[Value::Null, Value::Null], ColumnType::Float);
        assert_eq!(f[0], 1.0);
        assert_eq!(&f[1..11], &[0.0; 10]);
    }

    #[test]
    fn constant_column() {
        let f = numeric_vector(&[Value::Int(3), Value::Int(3)], ColumnType::Int);
        assert_eq!(f[6], 0.0);
        assert_eq!(f[7], 0.5);
        assert_eq!(f[8], 0.0);
        assert_eq!(f[5], 0.0);
    }

    #[test]
    fn name_hash_is_normalized() {
        let m = meta_vector("Box Office", ColumnType::Int);
        let norm: f64 = m[..NAME_HASH_DIM].iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(meta_vector("box_office", ColumnType::Int), m);
    }

    #[test]
    fn empty_schema() {
        let t = Table::new(tabchain_core::Schema::new("e", vec![]).unwrap(), vec![]).unwrap();
        assert!(matches!(featurize(&t), Err(EncoderError::EmptySchema)));
    }
}
