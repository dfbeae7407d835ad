//! Cell values and column types.

use std::cmp::Ordering;
use std::fmt;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Serialize, Serializer};

/// Declared type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Bool,
    Int,
    Float,
    DateTime,
    String,
}

impl ColumnType {
    pub const ALL: [ColumnType; 5] = [
        ColumnType::Int,
        ColumnType::Float,
        ColumnType::String,
        ColumnType::Bool,
        ColumnType::DateTime,
    ];

    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnType::Int | ColumnType::Float)
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Bool => "bool",
            ColumnType::Int => "int",
            ColumnType::Float => "float",
            ColumnType::DateTime => "datetime",
            ColumnType::String => "string",
        }
    }

    /// Index into the fixed `[int, float, string, bool, datetime]` one-hot layout.
    pub fn one_hot_index(self) -> usize {
        match self {
            ColumnType::Int => 0,
            ColumnType::Float => 1,
            ColumnType::String => 2,
            ColumnType::Bool => 3,
            ColumnType::DateTime => 4,
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single table cell.
///
/// `Float` never holds NaN: constructors route non-finite results to `Null`.
/// `DateTime` is seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    DateTime(i64),
}

impl Value {
    /// Float constructor that maps NaN to `Null`.
    pub fn float(x: f64) -> Value {
        if x.is_nan() {
            Value::Null
        } else {
            Value::Float(x)
        }
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Type of a non-null value.
    pub fn column_type(&self) -> Option<ColumnType> {
        match self {
            Value::Null => None,
            Value::Bool(_) => Some(ColumnType::Bool),
            Value::Int(_) => Some(ColumnType::Int),
            Value::Float(_) => Some(ColumnType::Float),
            Value::Text(_) => Some(ColumnType::String),
            Value::DateTime(_) => Some(ColumnType::DateTime),
        }
    }

    pub fn type_name(&self) -> &'static str {
        self.column_type().map_or("null", ColumnType::name)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    /// Total order used for sorting and deterministic tie-breaking.
    ///
    /// Null < Bool < numbers < Text < DateTime. Int and Float compare
    /// numerically; an Int sorts before an equal Float.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::Null => 0,
                Value::Bool(_) => 1,
                Value::Int(_) | Value::Float(_) => 2,
                Value::Text(_) => 3,
                Value::DateTime(_) => 4,
            }
        }
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Int(a), Value::Float(b)) => (*a as f64).total_cmp(b).then(Ordering::Less),
            (Value::Float(a), Value::Int(b)) => a.total_cmp(&(*b as f64)).then(Ordering::Greater),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::DateTime(a), Value::DateTime(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }

    /// Parse `raw` as a value of type `ty`; `None` when it does not fit.
    pub fn parse_as(raw: &str, ty: ColumnType) -> Option<Value> {
        let s = raw.trim();
        match ty {
            ColumnType::String => Some(Value::Text(raw.to_string())),
            ColumnType::Bool => parse_bool(s).map(Value::Bool),
            ColumnType::Int => parse_int(s).map(Value::Int),
            ColumnType::Float => parse_float(s).map(|f| f.map_or(Value::Null, Value::Float)),
            ColumnType::DateTime => parse_datetime(s).map(Value::DateTime),
        }
    }

    /// Text form used in CSV output. Floats keep a round-trippable form
    /// that always reads back as a float (`2.0`, not `2`).
    pub fn to_csv_field(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Float(x) => format!("{x:?}"),
            Value::Text(s) => s.clone(),
            Value::DateTime(t) => format_datetime(*t),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
            Value::DateTime(t) => f.write_str(&format_datetime(*t)),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => serializer.serialize_none(),
            Value::Bool(b) => serializer.serialize_bool(*b),
            Value::Int(i) => serializer.serialize_i64(*i),
            Value::Float(x) => serializer.serialize_f64(*x),
            Value::Text(s) => serializer.serialize_str(s),
            Value::DateTime(t) => serializer.serialize_str(&format_datetime(*t)),
        }
    }
}

pub(crate) fn parse_bool(s: &str) -> Option<bool> {
    if s.eq_ignore_ascii_case("true") {
        Some(true)
    } else if s.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

pub(crate) fn parse_int(s: &str) -> Option<i64> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// `Some(None)` for a NaN token, which is admitted as a float but stored as Null.
pub(crate) fn parse_float(s: &str) -> Option<Option<f64>> {
    if s.eq_ignore_ascii_case("nan") {
        return Some(None);
    }
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let mut parts = mantissa.splitn(2, '.');
    let int_part = parts.next().unwrap_or("");
    let frac_part = parts.next();
    let digits_ok = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !digits_ok(int_part) || !frac_part.is_none_or(digits_ok) {
        return None;
    }
    if int_part.is_empty() && frac_part.is_none_or(str::is_empty) {
        return None;
    }
    if let Some(exp) = exponent {
        let exp_digits = exp.strip_prefix(['+', '-']).unwrap_or(exp);
        if exp_digits.is_empty() || !digits_ok(exp_digits) {
            return None;
        }
    }
    let x: f64 = s.parse().ok()?;
    x.is_finite().then_some(Some(x))
}

pub(crate) fn parse_datetime(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_datetime(secs: i64) -> String {
    match DateTime::<Utc>::from_timestamp(secs, 0) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => secs.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_tokens() {
        assert_eq!(parse_float("2.5"), Some(Some(2.5)));
        assert_eq!(parse_float("-.5e3"), Some(Some(-500.0)));
        assert_eq!(parse_float("1e400"), None);
        assert_eq!(parse_float("NaN"), Some(None));
        assert_eq!(parse_float("inf"), None);
        assert_eq!(parse_float("."), None);
        assert_eq!(parse_float("1.2.3"), None);
    }

    #[test]
    fn nan_becomes_null() {
        assert_eq!(Value::float(f64::NAN), Value::Null);
        assert_eq!(Value::parse_as("nan", ColumnType::Float), Some(Value::Null));
    }

    #[test]
    fn datetime_forms() {
        let a = parse_datetime("2023-05-01").unwrap();
        let b = parse_datetime("2023-05-01T00:00:00Z").unwrap();
        let c = parse_datetime("2023-05-01 00:00:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
        assert_eq!(format_datetime(a), "2023-05-01T00:00:00Z");
        assert_eq!(parse_datetime(&format_datetime(a)), Some(a));
        assert_eq!(parse_datetime("1"), None);
    }

    #[test]
    fn float_csv_form_reads_back_as_float() {
        for x in [2.0, 0.1, -1e-7, 1e300, 123456789.125] {
            let s = Value::Float(x).to_csv_field();
            assert_eq!(parse_int(&s), None, "{s}");
            assert_eq!(parse_float(&s), Some(Some(x)));
        }
    }
}
