//! Row-expression evaluation with three-valued null logic, plus static
//! result-type inference used by the validator.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::table::Schema;
use crate::value::{parse_datetime, ColumnType, Value};

use super::ast::{BinOp, Expr, UnaryOp};

/// Non-fatal conditions recorded during execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Warning {
    DivisionByZero,
    NonFiniteResult,
    IntegerOverflow,
    SingularNormalMatrix,
    NoTrainingRows,
    CoercionFailed,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Warning::DivisionByZero => "division by zero produced null",
            Warning::NonFiniteResult => "non-finite arithmetic result produced null",
            Warning::IntegerOverflow => "integer overflow produced null",
            Warning::SingularNormalMatrix => "normal matrix is singular; fell back to the mean predictor",
            Warning::NoTrainingRows => "no complete rows to fit on",
            Warning::CoercionFailed => "value could not be converted to the column type; stored null",
        })
    }
}

/// Record `w` once.
pub fn note(warnings: &mut Vec<Warning>, w: Warning) {
    if !warnings.contains(&w) {
        warnings.push(w);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum EvalError {
    #[error("type error: cannot apply {op} to {lhs_type} and {rhs_type}")]
    TypeError {
        op: String,
        lhs_type: String,
        rhs_type: String,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

fn type_error(op: &str, lhs: &Value, rhs: &Value) -> EvalError {
    EvalError::TypeError {
        op: op.to_string(),
        lhs_type: lhs.type_name().to_string(),
        rhs_type: rhs.type_name().to_string(),
    }
}

/// Evaluate `e` over one row whose cells are laid out as in `schema`.
pub fn eval_expr(
    e: &Expr,
    row: &[Value],
    schema: &Schema,
    warnings: &mut Vec<Warning>,
) -> Result<Value, EvalError> {
    match e {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Col(name) => schema
            .index_of(name)
            .map(|i| row[i].clone())
            .ok_or_else(|| EvalError::UnknownColumn(name.clone())),
        Expr::Unary(op, inner) => {
            let v = eval_expr(inner, row, schema, warnings)?;
            match (op, v) {
                (_, Value::Null) => Ok(Value::Null),
                (UnaryOp::Neg, Value::Int(i)) => Ok(i.checked_neg().map_or_else(
                    || {
                        note(warnings, Warning::IntegerOverflow);
                        Value::Null
                    },
                    Value::Int,
                )),
                (UnaryOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
                (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                (UnaryOp::Neg, v) => Err(type_error("-", &v, &Value::Null)),
                (UnaryOp::Not, v) => Err(type_error("NOT", &v, &Value::Null)),
            }
        }
        Expr::Binary(op, l, r) if op.is_logical() => {
            let lv = eval_expr(l, row, schema, warnings)?;
            let rv = eval_expr(r, row, schema, warnings)?;
            logical(*op, &lv, &rv)
        }
        Expr::Binary(op, l, r) => {
            let lv = eval_expr(l, row, schema, warnings)?;
            let rv = eval_expr(r, row, schema, warnings)?;
            if op.is_arithmetic() {
                arithmetic(*op, &lv, &rv, warnings)
            } else {
                compare(*op, &lv, &rv)
            }
        }
    }
}

fn logical(op: BinOp, l: &Value, r: &Value) -> Result<Value, EvalError> {
    let as_tri = |v: &Value| match v {
        Value::Bool(b) => Ok(Some(*b)),
        Value::Null => Ok(None),
        _ => Err(type_error(op.symbol(), l, r)),
    };
    let (a, b) = (as_tri(l)?, as_tri(r)?);
    let out = match op {
        BinOp::And => match (a, b) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        _ => match (a, b) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
    };
    Ok(out.map_or(Value::Null, Value::Bool))
}

fn finite(x: f64, warnings: &mut Vec<Warning>) -> Value {
    if x.is_finite() {
        Value::Float(x)
    } else {
        note(warnings, Warning::NonFiniteResult);
        Value::Null
    }
}

fn arithmetic(op: BinOp, l: &Value, r: &Value, warnings: &mut Vec<Warning>) -> Result<Value, EvalError> {
    let numeric = |v: &Value| matches!(v, Value::Int(_) | Value::Float(_) | Value::Null);
    if !numeric(l) || !numeric(r) {
        return Err(type_error(op.symbol(), l, r));
    }
    if l.is_null() || r.is_null() {
        return Ok(Value::Null);
    }
    if op == BinOp::Div {
        let (a, b) = (l.as_f64().unwrap_or(0.0), r.as_f64().unwrap_or(0.0));
        if b == 0.0 {
            note(warnings, Warning::DivisionByZero);
            return Ok(Value::Null);
        }
        return Ok(finite(a / b, warnings));
    }
    if let (Value::Int(a), Value::Int(b)) = (l, r) {
        let out = match op {
            BinOp::Add => a.checked_add(*b),
            BinOp::Sub => a.checked_sub(*b),
            _ => a.checked_mul(*b),
        };
        return Ok(out.map_or_else(
            || {
                note(warnings, Warning::IntegerOverflow);
                Value::Null
            },
            Value::Int,
        ));
    }
    let (a, b) = (l.as_f64().unwrap_or(0.0), r.as_f64().unwrap_or(0.0));
    let x = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        _ => a * b,
    };
    Ok(finite(x, warnings))
}

/// Ordering between two non-null values of comparable types.
pub fn compare_values(l: &Value, r: &Value) -> Option<Ordering> {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
            l.as_f64()?.partial_cmp(&r.as_f64()?)
        }
        (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
        (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
        (Value::DateTime(a), Value::DateTime(b)) => Some(a.cmp(b)),
        (Value::DateTime(a), Value::Text(s)) => parse_datetime(s.trim()).map(|b| a.cmp(&b)),
        (Value::Text(s), Value::DateTime(b)) => parse_datetime(s.trim()).map(|a| a.cmp(b)),
        _ => None,
    }
}

fn compare(op: BinOp, l: &Value, r: &Value) -> Result<Value, EvalError> {
    if l.is_null() || r.is_null() {
        return Ok(Value::Null);
    }
    let ord = compare_values(l, r).ok_or_else(|| type_error(op.symbol(), l, r))?;
    let b = match op {
        BinOp::Eq => ord == Ordering::Equal,
        BinOp::Ne => ord != Ordering::Equal,
        BinOp::Lt => ord == Ordering::Less,
        BinOp::Le => ord != Ordering::Greater,
        BinOp::Gt => ord == Ordering::Greater,
        _ => ord != Ordering::Less,
    };
    Ok(Value::Bool(b))
}

/// Static type of `e` under `schema`. `Ok(None)` means the expression is
/// untyped (a bare NULL).
pub fn expr_type(e: &Expr, schema: &Schema) -> Result<Option<ColumnType>, EvalError> {
    let tname = |t: Option<ColumnType>| t.map_or("null", ColumnType::name).to_string();
    let terr = |op: &str, l: Option<ColumnType>, r: Option<ColumnType>| EvalError::TypeError {
        op: op.to_string(),
        lhs_type: tname(l),
        rhs_type: tname(r),
    };
    match e {
        Expr::Lit(v) => Ok(v.column_type()),
        Expr::Col(name) => schema
            .column(name)
            .map(|c| Some(c.ctype))
            .ok_or_else(|| EvalError::UnknownColumn(name.clone())),
        Expr::Unary(UnaryOp::Neg, inner) => match expr_type(inner, schema)? {
            t @ (None | Some(ColumnType::Int | ColumnType::Float)) => Ok(t),
            t => Err(terr("-", t, None)),
        },
        Expr::Unary(UnaryOp::Not, inner) => match expr_type(inner, schema)? {
            None | Some(ColumnType::Bool) => Ok(Some(ColumnType::Bool)),
            t => Err(terr("NOT", t, None)),
        },
        Expr::Binary(op, l, r) => {
            let (lt, rt) = (expr_type(l, schema)?, expr_type(r, schema)?);
            if op.is_logical() {
                let ok = |t: Option<ColumnType>| matches!(t, None | Some(ColumnType::Bool));
                return if ok(lt) && ok(rt) {
                    Ok(Some(ColumnType::Bool))
                } else {
                    Err(terr(op.symbol(), lt, rt))
                };
            }
            if op.is_arithmetic() {
                let ok = |t: Option<ColumnType>| t.is_none_or(ColumnType::is_numeric);
                if !ok(lt) || !ok(rt) {
                    return Err(terr(op.symbol(), lt, rt));
                }
                return Ok(match (op, lt, rt) {
                    (BinOp::Div, ..) => Some(ColumnType::Float),
                    (_, Some(ColumnType::Float), _) | (_, _, Some(ColumnType::Float)) => Some(ColumnType::Float),
                    (_, Some(ColumnType::Int), _) | (_, _, Some(ColumnType::Int)) => Some(ColumnType::Int),
                    _ => None,
                });
            }
            let comparable = match (lt, rt) {
                (None, _) | (_, None) => true,
                (Some(a), Some(b)) => {
                    a == b
                        || (a.is_numeric() && b.is_numeric())
                        || matches!(
                            (a, b),
                            (ColumnType::DateTime, ColumnType::String) | (ColumnType::String, ColumnType::DateTime)
                        )
                }
            };
            if comparable {
                Ok(Some(ColumnType::Bool))
            } else {
                Err(terr(op.symbol(), lt, rt))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_expr;
    use super::*;
    use crate::table::ColumnMeta;

    fn schema() -> Schema {
        Schema::new(
            "movies",
            vec![
                ColumnMeta::new("title", ColumnType::String),
                ColumnMeta::new("box_office", ColumnType::Int),
                ColumnMeta::new("cost", ColumnType::Int),
            ],
        )
        .unwrap()
    }

    fn eval(src: &str, row: &[Value]) -> (Result<Value, EvalError>, Vec<Warning>) {
        let mut w = Vec::new();
        let r = eval_expr(&parse_expr(src).unwrap(), row, &schema(), &mut w);
        (r, w)
    }

    #[test]
    fn profit_margin_arithmetic() {
        let row = [Value::text("B"), Value::Int(300), Value::Int(100)];
        let (v, w) = eval("(box_office - cost) / cost", &row);
        assert_eq!(v.unwrap(), Value::Float(2.0));
        assert!(w.is_empty());
    }

    #[test]
    fn null_propagates() {
        let row = [Value::text("B"), Value::Null, Value::Int(100)];
        assert_eq!(eval("(box_office - cost) / cost", &row).0.unwrap(), Value::Null);
        assert_eq!(eval("box_office > 3", &row).0.unwrap(), Value::Null);
    }

    #[test]
    fn division_by_zero_warns() {
        let row = [Value::text("Z"), Value::Int(10), Value::Int(0)];
        let (v, w) = eval("(box_office - cost) / cost", &row);
        assert_eq!(v.unwrap(), Value::Null);
        assert_eq!(w, vec![Warning::DivisionByZero]);
    }

    #[test]
    fn text_plus_int_is_type_error() {
        let row = [Value::text("B"), Value::Int(300), Value::Int(100)];
        let (v, _) = eval("title + cost", &row);
        assert_eq!(
            v.unwrap_err(),
            EvalError::TypeError {
                op: "+".into(),
                lhs_type: "string".into(),
                rhs_type: "int".into()
            }
        );
        assert!(expr_type(&parse_expr("title + cost").unwrap(), &schema()).is_err());
    }

    #[test]
    fn three_valued_logic() {
        let row = [Value::text("B"), Value::Null, Value::Int(100)];
        assert_eq!(eval("box_office > 1 AND FALSE", &row).0.unwrap(), Value::Bool(false));
        assert_eq!(eval("box_office > 1 OR TRUE", &row).0.unwrap(), Value::Bool(true));
        assert_eq!(eval("box_office > 1 AND TRUE", &row).0.unwrap(), Value::Null);
        assert_eq!(eval("NOT box_office > 1", &row).0.unwrap(), Value::Null);
    }

    #[test]
    fn int_arithmetic_stays_int_and_overflow_is_null() {
        let row = [Value::text("B"), Value::Int(i64::MAX), Value::Int(2)];
        assert_eq!(eval("cost * 3", &row).0.unwrap(), Value::Int(6));
        assert_eq!(eval("cost * 1.5", &row).0.unwrap(), Value::Float(3.0));
        let (v, w) = eval("box_office + cost", &row);
        assert_eq!(v.unwrap(), Value::Null);
        assert_eq!(w, vec![Warning::IntegerOverflow]);
    }

    #[test]
    fn non_finite_float_is_null() {
        let row = [Value::text("B"), Value::Int(1), Value::Int(1)];
        let (v, w) = eval("1e308 * 10.0", &row);
        assert_eq!(v.unwrap(), Value::Null);
        assert_eq!(w, vec![Warning::NonFiniteResult]);
    }

    #[test]
    fn static_types() {
        let s = schema();
        let t = |src: &str| expr_type(&parse_expr(src).unwrap(), &s);
        assert_eq!(t("(box_office - cost) / cost").unwrap(), Some(ColumnType::Float));
        assert_eq!(t("cost + 1").unwrap(), Some(ColumnType::Int));
        assert_eq!(t("title = 'x'").unwrap(), Some(ColumnType::Bool));
        assert_eq!(t("NULL").unwrap(), None);
        assert!(t("title > 1").is_err());
        assert!(matches!(t("nosuch + 1"), Err(EvalError::UnknownColumn(_))));
    }
}
