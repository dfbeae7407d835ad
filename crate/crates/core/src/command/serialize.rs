//! Canonical text form of chains: uppercase keywords, single spaces,
//! backticks only where a name is not a bare identifier, `;` + newline
//! between commands.

use crate::value::{format_datetime, Value};

use super::ast::{Command, CommandChain, Expr, SortOrder, UnaryOp};
use super::parser::is_reserved;

/// Keywords that may follow an optional identifier; quoting them keeps the
/// canonical form unambiguous.
const CONTEXTUAL: [&str; 8] = ["AGG", "AS", "ASC", "DESC", "TO", "TOP", "USING", "VALUES"];

fn is_bare_ident(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_reserved(name)
        && !CONTEXTUAL.iter().any(|k| k.eq_ignore_ascii_case(name))
}

/// Quote `name` with backticks when it cannot appear bare.
pub fn quote_ident(name: &str) -> String {
    if is_bare_ident(name) {
        name.to_string()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

fn literal(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Bool(true) => "TRUE".into(),
        Value::Bool(false) => "FALSE".into(),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => format!("{x:?}"),
        Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        Value::DateTime(t) => format!("TIMESTAMP '{}'", format_datetime(*t)),
    }
}

const NOT_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 9;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(UnaryOp::Not, _) => NOT_PRECEDENCE,
        _ => ATOM_PRECEDENCE,
    }
}

fn wrap(e: &Expr, parens: bool) -> String {
    let s = serialize_expr(e);
    if parens {
        format!("({s})")
    } else {
        s
    }
}

pub fn serialize_expr(e: &Expr) -> String {
    match e {
        Expr::Lit(v) => literal(v),
        Expr::Col(c) => quote_ident(c),
        Expr::Unary(UnaryOp::Neg, inner) => format!("-({})", serialize_expr(inner)),
        Expr::Unary(UnaryOp::Not, inner) => {
            format!("NOT {}", wrap(inner, precedence(inner) < NOT_PRECEDENCE))
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            let left_parens = precedence(l) < p || (op.is_comparison() && precedence(l) == p);
            let right_parens = precedence(r) <= p;
            format!("{} {} {}", wrap(l, left_parens), op.symbol(), wrap(r, right_parens))
        }
    }
}

fn ident_list(names: &[String]) -> String {
    names.iter().map(|n| quote_ident(n)).collect::<Vec<_>>().join(", ")
}

pub fn serialize_command(c: &Command) -> String {
    match c {
        Command::Select(cols) => format!("SELECT {}", ident_list(cols)),
        Command::Filter(e) => format!("FILTER {}", serialize_expr(e)),
        Command::Sort { column, order } => format!(
            "SORT {} {}",
            quote_ident(column),
            match order {
                SortOrder::Asc => "ASC",
                SortOrder::Desc => "DESC",
            }
        ),
        Command::GroupBy { keys, aggs } => {
            let aggs = aggs
                .iter()
                .map(|a| {
                    format!(
                        "{}({}) AS {}",
                        a.func.keyword(),
                        quote_ident(&a.column),
                        quote_ident(&a.out_name)
                    )
                })
                .collect::<Vec<_>>()
                .join(", ");
            if keys.is_empty() {
                format!("GROUPBY {aggs}")
            } else {
                format!("GROUPBY {} {aggs}", ident_list(keys))
            }
        }
        Command::Derive { name, expr } => {
            format!("DERIVE {} = {}", quote_ident(name), serialize_expr(expr))
        }
        Command::SliceTop(n) => format!("SLICE TOP {n}"),
        Command::SliceRange { lo, hi } => format!("SLICE {lo} TO {hi}"),
        Command::Update {
            column,
            value,
            predicate,
        } => {
            let head = format!("UPDATE {} = {}", quote_ident(column), serialize_expr(value));
            if *predicate == Expr::Lit(Value::Bool(true)) {
                head
            } else {
                format!("{head} WHERE {}", serialize_expr(predicate))
            }
        }
        Command::InsertRow(values) => format!(
            "INSERT VALUES ({})",
            values.iter().map(literal).collect::<Vec<_>>().join(", ")
        ),
        Command::DeleteWhere(e) => format!("DELETE WHERE {}", serialize_expr(e)),
        Command::Describe(None) => "DESCRIBE".into(),
        Command::Describe(Some(cols)) if cols.is_empty() => "DESCRIBE".into(),
        Command::Describe(Some(cols)) => format!("DESCRIBE {}", ident_list(cols)),
        Command::Plot { kind, x, y, agg } => {
            let mut s = format!("PLOT {} {}", kind.keyword(), quote_ident(x));
            if let Some(y) = y {
                s.push(' ');
                s.push_str(&quote_ident(y));
            }
            if let Some(f) = agg {
                s.push_str(" AGG ");
                s.push_str(f.keyword());
            }
            s
        }
        Command::Predict { target, using } => match using {
            Some(cols) if !cols.is_empty() => {
                format!("PREDICT {} USING {}", quote_ident(target), ident_list(cols))
            }
            _ => format!("PREDICT {}", quote_ident(target)),
        },
    }
}

pub fn serialize_chain(chain: &CommandChain) -> String {
    chain
        .commands
        .iter()
        .map(serialize_command)
        .collect::<Vec<_>>()
        .join(";\n")
}

#[cfg(test)]
mod tests {
    use super::super::ast::{Aggregate, AggFunc};
    use super::super::parser::{parse_chain, parse_expr};
    use super::*;

    #[test]
    fn slice_top() {
        assert_eq!(serialize_command(&Command::SliceTop(5)), "SLICE TOP 5");
    }

    #[test]
    fn quoting_rule() {
        let c = Command::Derive {
            name: "profit margin".into(),
            expr: Expr::col("cost"),
        };
        assert_eq!(serialize_command(&c), "DERIVE `profit margin` = cost");
        assert_eq!(quote_ident("and"), "`and`");
        assert_eq!(quote_ident("a`b"), "`a``b`");
        assert_eq!(quote_ident("sum"), "sum");
    }

    #[test]
    fn movie_chain_round_trip() {
        let text = "DERIVE profit_margin = (box_office - cost) / cost; SORT profit_margin DESC; SLICE TOP 5";
        let chain = parse_chain(text).unwrap();
        let canon = serialize_chain(&chain);
        assert_eq!(
            canon,
            "DERIVE profit_margin = (box_office - cost) / cost;\nSORT profit_margin DESC;\nSLICE TOP 5"
        );
        assert_eq!(parse_chain(&canon).unwrap(), chain);
    }

    #[test]
    fn minimal_parentheses() {
        for src in [
            "a - (b - c)",
            "(a - b) - c",
            "a * (b + c)",
            "NOT (a = b)",
            "(NOT a) = b",
            "(a < b) = c",
            "a AND (b OR c)",
            "a OR b AND c",
            "-(a) * -3",
            "a - -3.5",
        ] {
            let e = parse_expr(src).unwrap();
            let back = parse_expr(&serialize_expr(&e)).unwrap();
            assert_eq!(back, e, "{src} -> {}", serialize_expr(&e));
        }
        assert_eq!(serialize_expr(&parse_expr("(a - b) - c").unwrap()), "a - b - c");
        assert_eq!(serialize_expr(&parse_expr("a OR (b AND c)").unwrap()), "a OR b AND c");
    }

    #[test]
    fn every_command_round_trips() {
        let chain = CommandChain::new(vec![
            Command::Select(vec!["a".into(), "b c".into()]),
            Command::Filter(parse_expr("a > 1 AND NOT b = 'x'").unwrap()),
            Command::GroupBy {
                keys: vec![],
                aggs: vec![Aggregate::new(AggFunc::Count, "a")],
            },
            Command::SliceRange { lo: 0, hi: 0 },
            Command::Update {
                column: "a".into(),
                value: Expr::lit(Value::Null),
                predicate: parse_expr("a < 0").unwrap(),
            },
            Command::InsertRow(vec![
                Value::Int(-1),
                Value::Float(0.5),
                Value::text("o'k"),
                Value::Bool(false),
                Value::Null,
                Value::DateTime(86_400),
            ]),
            Command::DeleteWhere(parse_expr("a = NULL").unwrap()),
            Command::Describe(Some(vec!["a".into()])),
            Command::Plot {
                kind: crate::command::PlotKind::Scatter,
                x: "a".into(),
                y: Some("b".into()),
                agg: None,
            },
            Command::Predict {
                target: "a".into(),
                using: Some(vec!["b".into()]),
            },
        ]);
        assert_eq!(parse_chain(&serialize_chain(&chain)).unwrap(), chain);
    }
}
