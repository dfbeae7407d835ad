//! Proptest strategies over the command AST, for syntax-level properties.
//! Generated chains are well formed but not checked against any schema.

use proptest::prelude::*;
use tabchain_core::command::{AggFunc, Aggregate, BinOp, Command, CommandChain, Expr, PlotKind, SortOrder, UnaryOp};
use tabchain_core::Value;

const AWKWARD_NAMES: [&str; 16] = [
    "and", "OR", "not", "Null", "true", "where", "timestamp", "select", "sort", "top", "asc", "desc", "using",
    "as", "to", "agg",
];

/// Column names: plain identifiers, reserved words, and names that need
/// backtick quoting (spaces, punctuation, backticks, non-ASCII).
pub fn ident() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z_][a-z0-9_]{0,8}",
        1 => prop::sample::select(AWKWARD_NAMES.to_vec()).prop_map(str::to_string),
        1 => "[a-zA-Z][a-zA-Z ]{0,8}[a-z]",
        1 => "[ -~]{1,8}",
        1 => "[à-ÿ]{1,5}",
        1 => "[0-9][a-z0-9]{0,4}",
    ]
}

pub fn float() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        (-1000i32..1000).prop_map(|i| i as f64 / 8.0),
        Just(-0.0),
        Just(f64::MAX),
        Just(f64::MIN_POSITIVE),
    ]
}

pub fn literal() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        (-100i64..100).prop_map(Value::Int),
        float().prop_map(Value::Float),
        "[ -~]{0,10}".prop_map(Value::Text),
        "\\PC{0,6}".prop_map(Value::Text),
        (-2_208_988_800i64..253_402_300_799).prop_map(Value::DateTime),
    ]
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop::sample::select(vec![
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::And,
        BinOp::Or,
    ])
}

pub fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![literal().prop_map(Expr::Lit), ident().prop_map(Expr::Col)];
    leaf.prop_recursive(5, 32, 2, |inner| {
        prop_oneof![
            (prop::sample::select(vec![UnaryOp::Neg, UnaryOp::Not]), inner.clone())
                .prop_map(|(op, e)| Expr::unary(op, e)),
            (binop(), inner.clone(), inner).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
        ]
    })
}

fn idents(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(ident(), 1..=max)
}

fn agg_func() -> impl Strategy<Value = AggFunc> {
    prop::sample::select(AggFunc::ALL.to_vec())
}

fn plot() -> impl Strategy<Value = Command> {
    (
        prop::sample::select(PlotKind::ALL.to_vec()),
        ident(),
        prop::option::of(ident()),
        prop::option::of(agg_func()),
    )
        .prop_map(|(kind, x, mut y, mut agg)| {
            if kind == PlotKind::Hist {
                y = None;
                agg = None;
            }
            if kind == PlotKind::Bar && agg.is_some() && y.is_none() {
                y = Some(x.clone());
            }
            Command::Plot { kind, x, y, agg }
        })
}

/// Any command except `PREDICT`, which may only close a chain.
pub fn command() -> impl Strategy<Value = Command> {
    let order = prop_oneof![Just(SortOrder::Asc), Just(SortOrder::Desc)];
    prop_oneof![
        idents(4).prop_map(Command::Select),
        expr().prop_map(Command::Filter),
        (ident(), order).prop_map(|(column, order)| Command::Sort { column, order }),
        (
            prop::collection::vec(ident(), 0..3),
            prop::collection::vec((agg_func(), ident(), ident()), 1..4),
        )
            .prop_map(|(keys, aggs)| Command::GroupBy {
                keys,
                aggs: aggs
                    .into_iter()
                    .map(|(func, column, out_name)| Aggregate { func, column, out_name })
                    .collect(),
            }),
        (ident(), expr()).prop_map(|(name, expr)| Command::Derive { name, expr }),
        (1usize..1_000_000).prop_map(Command::SliceTop),
        (0usize..1000, 0usize..1000).prop_map(|(a, b)| Command::SliceRange { lo: a.min(b), hi: a.max(b) }),
        (ident(), expr(), prop::option::of(expr())).prop_map(|(column, value, predicate)| Command::Update {
            column,
            value,
            predicate: predicate.unwrap_or(Expr::Lit(Value::Bool(true))),
        }),
        prop::collection::vec(literal(), 1..5).prop_map(Command::InsertRow),
        expr().prop_map(Command::DeleteWhere),
        prop::option::of(idents(3)).prop_map(Command::Describe),
        plot(),
    ]
}

pub fn predict() -> impl Strategy<Value = Command> {
    (ident(), prop::option::of(idents(3))).prop_map(|(target, using)| Command::Predict { target, using })
}

/// Chains of up to `max` commands, optionally closed by `PREDICT`.
pub fn chain(max: usize) -> impl Strategy<Value = CommandChain> {
    (prop::collection::vec(command(), 0..=max), prop::option::of(predict())).prop_map(move |(mut cmds, p)| {
        if let Some(p) = p {
            if cmds.len() == max {
                cmds.pop();
            }
            cmds.push(p);
        }
        CommandChain::new(cmds)
    })
}
