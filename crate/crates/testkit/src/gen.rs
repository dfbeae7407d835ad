//! Seeded generators for small typed tables and chains that pass
//! validation against them.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabchain_core::command::{
    default_agg_name, AggFunc, Aggregate, BinOp, Command, CommandChain, Expr, PlotKind, SortOrder, UnaryOp,
};
use tabchain_core::runtime::{evolve, validate};
use tabchain_core::value::format_datetime;
use tabchain_core::{ColumnMeta, ColumnType, Schema, Table, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const NAME_POOL: [&str; 10] = ["price", "qty", "name", "flag", "when", "score", "rank", "label", "cost", "cast"];

/// Synonyms attached by [`with_synonyms`].
pub const SYNONYMS: [(&str, &[&str]); 4] = [
    ("price", &["amount", "unit price"]),
    ("qty", &["quantity", "units"]),
    ("name", &["title"]),
    ("score", &["points", "rating"]),
];

const TYPES: [ColumnType; 5] = [
    ColumnType::Int,
    ColumnType::Float,
    ColumnType::String,
    ColumnType::Bool,
    ColumnType::DateTime,
];

const INTS: [i64; 9] = [-3, -1, 0, 0, 1, 2, 5, 7, 40];
const FLOATS: [f64; 8] = [-2.5, -0.0, 0.0, 0.5, 1.0, 3.25, 12.75, 1000.0];
const TEXTS: [&str; 6] = ["x", "y", "z", "", "Ab", "x y"];
const TIMES: [i64; 5] = [0, 86_400, -86_400, 1_000_000_000, 1_600_000_000];

pub const NULL_PROB: f64 = 0.15;

pub fn random_value(rng: &mut impl Rng, ty: ColumnType) -> Value {
    match ty {
        ColumnType::Int => {
            if rng.random_bool(0.03) {
                Value::Int(*[i64::MAX, i64::MIN].choose(rng).unwrap())
            } else {
                Value::Int(*INTS.choose(rng).unwrap())
            }
        }
        ColumnType::Float => Value::Float(*FLOATS.choose(rng).unwrap()),
        ColumnType::String => Value::text(*TEXTS.choose(rng).unwrap()),
        ColumnType::Bool => Value::Bool(rng.random()),
        ColumnType::DateTime => Value::DateTime(*TIMES.choose(rng).unwrap()),
    }
}

fn cell(rng: &mut impl Rng, ty: ColumnType) -> Value {
    if rng.random_bool(NULL_PROB) {
        Value::Null
    } else {
        random_value(rng, ty)
    }
}

/// A table of 1..=`max_cols` typed columns and 0..=`max_rows` rows.
pub fn random_table(rng: &mut impl Rng, max_rows: usize, max_cols: usize) -> Table {
    let ncols = rng.random_range(1..=max_cols.min(NAME_POOL.len()));
    let nrows = rng.random_range(0..=max_rows);
    let names: Vec<&str> = NAME_POOL.choose_multiple(rng, ncols).copied().collect();
    let columns: Vec<ColumnMeta> = names
        .iter()
        .map(|n| ColumnMeta::new(*n, *TYPES.choose(rng).unwrap()))
        .collect();
    let data: Vec<Vec<Value>> = columns
        .iter()
        .map(|c| (0..nrows).map(|_| cell(rng, c.ctype)).collect())
        .collect();
    Table::new(Schema::new("t", columns).unwrap(), data).unwrap()
}

pub fn with_synonyms(t: Table) -> Table {
    let map: Vec<(String, Vec<String>)> = SYNONYMS
        .iter()
        .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
        .collect();
    let schema = t.schema().clone().with_synonyms(map.iter().map(|(k, v)| (k, v)));
    t.with_schema_synonyms(schema)
}

fn cols_of(schema: &Schema, pred: impl Fn(ColumnType) -> bool) -> Vec<&ColumnMeta> {
    schema.columns.iter().filter(|c| pred(c.ctype)).collect()
}

fn time_literal(rng: &mut impl Rng) -> Value {
    let t = *TIMES.choose(rng).unwrap();
    if rng.random_bool(0.5) {
        Value::DateTime(t)
    } else {
        Value::Text(format_datetime(t))
    }
}

/// Numeric expression; Int-typed when `int_only`.
fn num_expr(rng: &mut impl Rng, schema: &Schema, depth: usize, int_only: bool) -> Expr {
    let cols = cols_of(schema, |t| if int_only { t == ColumnType::Int } else { t.is_numeric() });
    let choice = if depth == 0 { rng.random_range(0..3) } else { rng.random_range(0..6) };
    match choice {
        0 if !cols.is_empty() => Expr::col(cols.choose(rng).unwrap().name.clone()),
        0 | 1 => {
            if int_only || rng.random_bool(0.5) {
                Expr::Lit(Value::Int(*INTS.choose(rng).unwrap()))
            } else {
                Expr::Lit(Value::Float(*FLOATS.choose(rng).unwrap()))
            }
        }
        2 => {
            if rng.random_bool(0.2) {
                Expr::Lit(Value::Null)
            } else if !cols.is_empty() {
                Expr::col(cols.choose(rng).unwrap().name.clone())
            } else {
                Expr::Lit(Value::Int(2))
            }
        }
        3 => Expr::unary(UnaryOp::Neg, num_expr(rng, schema, depth - 1, int_only)),
        _ => {
            let ops: &[BinOp] = if int_only {
                &[BinOp::Add, BinOp::Sub, BinOp::Mul]
            } else {
                &[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]
            };
            let op = *ops.choose(rng).unwrap();
            Expr::binary(
                op,
                num_expr(rng, schema, depth - 1, int_only),
                num_expr(rng, schema, depth - 1, int_only),
            )
        }
    }
}

fn comparison(rng: &mut impl Rng) -> BinOp {
    *[BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge]
        .choose(rng)
        .unwrap()
}

fn bool_expr(rng: &mut impl Rng, schema: &Schema, depth: usize) -> Expr {
    let choice = if depth == 0 { rng.random_range(0..3) } else { rng.random_range(0..6) };
    match choice {
        0 => {
            let bools = cols_of(schema, |t| t == ColumnType::Bool);
            match bools.choose(rng) {
                Some(c) => Expr::col(c.name.clone()),
                None => Expr::Lit(if rng.random_bool(0.1) { Value::Null } else { Value::Bool(rng.random()) }),
            }
        }
        1 => Expr::binary(comparison(rng), num_expr(rng, schema, 1, false), num_expr(rng, schema, 1, false)),
        2 => {
            let other = cols_of(schema, |t| matches!(t, ColumnType::String | ColumnType::DateTime | ColumnType::Bool));
            match other.choose(rng) {
                Some(c) => {
                    let rhs = match c.ctype {
                        ColumnType::DateTime => time_literal(rng),
                        ty => random_value(rng, ty),
                    };
                    Expr::binary(comparison(rng), Expr::col(c.name.clone()), Expr::Lit(rhs))
                }
                None => Expr::binary(comparison(rng), num_expr(rng, schema, 0, false), Expr::Lit(Value::Int(1))),
            }
        }
        3 => Expr::unary(UnaryOp::Not, bool_expr(rng, schema, depth - 1)),
        _ => Expr::binary(
            *[BinOp::And, BinOp::Or].choose(rng).unwrap(),
            bool_expr(rng, schema, depth - 1),
            bool_expr(rng, schema, depth - 1),
        ),
    }
}

fn value_expr(rng: &mut impl Rng, schema: &Schema, ty: ColumnType) -> Expr {
    match ty {
        ColumnType::Int => num_expr(rng, schema, 2, true),
        ColumnType::Float => num_expr(rng, schema, 2, false),
        ColumnType::Bool => bool_expr(rng, schema, 2),
        ColumnType::DateTime => Expr::Lit(time_literal(rng)),
        ColumnType::String => {
            let texts = cols_of(schema, |t| t == ColumnType::String);
            match texts.choose(rng) {
                Some(c) if rng.random_bool(0.3) => Expr::col(c.name.clone()),
                _ => Expr::Lit(Value::text(*TEXTS.choose(rng).unwrap())),
            }
        }
    }
}

fn pick_name(rng: &mut impl Rng, schema: &Schema) -> String {
    schema.columns.choose(rng).expect("non-empty schema").name.clone()
}

fn subset(rng: &mut impl Rng, names: &[String], max: usize) -> Vec<String> {
    let k = rng.random_range(1..=names.len().min(max));
    let mut out: Vec<String> = names.choose_multiple(rng, k).cloned().collect();
    out.shuffle(rng);
    out
}

/// One random command over `schema`; not guaranteed to validate.
pub fn random_command(rng: &mut impl Rng, schema: &Schema, last: bool) -> Command {
    let names: Vec<String> = schema.names().map(str::to_string).collect();
    let numeric: Vec<String> = cols_of(schema, ColumnType::is_numeric)
        .iter()
        .map(|c| c.name.clone())
        .collect();
    let kinds = if last && !numeric.is_empty() { 14 } else { 13 };
    match rng.random_range(0..kinds) {
        0 => {
            let mut cols = subset(rng, &names, 3);
            if rng.random_bool(0.1) {
                cols.push(cols[0].clone());
            }
            Command::Select(cols)
        }
        1 | 2 => Command::Filter(bool_expr(rng, schema, 2)),
        3 => Command::Sort {
            column: pick_name(rng, schema),
            order: if rng.random_bool(0.5) { SortOrder::Asc } else { SortOrder::Desc },
        },
        4 => {
            let nkeys = rng.random_range(0..=2.min(names.len()));
            let keys: Vec<String> = names.choose_multiple(rng, nkeys).cloned().collect();
            let naggs = rng.random_range(1..=2);
            let aggs = (0..naggs)
                .map(|_| {
                    let func = *AggFunc::ALL.choose(rng).unwrap();
                    let column = if func.requires_numeric() && !numeric.is_empty() {
                        numeric.choose(rng).unwrap().clone()
                    } else {
                        pick_name(rng, schema)
                    };
                    Aggregate {
                        func,
                        out_name: default_agg_name(func, &column),
                        column,
                    }
                })
                .collect();
            Command::GroupBy { keys, aggs }
        }
        5 => {
            let name = if rng.random_bool(0.3) {
                pick_name(rng, schema)
            } else {
                format!("d{}", rng.random_range(0..3))
            };
            let expr = if rng.random_bool(0.7) {
                num_expr(rng, schema, 2, false)
            } else {
                bool_expr(rng, schema, 2)
            };
            Command::Derive { name, expr }
        }
        6 => Command::SliceTop(rng.random_range(1..=10)),
        7 => {
            let lo = rng.random_range(0..6);
            Command::SliceRange {
                lo,
                hi: rng.random_range(lo..=10),
            }
        }
        8 => {
            let col = schema.columns.choose(rng).unwrap();
            Command::Update {
                column: col.name.clone(),
                value: value_expr(rng, schema, col.ctype),
                predicate: if rng.random_bool(0.2) {
                    Expr::Lit(Value::Bool(true))
                } else {
                    bool_expr(rng, schema, 1)
                },
            }
        }
        9 => Command::InsertRow(
            schema
                .columns
                .iter()
                .map(|c| match c.ctype {
                    _ if rng.random_bool(NULL_PROB) => Value::Null,
                    ColumnType::Float if rng.random_bool(0.3) => Value::Int(*INTS.choose(rng).unwrap()),
                    ColumnType::DateTime => time_literal(rng),
                    ty => random_value(rng, ty),
                })
                .collect(),
        ),
        10 => Command::DeleteWhere(bool_expr(rng, schema, 2)),
        11 => Command::Describe(if rng.random_bool(0.5) {
            None
        } else {
            Some(subset(rng, &names, 2))
        }),
        12 => {
            let kind = *PlotKind::ALL.choose(rng).unwrap();
            let (x, y, agg) = match kind {
                PlotKind::Hist => (
                    numeric.choose(rng).cloned().unwrap_or_else(|| pick_name(rng, schema)),
                    None,
                    None,
                ),
                _ => (
                    pick_name(rng, schema),
                    Some(pick_name(rng, schema)),
                    if rng.random_bool(0.5) { Some(*AggFunc::ALL.choose(rng).unwrap()) } else { None },
                ),
            };
            Command::Plot { kind, x, y, agg }
        }
        _ => Command::Predict {
            target: numeric.choose(rng).unwrap().clone(),
            using: if rng.random_bool(0.5) {
                None
            } else {
                Some(subset(rng, &numeric, 2))
            },
        },
    }
}

/// A chain of up to `max_len` commands that validates against `schema`.
pub fn random_chain(rng: &mut impl Rng, schema: &Schema, max_len: usize) -> CommandChain {
    let len = if max_len == 0 || rng.random_bool(0.03) {
        0
    } else {
        rng.random_range(1..=max_len)
    };
    let mut current = schema.clone();
    let mut commands = Vec::with_capacity(len);
    for i in 0..len {
        let last = i + 1 == len;
        let mut cmd = Command::SliceTop(rng.random_range(1..=5));
        for _ in 0..10 {
            let candidate = random_command(rng, &current, last);
            if validate(&CommandChain::new(vec![candidate.clone()]), &current).is_ok() {
                cmd = candidate;
                break;
            }
        }
        current = evolve(&current, &cmd);
        commands.push(cmd);
    }
    CommandChain::new(commands)
}

/// Misspell one column name: case change, spaces for underscores, a
/// dropped or doubled character, or a synonym.
pub fn misspell(rng: &mut impl Rng, name: &str) -> String {
    let chars: Vec<char> = name.chars().collect();
    match rng.random_range(0..5) {
        0 => name.to_uppercase(),
        1 => {
            let mut s: String = name.replace('_', " ");
            if let Some(first) = s.get(..1) {
                s = first.to_uppercase() + &s[1..];
            }
            s
        }
        2 if chars.len() > 2 => {
            let i = rng.random_range(0..chars.len());
            chars.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c).collect()
        }
        3 => {
            let i = rng.random_range(0..chars.len().max(1));
            let mut out = chars.clone();
            if let Some(c) = chars.get(i) {
                out.insert(i, *c);
            }
            out.into_iter().collect()
        }
        _ => SYNONYMS
            .iter()
            .find(|(k, _)| *k == name)
            .and_then(|(_, syns)| syns.choose(rng))
            .map_or_else(|| name.to_string(), |s| s.to_string()),
    }
}

/// Misspell roughly half of the column references in `chain`.
pub fn perturb(rng: &mut impl Rng, chain: &CommandChain) -> CommandChain {
    let mut out = chain.clone();
    for cmd in &mut out.commands {
        cmd.rename_refs(|name| rng.random_bool(0.5).then(|| misspell(rng, name)));
    }
    out
}
