//! Seeded generator of small mixed-type tables for pretraining.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use tabchain_core::{ColumnMeta, ColumnType, Schema, Table, Value};

const NAMES: [&str; 24] = [
    "price", "quantity", "revenue", "cost", "age", "score", "rating", "weight", "height", "distance", "duration",
    "city", "category", "status", "region", "product", "customer", "active", "verified", "created", "updated",
    "discount", "temperature", "count",
];
const WORDS: [&str; 12] = [
    "north", "south", "east", "west", "alpha", "beta", "gamma", "red", "green", "blue", "small", "large",
];

#[derive(Debug, Clone, Copy)]
enum Kind {
    Gaussian { mean: f64, sd: f64 },
    Heavy { mu: f64, sigma: f64 },
    Waiting { rate: f64 },
    Counts { hi: i64 },
    Category { levels: usize },
    Flag { p: f64 },
    Stamp { start: i64 },
}

fn pick_kind(rng: &mut ChaCha8Rng) -> (Kind, ColumnType) {
    match rng.random_range(0..7) {
        0 => (
            Kind::Gaussian {
                mean: rng.random_range(-50.0..200.0),
                sd: rng.random_range(0.5..40.0),
            },
            ColumnType::Float,
        ),
        1 => (
            Kind::Heavy {
                mu: rng.random_range(0.0..6.0),
                sigma: rng.random_range(0.2..1.5),
            },
            ColumnType::Float,
        ),
        2 => (Kind::Waiting { rate: rng.random_range(0.05..2.0) }, ColumnType::Float),
        3 => (Kind::Counts { hi: rng.random_range(1..1000) }, ColumnType::Int),
        4 => (Kind::Category { levels: rng.random_range(1..=WORDS.len()) }, ColumnType::String),
        5 => (Kind::Flag { p: rng.random_range(0.05..0.95) }, ColumnType::Bool),
        _ => (
            Kind::Stamp {
                start: rng.random_range(946_684_800..1_700_000_000),
            },
            ColumnType::DateTime,
        ),
    }
}

fn sample(kind: Kind, rng: &mut ChaCha8Rng) -> Value {
    match kind {
        Kind::Gaussian { mean, sd } => Value::float(Normal::new(mean, sd).expect("sd > 0").sample(rng)),
        Kind::Heavy { mu, sigma } => Value::float(LogNormal::new(mu, sigma).expect("sigma > 0").sample(rng)),
        Kind::Waiting { rate } => Value::float(Exp::new(rate).expect("rate > 0").sample(rng)),
        Kind::Counts { hi } => Value::Int(rng.random_range(0..=hi)),
        Kind::Category { levels } => Value::text(*WORDS[..levels].choose(rng).expect("levels ≥ 1")),
        Kind::Flag { p } => Value::Bool(rng.random_bool(p)),
        Kind::Stamp { start } => Value::DateTime(start + rng.random_range(0..86_400 * 365)),
    }
}

/// One table with 2 to 8 columns and 10 to 60 rows.
pub fn synthetic_table(rng: &mut ChaCha8Rng, name: &str) -> Table {
    let n_cols = rng.random_range(2..=8);
    let n_rows = rng.random_range(10..=60);
    let names: Vec<&str> = NAMES.choose_multiple(rng, n_cols).copied().collect();
    let mut columns = Vec::with_capacity(n_cols);
    let mut metas = Vec::with_capacity(n_cols);
    for col_name in names {
        let (kind, ctype) = pick_kind(rng);
        let null_rate = if rng.random_bool(0.3) { rng.random_range(0.0..0.3) } else { 0.0 };
        let cells = (0..n_rows)
            .map(|_| if rng.random_bool(null_rate) { Value::Null } else { sample(kind, rng) })
            .collect();
        columns.push(cells);
        metas.push(ColumnMeta::new(col_name, ctype));
    }
    let schema = Schema::new(name, metas).expect("names are distinct");
    Table::new(schema, columns).expect("columns are rectangular")
}

pub fn synthetic_corpus(n_tables: usize, seed: u64) -> Vec<Table> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_tables)
        .map(|i| synthetic_table(&mut rng, &format!("synthetic_{i:03}")))
        .collect()
}
