use proptest::prelude::*;
use rand::seq::SliceRandom;
use tabchain_core::command::{parse_chain, CommandChain};
use tabchain_core::runtime::{execute, validate};
use tabchain_core::stats::column_stats;
use tabchain_core::table::permute;
use tabchain_core::{load_csv, to_csv, ColumnType, CsvOptions, Table, Value};
use tabchain_testkit::{gen, movies};

fn shuffled_rows(t: &Table, seed: u64) -> Table {
    let mut perm: Vec<usize> = (0..t.num_rows()).collect();
    perm.shuffle(&mut gen::rng(seed));
    permute(t, Some(&perm), None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn stats_ignore_row_order(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let t = gen::random_table(&mut rng, 12, 5);
        let p = shuffled_rows(&t, seed ^ 0x5eed);
        for name in t.schema().names() {
            // Debug formatting tells -0.0 from 0.0, so this is a bitwise check.
            prop_assert_eq!(
                format!("{:?}", column_stats(&t, name).unwrap()),
                format!("{:?}", column_stats(&p, name).unwrap())
            );
        }
    }

    #[test]
    fn inferred_schema_ignores_row_order(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let t = gen::random_table(&mut rng, 12, 5);
        let a = load_csv(to_csv(&t, b',').as_bytes(), &CsvOptions::default()).unwrap();
        let b = load_csv(to_csv(&shuffled_rows(&t, seed), b',').as_bytes(), &CsvOptions::default()).unwrap();
        prop_assert_eq!(a.schema(), b.schema());
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let t = gen::random_table(&mut rng, 12, 5);
        let back = load_csv(to_csv(&t, b',').as_bytes(), &CsvOptions::named("t")).unwrap();
        prop_assert_eq!(back.num_rows(), t.num_rows());
        for (c, meta) in t.schema().columns.iter().enumerate() {
            // Empty strings and nulls share the empty CSV field.
            let expect: Vec<Value> = t
                .column_at(c)
                .iter()
                .map(|v| if *v == Value::text("") { Value::Null } else { v.clone() })
                .collect();
            let ty = if expect.iter().all(Value::is_null) { ColumnType::String } else { meta.ctype };
            prop_assert_eq!(back.schema().columns[c].ctype, ty);
            prop_assert_eq!(back.column_at(c), &expect[..]);
        }
    }

    #[test]
    fn valid_chains_execute(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let t = gen::random_table(&mut rng, 10, 5);
        let chain = gen::random_chain(&mut rng, t.schema(), 6);
        prop_assert!(validate(&chain, t.schema()).is_ok());
        let before = t.clone();
        let a = execute(&chain, &t).unwrap();
        let b = execute(&chain, &t).unwrap();
        prop_assert_eq!(&t, &before);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sort_on_constant_column_is_identity(seed in any::<u64>(), desc in any::<bool>()) {
        let mut rng = gen::rng(seed);
        let t = gen::random_table(&mut rng, 10, 4);
        let chain = parse_chain(&format!("DERIVE k = 1; SORT k {}", if desc { "DESC" } else { "ASC" })).unwrap();
        let out = execute(&chain, &t).unwrap().table;
        for c in 0..t.num_columns() {
            prop_assert_eq!(out.column_at(c), t.column_at(c));
        }
    }

    #[test]
    fn filter_true_and_wide_slices_are_identity(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let t = gen::random_table(&mut rng, 10, 4);
        for text in ["FILTER TRUE", "SLICE TOP 100", "SLICE 0 TO 100", ""] {
            prop_assert_eq!(&execute(&parse_chain(text).unwrap(), &t).unwrap().table, &t);
        }
    }
}

#[test]
fn empty_chain_is_identity_with_reply() {
    let t = movies();
    let out = execute(&CommandChain::default(), &t).unwrap();
    assert_eq!(out.table, t);
    assert!(out.step_logs.is_empty());
    assert!(out.reply.contains("unchanged"));
}

#[test]
fn golden_chain() {
    let t = movies();
    let chain = parse_chain("DERIVE profit_margin = (box_office - cost) / cost; SORT profit_margin DESC; SLICE TOP 5")
        .unwrap();
    let out = execute(&chain, &t).unwrap();
    let titles: Vec<String> = out.table.column("title").unwrap().iter().map(ToString::to_string).collect();
    assert_eq!(titles, ["B", "E", "A", "D", "F"]);
    assert_eq!(out.table.column("profit_margin").unwrap()[0], Value::Float(2.0));
}

#[test]
fn mutating_commands_leave_source_alone() {
    let t = movies();
    let before = t.clone();
    let chain = parse_chain("UPDATE cost = 0 WHERE cost > 50; INSERT VALUES ('G', 1, 2); DELETE WHERE cost = 0").unwrap();
    let out = execute(&chain, &t).unwrap();
    assert_eq!(t, before);
    assert_eq!(out.table.num_rows(), 4);
}
