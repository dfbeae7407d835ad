use proptest::prelude::*;
use tabchain_core::command::parse_chain;
use tabchain_core::planner::default_registry;
use tabchain_core::runtime::{apply_corrections, correct, validate, CorrectError, CorrectionMethod};
use tabchain_core::{ColumnMeta, ColumnType, Schema};
use tabchain_testkit::{gen, movies};

fn annotated_movies() -> Schema {
    default_registry().annotate(movies().schema())
}

#[test]
fn spaced_and_capitalized_name() {
    let out = correct(&parse_chain("SORT `Box Office` DESC").unwrap(), &annotated_movies()).unwrap();
    assert_eq!(out.chain.to_string(), "SORT box_office DESC");
    assert_eq!(out.corrections[0].method, CorrectionMethod::Normalize);
}

#[test]
fn synonym_from_registry() {
    let out = correct(&parse_chain("FILTER revenue > 100").unwrap(), &annotated_movies()).unwrap();
    assert_eq!(out.chain.to_string(), "FILTER box_office > 100");
    assert_eq!(out.corrections[0].method, CorrectionMethod::Synonym);
}

#[test]
fn equidistant_names_are_ambiguous() {
    let schema = Schema::new(
        "t",
        vec![ColumnMeta::new("cost", ColumnType::Int), ColumnMeta::new("cast", ColumnType::String)],
    )
    .unwrap();
    let err = correct(&parse_chain("SORT cst").unwrap(), &schema).unwrap_err();
    let CorrectError::AmbiguousColumn { name, candidates, .. } = err;
    assert_eq!(name, "cst");
    assert_eq!(candidates, ["cast", "cost"]);
}

#[test]
fn corrections_apply_to_derived_columns() {
    let chain = parse_chain("DERIVE margin = box_office - cost; SORT Margin DESC").unwrap();
    let out = correct(&chain, &annotated_movies()).unwrap();
    assert_eq!(out.corrections.len(), 1);
    assert_eq!(out.corrections[0].command_index, 1);
    assert!(validate(&out.chain, movies().schema()).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn correction_is_idempotent(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let table = gen::with_synonyms(gen::random_table(&mut rng, 4, 4));
        let chain = gen::random_chain(&mut rng, table.schema(), 4);
        let noisy = gen::perturb(&mut rng, &chain);
        if let Ok(once) = correct(&noisy, table.schema()) {
            let twice = correct(&once.chain, table.schema()).unwrap();
            prop_assert_eq!(&twice.chain, &once.chain);
            prop_assert!(twice.corrections.is_empty(), "{:?}", twice.corrections);
            prop_assert_eq!(apply_corrections(&noisy, &once.corrections), once.chain);
        }
    }

    #[test]
    fn clean_chains_need_no_correction(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let table = gen::random_table(&mut rng, 4, 4);
        let chain = gen::random_chain(&mut rng, table.schema(), 4);
        let out = correct(&chain, table.schema()).unwrap();
        prop_assert!(out.corrections.is_empty());
        prop_assert_eq!(out.chain, chain);
    }
}
