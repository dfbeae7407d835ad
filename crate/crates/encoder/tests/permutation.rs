use proptest::prelude::*;
use rand::seq::SliceRandom;
use tabchain_core::table::permute;
use tabchain_encoder::{encode, EncoderParams, TableEmbedding};
use tabchain_testkit::{gen, movies};

fn params() -> EncoderParams {
    EncoderParams::default_init(42)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bit_identical(a: &TableEmbedding, b: &TableEmbedding) -> bool {
    let bits = |e: &TableEmbedding| -> Vec<u64> {
        e.global.iter().chain(e.per_column.iter().flatten()).map(|v| v.to_bits()).collect()
    };
    bits(a) == bits(b)
}

#[test]
fn fixture_row_and_column_permutations() {
    let p = params();
    let t = movies();
    let base = encode(&t, &p).unwrap();
    let rows = permute(&t, Some(&[5, 3, 1, 0, 4, 2]), None).unwrap();
    assert!(bit_identical(&base, &encode(&rows, &p).unwrap()));
    let perm = [2usize, 0, 1];
    let cols = permute(&t, None, Some(&perm)).unwrap();
    let e = encode(&cols, &p).unwrap();
    assert!(max_abs_diff(&base.global, &e.global) < 1e-6);
    for (i, &src) in perm.iter().enumerate() {
        assert!(max_abs_diff(&e.per_column[i], &base.per_column[src]) < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dual_permutation_invariance(seed in any::<u64>()) {
        let p = params();
        let mut rng = gen::rng(seed);
        let t = gen::random_table(&mut rng, 12, 6);
        let base = encode(&t, &p).unwrap();

        let mut rows: Vec<usize> = (0..t.num_rows()).collect();
        rows.shuffle(&mut rng);
        let by_rows = encode(&permute(&t, Some(&rows), None).unwrap(), &p).unwrap();
        prop_assert!(bit_identical(&base, &by_rows));

        let mut cols: Vec<usize> = (0..t.num_columns()).collect();
        cols.shuffle(&mut rng);
        let by_cols = encode(&permute(&t, None, Some(&cols)).unwrap(), &p).unwrap();
        prop_assert!(max_abs_diff(&base.global, &by_cols.global) < 1e-6);
        for (i, &src) in cols.iter().enumerate() {
            prop_assert!(max_abs_diff(&by_cols.per_column[i], &base.per_column[src]) < 1e-6);
        }
    }
}
