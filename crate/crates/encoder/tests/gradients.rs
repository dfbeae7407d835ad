use tabchain_encoder::gradcheck::{GROUPS, SAMPLES_PER_GROUP};
use tabchain_encoder::{grad_check, grad_check_with, loss_and_grad, synthetic_corpus, EncoderParams};
use tabchain_testkit::movies;

const EPS: f64 = 1e-5;

#[test]
fn fixture_gradients_match_finite_differences() {
    let p = EncoderParams::default_init(1);
    let report = grad_check(&p, &movies(), EPS).unwrap();
    assert_eq!(report.groups.len(), GROUPS.len());
    for g in &report.groups {
        assert!(g.checked >= SAMPLES_PER_GROUP, "{}: {} checked", g.group, g.checked);
        assert!(g.max_rel_err < 1e-3, "{}: {}", g.group, g.max_rel_err);
    }
}

#[test]
fn synthetic_tables_pass_too() {
    for (i, t) in synthetic_corpus(4, 11).iter().enumerate() {
        let p = EncoderParams::default_init(100 + i as u64);
        let report = grad_check(&p, t, EPS).unwrap();
        assert!(report.max_rel_err < 1e-3, "table {i}: {:?}", report.groups);
    }
}

#[test]
fn sign_flip_is_detected() {
    let p = EncoderParams::default_init(1);
    let flipped = |f: &[_], p: &EncoderParams, m: &[usize]| {
        loss_and_grad(f, p, m).map(|(l, mut g)| {
            for t in g.tensors_mut() {
                t.mapv_inplace(|v| -v);
            }
            (l, g)
        })
    };
    let report = grad_check_with(&p, &movies(), EPS, flipped).unwrap();
    assert!(report.max_rel_err > 0.5, "{}", report.max_rel_err);
}

#[test]
fn single_block_mutation_is_localized() {
    let p = EncoderParams::default_init(1);
    let broken = |f: &[_], p: &EncoderParams, m: &[usize]| {
        loss_and_grad(f, p, m).map(|(l, mut g)| {
            g.fuse_2.w_v.mapv_inplace(|v| -v);
            g.fuse_2.w1.mapv_inplace(|v| -v);
            g.fuse_2.w2.mapv_inplace(|v| -v);
            (l, g)
        })
    };
    let report = grad_check_with(&p, &movies(), EPS, broken).unwrap();
    for g in &report.groups {
        if g.group == "fuse_2" {
            assert!(g.max_rel_err > 0.5);
        } else {
            assert!(g.max_rel_err < 1e-3, "{}: {}", g.group, g.max_rel_err);
        }
    }
}
