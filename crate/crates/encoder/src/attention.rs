//! Multi-head attention blocks with hand-written backward passes.

use ndarray::{s, Array1, Array2, Axis, Zip};

use crate::error::EncoderError;
use crate::params::Block;

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / d;
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / d;
    let rstd = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = centered * rstd.view().insert_axis(Axis(1));
    let y = &xhat * g + b;
    (y, LnCache { xhat, rstd })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    c: &LnCache,
    g: &Array2<f64>,
    dg: &mut Array2<f64>,
    db: &mut Array2<f64>,
) -> Array2<f64> {
    *dg += &(dy * &c.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * g;
    let d = dy.ncols() as f64;
    let m1 = dxhat.sum_axis(Axis(1)) / d;
    let m2 = (&dxhat * &c.xhat).sum_axis(Axis(1)) / d;
    let mut dx = dxhat - &m1.insert_axis(Axis(1)) - &c.xhat * &m2.insert_axis(Axis(1));
    dx *= &c.rstd.view().insert_axis(Axis(1));
    dx
}

fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Intermediate values kept from the forward pass.
#[derive(Debug, Clone)]
pub struct BlockCache {
    x: Array2<f64>,
    y: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    o: Array2<f64>,
    ln1: LnCache,
    h: Array2<f64>,
    f1: Array2<f64>,
    fr: Array2<f64>,
    ln2: LnCache,
}

fn check(what: &str, a: &Array2<f64>, expected: (usize, usize)) -> Result<(), EncoderError> {
    if a.dim() != expected {
        return Err(EncoderError::ShapeMismatch {
            what: what.to_string(),
            expected,
            found: a.dim(),
        });
    }
    Ok(())
}

/// `H = LN(X + MHA(X, Y, Y))`, then `LN(H + FF(H))`.
pub fn attention_block(
    x: &Array2<f64>,
    y: &Array2<f64>,
    b: &Block,
    n_heads: usize,
) -> Result<Array2<f64>, EncoderError> {
    forward(x, y, b, n_heads).map(|(out, _)| out)
}

pub fn forward(
    x: &Array2<f64>,
    y: &Array2<f64>,
    b: &Block,
    n_heads: usize,
) -> Result<(Array2<f64>, BlockCache), EncoderError> {
    let d = b.w_q.nrows();
    check("block.w_q", &b.w_q, (d, d))?;
    check("x", x, (x.nrows(), d))?;
    check("y", y, (y.nrows(), d))?;
    if n_heads == 0 || !d.is_multiple_of(n_heads) {
        return Err(EncoderError::InvalidConfig(format!("{n_heads} heads do not divide width {d}")));
    }
    if y.nrows() == 0 {
        return Err(EncoderError::ShapeMismatch {
            what: "y".into(),
            expected: (1, d),
            found: y.dim(),
        });
    }
    let dk = d / n_heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let q = x.dot(&b.w_q);
    let k = y.dot(&b.w_k);
    let v = y.dot(&b.w_v);
    let mut o = Array2::zeros((x.nrows(), d));
    let mut attn = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = s![.., h * dk..(h + 1) * dk];
        let mut a = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut a);
        o.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
        attn.push(a);
    }
    let r1 = x + &o.dot(&b.w_o);
    let (h, ln1) = layer_norm(&r1, &b.ln1_g, &b.ln1_b);
    let f1 = h.dot(&b.w1) + &b.b1;
    let fr = f1.mapv(|v| v.max(0.0));
    let r2 = &h + &(fr.dot(&b.w2) + &b.b2);
    let (out, ln2) = layer_norm(&r2, &b.ln2_g, &b.ln2_b);
    let cache = BlockCache {
        x: x.clone(),
        y: y.clone(),
        q,
        k,
        v,
        attn,
        o,
        ln1,
        h,
        f1,
        fr,
        ln2,
    };
    Ok((out, cache))
}

/// Backpropagates `d_out`, accumulating weight gradients into `g`.
/// Returns the gradients with respect to `X` and `Y`.
pub fn backward(d_out: &Array2<f64>, c: &BlockCache, b: &Block, g: &mut Block) -> (Array2<f64>, Array2<f64>) {
    let n_heads = c.attn.len();
    let d = b.w_q.nrows();
    let dk = d / n_heads;
    let scale = 1.0 / (dk as f64).sqrt();

    let dr2 = layer_norm_backward(d_out, &c.ln2, &b.ln2_g, &mut g.ln2_g, &mut g.ln2_b);
    g.w2 += &c.fr.t().dot(&dr2);
    g.b2 += &dr2.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut df1 = dr2.dot(&b.w2.t());
    Zip::from(&mut df1).and(&c.f1).for_each(|g, &f| {
        if f <= 0.0 {
            *g = 0.0;
        }
    });
    g.w1 += &c.h.t().dot(&df1);
    g.b1 += &df1.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dh = dr2 + df1.dot(&b.w1.t());

    let dr1 = layer_norm_backward(&dh, &c.ln1, &b.ln1_g, &mut g.ln1_g, &mut g.ln1_b);
    g.w_o += &c.o.t().dot(&dr1);
    let d_o = dr1.dot(&b.w_o.t());
    let mut dq = Array2::zeros(c.q.dim());
    let mut dkm = Array2::zeros(c.k.dim());
    let mut dv = Array2::zeros(c.v.dim());
    for (h, a) in c.attn.iter().enumerate() {
        let cols = s![.., h * dk..(h + 1) * dk];
        let d_oh = d_o.slice(cols);
        let da = d_oh.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&a.t().dot(&d_oh));
        let row = (&da * a).sum_axis(Axis(1));
        let ds = a * &(da - &row.insert_axis(Axis(1))) * scale;
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dkm.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }
    g.w_q += &c.x.t().dot(&dq);
    g.w_k += &c.y.t().dot(&dkm);
    g.w_v += &c.y.t().dot(&dv);
    let dx = dr1 + dq.dot(&b.w_q.t());
    let dy = dkm.dot(&b.w_k.t()) + dv.dot(&b.w_v.t());
    (dx, dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::EncoderParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
    }

    fn block() -> Block {
        EncoderParams::init(16, 4, 11).unwrap().fuse_1
    }

    fn nonzero_biases(mut b: Block) -> Block {
        b.b1 = random(1, 32, 90);
        b.b2 = random(1, 16, 91);
        b.ln1_b = random(1, 16, 92);
        b.ln2_g = random(1, 16, 93) + 1.0;
        b
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let x = random(3, 16, 1);
        let (y, _) = layer_norm(&x, &Array2::ones((1, 16)), &Array2::zeros((1, 16)));
        for row in y.rows() {
            assert!(row.mean().unwrap().abs() < 1e-12);
            let var = row.mapv(|v| v * v).mean().unwrap();
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn single_key_attends_fully() {
        let b = block();
        let x = random(1, 16, 2);
        let (_, c) = forward(&x, &x, &b, 4).unwrap();
        for a in &c.attn {
            assert_eq!(a.dim(), (1, 1));
            assert!((a[[0, 0]] - 1.0).abs() < 1e-15);
        }
        let v = x.dot(&b.w_v);
        assert!((&c.o - &v).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn zeroed_paths_leave_double_layer_norm() {
        let mut b = block();
        b.w_v.fill(0.0);
        b.w_o.fill(0.0);
        b.w2.fill(0.0);
        let x = random(5, 16, 3);
        let out = attention_block(&x, &x, &b, 4).unwrap();
        let ones = Array2::ones((1, 16));
        let zeros = Array2::zeros((1, 16));
        let (l1, _) = layer_norm(&x, &ones, &zeros);
        let (l2, _) = layer_norm(&l1, &ones, &zeros);
        assert!((&out - &l2).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn self_attention_is_permutation_equivariant() {
        let b = nonzero_biases(block());
        let x = random(6, 16, 4);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let xp = x.select(Axis(0), &perm);
        let out = attention_block(&x, &x, &b, 4).unwrap();
        let outp = attention_block(&xp, &xp, &b, 4).unwrap();
        let expected = out.select(Axis(0), &perm);
        assert!((&outp - &expected).iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn shape_errors() {
        let b = block();
        let x = random(2, 8, 5);
        assert!(matches!(attention_block(&x, &x, &b, 4), Err(EncoderError::ShapeMismatch { .. })));
        let x = random(2, 16, 5);
        let empty = Array2::zeros((0, 16));
        assert!(attention_block(&x, &empty, &b, 4).is_err());
    }

    // Scalar objective sum(out ⊙ w) checked against central differences.
    fn objective(x: &Array2<f64>, y: &Array2<f64>, b: &Block, w: &Array2<f64>) -> f64 {
        (attention_block(x, y, b, 4).unwrap() * w).sum()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let b = nonzero_biases(block());
        let x = random(3, 16, 6);
        let y = random(5, 16, 7);
        let w = random(3, 16, 8);
        let (_, c) = forward(&x, &y, &b, 4).unwrap();
        let mut g = EncoderParams::init(16, 4, 0).unwrap().zeros_like().fuse_1;
        let (dx, dy) = backward(&w, &c, &b, &mut g);
        let eps = 1e-6;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for idx in [(0, 0), (1, 7), (2, 15)] {
            let mut xp = x.clone();
            xp[idx] += eps;
            let mut xm = x.clone();
            xm[idx] -= eps;
            let num = (objective(&xp, &y, &b, &w) - objective(&xm, &y, &b, &w)) / (2.0 * eps);
            assert!(rel(dx[idx], num) < 1e-5, "dx{idx:?}: {} vs {num}", dx[idx]);
        }
        for idx in [(0, 3), (4, 9)] {
            let mut yp = y.clone();
            yp[idx] += eps;
            let mut ym = y.clone();
            ym[idx] -= eps;
            let num = (objective(&x, &yp, &b, &w) - objective(&x, &ym, &b, &w)) / (2.0 * eps);
            assert!(rel(dy[idx], num) < 1e-5, "dy{idx:?}: {} vs {num}", dy[idx]);
        }
        let mut bp = b.clone();
        bp.w_k[[2, 5]] += eps;
        let mut bm = b.clone();
        bm.w_k[[2, 5]] -= eps;
        let num = (objective(&x, &y, &bp, &w) - objective(&x, &y, &bm, &w)) / (2.0 * eps);
        assert!(rel(g.w_k[[2, 5]], num) < 1e-5);
    }
}
