//! The cascaded encoder: a metadata branch feeding a numeric fusion branch,
//! pooled into one table vector by attention from a learned seed.

use ndarray::{concatenate, s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tabchain_core::Table;

use crate::attention::{backward, forward, BlockCache};
use crate::error::EncoderError;
use crate::features::{featurize, ColumnFeatures, META_DIM, NUM_FEATURES};
use crate::params::EncoderParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableEmbedding {
    pub global: Vec<f64>,
    pub per_column: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MtmLoss {
    pub loss: f64,
    pub masked_idx: Vec<usize>,
}

fn meta_matrix(f: &[ColumnFeatures]) -> Array2<f64> {
    Array2::from_shape_fn((f.len(), META_DIM), |(i, j)| f[i].meta[j])
}

fn numeric_matrix(f: &[ColumnFeatures]) -> Array2<f64> {
    Array2::from_shape_fn((f.len(), NUM_FEATURES), |(i, j)| f[i].numeric[j])
}

struct Forward {
    meta: Array2<f64>,
    fused_in: Array2<f64>,
    c_meta: BlockCache,
    c_f1: BlockCache,
    c_f2: BlockCache,
    c_pool: BlockCache,
    z: Array2<f64>,
    global: Array2<f64>,
}

fn run(f: &[ColumnFeatures], p: &EncoderParams, masked: &[usize]) -> Result<Forward, EncoderError> {
    if f.is_empty() {
        return Err(EncoderError::EmptySchema);
    }
    let h = p.n_heads;
    let meta = meta_matrix(f);
    let mut numeric = numeric_matrix(f);
    for &j in masked {
        numeric.row_mut(j).assign(&p.mask_token.row(0));
    }
    let m0 = meta.dot(&p.w_meta_in);
    let (m1, c_meta) = forward(&m0, &m0, &p.meta_1, h)?;
    let fused_in = concatenate![Axis(1), m1, numeric];
    let z0 = fused_in.dot(&p.w_num_in);
    let (z1, c_f1) = forward(&z0, &z0, &p.fuse_1, h)?;
    let (z, c_f2) = forward(&z1, &z1, &p.fuse_2, h)?;
    let (global, c_pool) = forward(&p.pool_seed, &z, &p.pool, h)?;
    Ok(Forward {
        meta,
        fused_in,
        c_meta,
        c_f1,
        c_f2,
        c_pool,
        z,
        global,
    })
}

pub fn encode_features(f: &[ColumnFeatures], p: &EncoderParams) -> Result<TableEmbedding, EncoderError> {
    let out = run(f, p, &[])?;
    Ok(TableEmbedding {
        global: out.global.row(0).to_vec(),
        per_column: out.z.rows().into_iter().map(|r| r.to_vec()).collect(),
    })
}

pub fn encode(t: &Table, p: &EncoderParams) -> Result<TableEmbedding, EncoderError> {
    encode_features(&featurize(t)?, p)
}

/// Number of masked columns: `max(1, round(frac·n))`, leaving at least one
/// column visible.
pub fn mask_count(n_cols: usize, mask_frac: f64) -> usize {
    ((mask_frac * n_cols as f64).round() as usize).max(1).min(n_cols.saturating_sub(1))
}

/// Seeded draw without replacement, returned in ascending order.
pub fn choose_mask(n_cols: usize, mask_frac: f64, seed: u64) -> Result<Vec<usize>, EncoderError> {
    if n_cols < 2 {
        return Err(EncoderError::TooFewColumns { found: n_cols });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n_cols, mask_count(n_cols, mask_frac)).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

// Reconstruct masked columns from their fused vector plus the table vector.
fn reconstruct(fw: &Forward, p: &EncoderParams, masked: &[usize]) -> (Array2<f64>, Array2<f64>) {
    let u = fw.z.select(Axis(0), masked) + &fw.global;
    let r = u.dot(&p.w_r) + &p.b_r;
    (u, r)
}

fn check_mask(f: &[ColumnFeatures], masked: &[usize]) -> Result<(), EncoderError> {
    if f.len() < 2 {
        return Err(EncoderError::TooFewColumns { found: f.len() });
    }
    if masked.is_empty() || masked.len() >= f.len() || masked.iter().any(|&j| j >= f.len()) {
        return Err(EncoderError::InvalidConfig(format!(
            "mask {masked:?} is invalid for {} columns",
            f.len()
        )));
    }
    Ok(())
}

/// Masked-modeling loss for a fixed set of masked columns.
pub fn masked_loss(f: &[ColumnFeatures], p: &EncoderParams, masked: &[usize]) -> Result<f64, EncoderError> {
    check_mask(f, masked)?;
    let fw = run(f, p, masked)?;
    let (_, r) = reconstruct(&fw, p, masked);
    let target = numeric_matrix(f).select(Axis(0), masked);
    Ok((r - target).mapv(|v| v * v).mean().unwrap_or(0.0))
}

pub fn mtm_loss(t: &Table, p: &EncoderParams, mask_frac: f64, seed: u64) -> Result<MtmLoss, EncoderError> {
    let f = featurize(t)?;
    let masked_idx = choose_mask(f.len(), mask_frac, seed)?;
    let loss = masked_loss(&f, p, &masked_idx)?;
    Ok(MtmLoss { loss, masked_idx })
}

/// Loss and its gradient with respect to every parameter.
pub fn loss_and_grad(
    f: &[ColumnFeatures],
    p: &EncoderParams,
    masked: &[usize],
) -> Result<(f64, EncoderParams), EncoderError> {
    check_mask(f, masked)?;
    let fw = run(f, p, masked)?;
    let (u, r) = reconstruct(&fw, p, masked);
    let target = numeric_matrix(f).select(Axis(0), masked);
    let diff = r - target;
    let loss = diff.mapv(|v| v * v).mean().unwrap_or(0.0);
    let mut g = p.zeros_like();
    let d = p.d_model;

    let d_r = diff * (2.0 / (masked.len() * NUM_FEATURES) as f64);
    g.w_r += &u.t().dot(&d_r);
    g.b_r += &d_r.sum_axis(Axis(0)).insert_axis(Axis(0));
    let d_u = d_r.dot(&p.w_r.t());
    let mut dz = Array2::zeros(fw.z.dim());
    for (row, &j) in masked.iter().enumerate() {
        let mut zr = dz.row_mut(j);
        zr += &d_u.row(row);
    }
    let d_global = d_u.sum_axis(Axis(0)).insert_axis(Axis(0));

    let (d_seed, dz_pool) = backward(&d_global, &fw.c_pool, &p.pool, &mut g.pool);
    g.pool_seed += &d_seed;
    dz += &dz_pool;
    let (dx, dy) = backward(&dz, &fw.c_f2, &p.fuse_2, &mut g.fuse_2);
    let dz1 = dx + dy;
    let (dx, dy) = backward(&dz1, &fw.c_f1, &p.fuse_1, &mut g.fuse_1);
    let dz0 = dx + dy;

    g.w_num_in += &fw.fused_in.t().dot(&dz0);
    let d_in = dz0.dot(&p.w_num_in.t());
    for &j in masked {
        let mut mt = g.mask_token.row_mut(0);
        mt += &d_in.slice(s![j, d..]);
    }
    let dm1 = d_in.slice(s![.., ..d]).to_owned();
    let (dx, dy) = backward(&dm1, &fw.c_meta, &p.meta_1, &mut g.meta_1);
    g.w_meta_in += &fw.meta.t().dot(&(dx + dy));
    Ok((loss, g))
}
