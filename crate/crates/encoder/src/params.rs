//! Encoder weights and the `TGE1` binary container.
//!
//! Layout: the magic `TGE1`, four little-endian `u32` dims (d_model,
//! n_heads, numeric features, meta features), a `u32` tensor count, then
//! for each tensor in manifest order its `u32` rows, `u32` cols and
//! row-major little-endian `f64` values.

use std::io::{Read, Write};

use ndarray::Array2;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::EncoderError;
use crate::features::{META_DIM, NUM_FEATURES};

pub const MAGIC: &[u8; 4] = b"TGE1";
pub const DEFAULT_D_MODEL: usize = 64;
pub const DEFAULT_HEADS: usize = 4;
pub const BLOCK_NAMES: [&str; 4] = ["meta_1", "fuse_1", "fuse_2", "pool"];
const BLOCK_TENSORS: [&str; 12] = [
    "w_q", "w_k", "w_v", "w_o", "ln1_g", "ln1_b", "w1", "b1", "w2", "b2", "ln2_g", "ln2_b",
];

/// One attention block: multi-head attention, then a feed-forward layer,
/// each followed by a residual connection and layer norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub w_o: Array2<f64>,
    pub ln1_g: Array2<f64>,
    pub ln1_b: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
    pub ln2_g: Array2<f64>,
    pub ln2_b: Array2<f64>,
}

impl Block {
    fn shapes(d: usize) -> [(usize, usize); 12] {
        [
            (d, d),
            (d, d),
            (d, d),
            (d, d),
            (1, d),
            (1, d),
            (d, 2 * d),
            (1, 2 * d),
            (2 * d, d),
            (1, d),
            (1, d),
            (1, d),
        ]
    }

    fn from_tensors(mut t: Vec<Array2<f64>>) -> Block {
        let mut next = || t.remove(0);
        Block {
            w_q: next(),
            w_k: next(),
            w_v: next(),
            w_o: next(),
            ln1_g: next(),
            ln1_b: next(),
            w1: next(),
            b1: next(),
            w2: next(),
            b2: next(),
            ln2_g: next(),
            ln2_b: next(),
        }
    }

    fn tensors(&self) -> [&Array2<f64>; 12] {
        [
            &self.w_q, &self.w_k, &self.w_v, &self.w_o, &self.ln1_g, &self.ln1_b, &self.w1, &self.b1, &self.w2,
            &self.b2, &self.ln2_g, &self.ln2_b,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Array2<f64>; 12] {
        [
            &mut self.w_q,
            &mut self.w_k,
            &mut self.w_v,
            &mut self.w_o,
            &mut self.ln1_g,
            &mut self.ln1_b,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.ln2_g,
            &mut self.ln2_b,
        ]
    }
}

/// All encoder weights. The same type holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub d_model: usize,
    pub n_heads: usize,
    pub w_meta_in: Array2<f64>,
    pub w_num_in: Array2<f64>,
    pub meta_1: Block,
    pub fuse_1: Block,
    pub fuse_2: Block,
    pub pool: Block,
    /// Learned query of the pooling block.
    pub pool_seed: Array2<f64>,
    pub mask_token: Array2<f64>,
    pub w_r: Array2<f64>,
    pub b_r: Array2<f64>,
}

/// Tensor names and shapes in manifest order.
pub fn manifest(d: usize) -> Vec<(String, (usize, usize))> {
    let mut out = vec![
        ("w_meta_in".to_string(), (META_DIM, d)),
        ("w_num_in".to_string(), (d + NUM_FEATURES, d)),
    ];
    for b in BLOCK_NAMES {
        for (t, shape) in BLOCK_TENSORS.iter().zip(Block::shapes(d)) {
            out.push((format!("{b}.{t}"), shape));
        }
    }
    out.push(("pool_seed".to_string(), (1, d)));
    out.push(("mask_token".to_string(), (1, NUM_FEATURES)));
    out.push(("w_r".to_string(), (d, NUM_FEATURES)));
    out.push(("b_r".to_string(), (1, NUM_FEATURES)));
    out
}

/// Parameter group a tensor belongs to, for per-group gradient checks.
pub fn group_of(name: &str) -> &'static str {
    match name {
        "w_meta_in" | "w_num_in" | "mask_token" => "input",
        "pool_seed" => "pool",
        "w_r" | "b_r" => "head",
        _ => BLOCK_NAMES
            .into_iter()
            .find(|b| name.starts_with(&format!("{b}.")))
            .unwrap_or("input"),
    }
}

fn read_u32(r: &mut impl Read) -> Result<usize, EncoderError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| EncoderError::Format("truncated file".into()))?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn check_dims(d_model: usize, n_heads: usize) -> Result<(), EncoderError> {
    if d_model == 0 || n_heads == 0 || !d_model.is_multiple_of(n_heads) {
        return Err(EncoderError::InvalidConfig(format!(
            "d_model {d_model} must be a positive multiple of n_heads {n_heads}"
        )));
    }
    Ok(())
}

impl EncoderParams {
    fn from_tensors(d_model: usize, n_heads: usize, mut t: Vec<Array2<f64>>) -> Self {
        let w_meta_in = t.remove(0);
        let w_num_in = t.remove(0);
        let mut blocks: Vec<Block> = (0..4).map(|_| Block::from_tensors(t.drain(..12).collect())).collect();
        let pool = blocks.pop().unwrap();
        let fuse_2 = blocks.pop().unwrap();
        let fuse_1 = blocks.pop().unwrap();
        let meta_1 = blocks.pop().unwrap();
        EncoderParams {
            d_model,
            n_heads,
            w_meta_in,
            w_num_in,
            meta_1,
            fuse_1,
            fuse_2,
            pool,
            pool_seed: t.remove(0),
            mask_token: t.remove(0),
            w_r: t.remove(0),
            b_r: t.remove(0),
        }
    }

    /// Seeded initialization: weights uniform in ±1/√d, layer-norm gains 1,
    /// biases 0.
    pub fn init(d_model: usize, n_heads: usize, seed: u64) -> Result<Self, EncoderError> {
        check_dims(d_model, n_heads)?;
        let bound = 1.0 / (d_model as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = manifest(d_model)
            .into_iter()
            .map(|(name, shape)| {
                let leaf = name.rsplit('.').next().unwrap_or(&name);
                if leaf.ends_with("_g") {
                    Array2::ones(shape)
                } else if leaf.starts_with('b') || leaf.ends_with("_b") {
                    Array2::zeros(shape)
                } else {
                    Array2::from_shape_simple_fn(shape, || dist.sample(&mut rng))
                }
            })
            .collect();
        Ok(Self::from_tensors(d_model, n_heads, tensors))
    }

    pub fn default_init(seed: u64) -> Self {
        Self::init(DEFAULT_D_MODEL, DEFAULT_HEADS, seed).expect("default dims are valid")
    }

    /// Same shapes, all zeros; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let tensors = self.tensors().iter().map(|t| Array2::zeros(t.dim())).collect();
        Self::from_tensors(self.d_model, self.n_heads, tensors)
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out = vec![&self.w_meta_in, &self.w_num_in];
        for b in [&self.meta_1, &self.fuse_1, &self.fuse_2, &self.pool] {
            out.extend(b.tensors());
        }
        out.extend([&self.pool_seed, &self.mask_token, &self.w_r, &self.b_r]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![&mut self.w_meta_in, &mut self.w_num_in];
        for b in [&mut self.meta_1, &mut self.fuse_1, &mut self.fuse_2, &mut self.pool] {
            out.extend(b.tensors_mut());
        }
        out.extend([&mut self.pool_seed, &mut self.mask_token, &mut self.w_r, &mut self.b_r]);
        out
    }

    pub fn named(&self) -> Vec<(String, &Array2<f64>)> {
        manifest(self.d_model)
            .into_iter()
            .map(|(n, _)| n)
            .zip(self.tensors())
            .collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        match name {
            "meta_1" => Some(&self.meta_1),
            "fuse_1" => Some(&self.fuse_1),
            "fuse_2" => Some(&self.fuse_2),
            "pool" => Some(&self.pool),
            _ => None,
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), EncoderError> {
        w.write_all(MAGIC)?;
        for dim in [self.d_model, self.n_heads, NUM_FEATURES, META_DIM] {
            w.write_all(&(dim as u32).to_le_bytes())?;
        }
        let tensors = self.tensors();
        w.write_all(&(tensors.len() as u32).to_le_bytes())?;
        for t in tensors {
            let (r, c) = t.dim();
            w.write_all(&(r as u32).to_le_bytes())?;
            w.write_all(&(c as u32).to_le_bytes())?;
            for x in t.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory cannot fail");
        out
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, EncoderError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| EncoderError::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(EncoderError::Format("bad magic bytes".into()));
        }
        let (d_model, n_heads, nf, md) = (read_u32(r)?, read_u32(r)?, read_u32(r)?, read_u32(r)?);
        if nf != NUM_FEATURES || md != META_DIM {
            return Err(EncoderError::Format(format!(
                "feature dims {nf}/{md} do not match {NUM_FEATURES}/{META_DIM}"
            )));
        }
        check_dims(d_model, n_heads).map_err(|e| EncoderError::Format(e.to_string()))?;
        let expected = manifest(d_model);
        let count = read_u32(r)?;
        if count != expected.len() {
            return Err(EncoderError::Format(format!(
                "{count} tensors, expected {}",
                expected.len()
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name, shape) in expected {
            let found = (read_u32(r)?, read_u32(r)?);
            if found != shape {
                return Err(EncoderError::ShapeMismatch {
                    what: name,
                    expected: shape,
                    found,
                });
            }
            let mut buf = vec![0u8; shape.0 * shape.1 * 8];
            r.read_exact(&mut buf).map_err(|_| EncoderError::Format("truncated tensor data".into()))?;
            let values: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push(Array2::from_shape_vec(shape, values).expect("length matches shape"));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(EncoderError::Format(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self::from_tensors(d_model, n_heads, tensors))
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, EncoderError> {
        Self::read_from(&mut bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_manifest() {
        let p = EncoderParams::default_init(7);
        for ((name, shape), t) in manifest(64).iter().zip(p.tensors()) {
            assert_eq!(t.dim(), *shape, "{name}");
        }
        assert_eq!(p.tensors().len(), 2 + 4 * 12 + 4);
        assert_eq!(p.meta_1.ln1_g[[0, 5]], 1.0);
        assert_eq!(p.pool.b1[[0, 5]], 0.0);
        assert_eq!(p.b_r[[0, 0]], 0.0);
        let bound = 1.0 / 8.0;
        assert!(p.w_q_all().all(|x| x.abs() <= bound));
    }

    impl EncoderParams {
        fn w_q_all(&self) -> impl Iterator<Item = f64> + '_ {
            self.meta_1.w_q.iter().copied()
        }
    }

    #[test]
    fn seeded_init_is_deterministic() {
        assert_eq!(EncoderParams::default_init(1), EncoderParams::default_init(1));
        assert_ne!(EncoderParams::default_init(1), EncoderParams::default_init(2));
    }

    #[test]
    fn binary_round_trip() {
        let p = EncoderParams::init(16, 2, 3).unwrap();
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..4], b"TGE1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 16);
        assert_eq!(EncoderParams::from_bytes(&bytes).unwrap(), p);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = EncoderParams::init(16, 2, 3).unwrap().to_bytes();
        assert!(EncoderParams::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(EncoderParams::from_bytes(&bad), Err(EncoderError::Format(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(EncoderParams::from_bytes(&extra).is_err());
        let mut shape = bytes;
        // first tensor's row count
        shape[24] = 9;
        assert!(matches!(EncoderParams::from_bytes(&shape), Err(EncoderError::ShapeMismatch { .. })));
    }

    #[test]
    fn bad_dims() {
        assert!(EncoderParams::init(10, 3, 0).is_err());
    }

    #[test]
    fn groups() {
        assert_eq!(group_of("fuse_2.w_q"), "fuse_2");
        assert_eq!(group_of("pool_seed"), "pool");
        assert_eq!(group_of("b_r"), "head");
        assert_eq!(group_of("mask_token"), "input");
    }
}
