//! Masked table modeling pretraining with Adam.

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tabchain_core::Table;

use crate::error::EncoderError;
use crate::features::{featurize, ColumnFeatures};
use crate::model::{choose_mask, loss_and_grad, masked_loss};
use crate::params::{EncoderParams, DEFAULT_D_MODEL, DEFAULT_HEADS};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
// Mask seeds for the before/after evaluation, independent of the training draw.
const EVAL_SEED: u64 = 0x5eed_e7a1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub mask_frac: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            steps: 200,
            mask_frac: 0.15,
            seed: 0,
            batch_size: 8,
            d_model: DEFAULT_D_MODEL,
            n_heads: DEFAULT_HEADS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::InvalidConfig(m.to_string()));
        if self.steps < 1 {
            return bad("steps must be at least 1");
        }
        if !(self.mask_frac > 0.0 && self.mask_frac < 1.0) {
            return bad("mask_frac must lie strictly between 0 and 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be a positive multiple of n_heads");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: EncoderParams,
    /// Corpus mean loss before the first update.
    pub initial_loss: f64,
    /// Corpus mean loss after the last update, on the same masks.
    pub final_loss: f64,
    /// Mean batch loss at each step.
    pub curve: Vec<f64>,
    pub tables_used: usize,
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

impl Adam {
    fn new(p: &EncoderParams) -> Self {
        let zeros = || p.tensors().iter().map(|t| Array2::zeros(t.dim())).collect();
        Adam {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, p: &mut EncoderParams, g: &EncoderParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((w, g), m), v) in p.tensors_mut().into_iter().zip(g.tensors()).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            });
        }
    }
}

fn corpus_features(tables: &[Table]) -> Vec<Vec<ColumnFeatures>> {
    tables
        .iter()
        .filter(|t| t.num_columns() >= 2)
        .filter_map(|t| featurize(t).ok())
        .collect()
}

fn eval_masks(corpus: &[Vec<ColumnFeatures>], mask_frac: f64) -> Result<Vec<Vec<usize>>, EncoderError> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, f)| choose_mask(f.len(), mask_frac, EVAL_SEED.wrapping_add(i as u64)))
        .collect()
}

fn mean_loss(corpus: &[Vec<ColumnFeatures>], masks: &[Vec<usize>], p: &EncoderParams) -> Result<f64, EncoderError> {
    let mut total = 0.0;
    for (f, m) in corpus.iter().zip(masks) {
        total += masked_loss(f, p, m)?;
    }
    Ok(total / corpus.len() as f64)
}

/// Mean masked-modeling loss over a corpus with the fixed evaluation masks.
pub fn corpus_loss(tables: &[Table], p: &EncoderParams, mask_frac: f64) -> Result<f64, EncoderError> {
    let corpus = corpus_features(tables);
    if corpus.is_empty() {
        return Err(EncoderError::EmptyCorpus);
    }
    mean_loss(&corpus, &eval_masks(&corpus, mask_frac)?, p)
}

// Batch gradients are computed in parallel and summed in batch order.
fn batch_grad(
    corpus: &[Vec<ColumnFeatures>],
    batch: &[(usize, Vec<usize>)],
    p: &EncoderParams,
) -> Result<(f64, EncoderParams), EncoderError> {
    let results: Vec<Result<(f64, EncoderParams), EncoderError>> = std::thread::scope(|s| {
        let handles: Vec<_> = batch
            .iter()
            .map(|(i, mask)| s.spawn(move || loss_and_grad(&corpus[*i], p, mask)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
    });
    let mut sum = p.zeros_like();
    let mut loss = 0.0;
    for r in results {
        let (l, g) = r?;
        loss += l;
        for (acc, g) in sum.tensors_mut().into_iter().zip(g.tensors()) {
            *acc += g;
        }
    }
    let k = batch.len() as f64;
    for t in sum.tensors_mut() {
        *t /= k;
    }
    Ok((loss / k, sum))
}

/// Trains from a fresh seeded initialization.
pub fn train_mtm(tables: &[Table], cfg: &TrainConfig) -> Result<TrainReport, EncoderError> {
    cfg.validate()?;
    let init = EncoderParams::init(cfg.d_model, cfg.n_heads, cfg.seed)?;
    train_from(init, tables, cfg, |_, _| {})
}

/// Trains starting from `params`, calling `on_step(step, batch_loss)` after
/// every update.
pub fn train_from(
    mut params: EncoderParams,
    tables: &[Table],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<TrainReport, EncoderError> {
    cfg.validate()?;
    let corpus = corpus_features(tables);
    if corpus.is_empty() {
        return Err(EncoderError::EmptyCorpus);
    }
    let masks = eval_masks(&corpus, cfg.mask_frac)?;
    let initial_loss = mean_loss(&corpus, &masks, &params)?;
    if !initial_loss.is_finite() {
        return Err(EncoderError::NonFiniteLoss {
            step: 0,
            loss: initial_loss,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&params);
    let mut curve = Vec::with_capacity(cfg.steps);
    let batch_size = cfg.batch_size.min(corpus.len());
    for step in 0..cfg.steps {
        let picks = rand::seq::index::sample(&mut rng, corpus.len(), batch_size).into_vec();
        let batch = picks
            .into_iter()
            .map(|i| Ok((i, choose_mask(corpus[i].len(), cfg.mask_frac, rng.random())?)))
            .collect::<Result<Vec<_>, EncoderError>>()?;
        let (loss, grad) = batch_grad(&corpus, &batch, &params)?;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(EncoderError::NonFiniteLoss { step, loss });
        }
        adam.step(&mut params, &grad, cfg.learning_rate);
        curve.push(loss);
        on_step(step, loss);
    }
    let final_loss = mean_loss(&corpus, &masks, &params)?;
    if !final_loss.is_finite() {
        return Err(EncoderError::NonFiniteLoss {
            step: cfg.steps,
            loss: final_loss,
        });
    }
    Ok(TrainReport {
        params,
        initial_loss,
        final_loss,
        curve,
        tables_used: corpus.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synthetic_corpus;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { steps: 0, ..Default::default() },
            TrainConfig { mask_frac: 0.0, ..Default::default() },
            TrainConfig { mask_frac: 1.0, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { n_heads: 5, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(EncoderError::InvalidConfig(_))), "{bad:?}");
        }
    }

    #[test]
    fn short_run_is_deterministic() {
        let corpus = synthetic_corpus(6, 1);
        let cfg = TrainConfig {
            steps: 3,
            batch_size: 2,
            d_model: 16,
            ..Default::default()
        };
        let a = train_mtm(&corpus, &cfg).unwrap();
        let b = train_mtm(&corpus, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.curve.len(), 3);
    }

    #[test]
    fn empty_corpus() {
        let narrow = tabchain_core::load_csv("a\n1\n".as_bytes(), &Default::default()).unwrap();
        assert!(matches!(
            train_mtm(&[narrow], &TrainConfig::default()),
            Err(EncoderError::EmptyCorpus)
        ));
    }

    #[test]
    fn huge_learning_rate_stays_finite_or_reports_step() {
        let corpus = synthetic_corpus(4, 2);
        let cfg = TrainConfig {
            steps: 5,
            learning_rate: 1e300,
            d_model: 16,
            ..Default::default()
        };
        match train_mtm(&corpus, &cfg) {
            Ok(r) => assert!(r.params.is_finite()),
            Err(EncoderError::NonFiniteLoss { step, .. }) => assert!(step <= 5),
            Err(e) => panic!("{e}"),
        }
    }
}
