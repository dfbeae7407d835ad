//! Finite-difference check of the analytic gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tabchain_core::Table;

use crate::error::EncoderError;
use crate::features::{featurize, ColumnFeatures};
use crate::model::{choose_mask, loss_and_grad, masked_loss};
use crate::params::{group_of, EncoderParams};

pub const SAMPLES_PER_GROUP: usize = 20;
pub const GROUPS: [&str; 6] = ["input", "meta_1", "fuse_1", "fuse_2", "pool", "head"];
const SAMPLER_SEED: u64 = 20;
const MASK_SEED: u64 = 7;
const MASK_FRAC: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCheck {
    pub group: String,
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub groups: Vec<GroupCheck>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

pub fn grad_check(p: &EncoderParams, t: &Table, eps: f64) -> Result<GradCheckReport, EncoderError> {
    grad_check_with(p, t, eps, loss_and_grad)
}

/// As [`grad_check`], with the analytic gradient supplied by `analytic`.
pub fn grad_check_with(
    p: &EncoderParams,
    t: &Table,
    eps: f64,
    analytic: impl Fn(&[ColumnFeatures], &EncoderParams, &[usize]) -> Result<(f64, EncoderParams), EncoderError>,
) -> Result<GradCheckReport, EncoderError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(EncoderError::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    let f = featurize(t)?;
    let mask = choose_mask(f.len(), MASK_FRAC, MASK_SEED)?;
    let (_, grad) = analytic(&f, p, &mask)?;
    let names: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLER_SEED);
    let mut groups = Vec::new();
    for group in GROUPS {
        // every scalar of the group as (tensor, flat offset)
        let slots: Vec<(usize, usize)> = p
            .tensors()
            .iter()
            .enumerate()
            .filter(|(i, _)| group_of(&names[*i]) == group)
            .flat_map(|(i, t)| (0..t.len()).map(move |k| (i, k)))
            .collect();
        let take = SAMPLES_PER_GROUP.min(slots.len());
        let mut max_err: f64 = 0.0;
        for pick in rand::seq::index::sample(&mut rng, slots.len(), take) {
            let (ti, k) = slots[pick];
            let a = grad.tensors()[ti].as_slice().expect("standard layout")[k];
            let shifted = |delta: f64| -> Result<f64, EncoderError> {
                let mut q = p.clone();
                q.tensors_mut()[ti].as_slice_mut().expect("standard layout")[k] += delta;
                masked_loss(&f, &q, &mask)
            };
            let n = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
            max_err = max_err.max(relative_error(a, n));
        }
        groups.push(GroupCheck {
            group: group.to_string(),
            checked: take,
            max_rel_err: max_err,
        });
    }
    let max_rel_err = groups.iter().map(|g| g.max_rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_err, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, -1.0), 2.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn non_positive_eps_is_rejected() {
        let t = tabchain_core::load_csv("a,b\n1,2\n3,5\n".as_bytes(), &Default::default()).unwrap();
        let p = EncoderParams::init(16, 4, 0).unwrap();
        for eps in [0.0, -1e-5, f64::NAN] {
            assert!(matches!(grad_check(&p, &t, eps), Err(EncoderError::InvalidConfig(_))));
        }
    }
}
