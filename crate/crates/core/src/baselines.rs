//! Model-agnostic comparison methods producing real-valued saliency maps.
//!
//! * Feature occlusion: perturb one point at a time, score the output change.
//! * Feature permutation: swap one point with a random other time step of the
//!   same feature, averaged over several repeats.
//! * RISE: weight random keep-masks by how well the model output is preserved.
//!
//! Raw maps are min-max normalized to `[0, 1]`; a constant map becomes all
//! zeros. Random draws use one ChaCha stream per point (or per RISE mask), so
//! results are independent of thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::{checked_predict, perturbation_error, FitnessEvaluator, MaskRef, DEFAULT_LOG_CLAMP};
use crate::model::BlackBoxModel;
use crate::perturbation::{apply_binary, perturbation_matrix, PerturbationSpec};
use crate::scalar::Scalar;
use crate::series::{DenseMask, ModelOutput, TaskKind, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Permutation repeats per point.
    pub repeats: usize,
    pub rise_masks: usize,
    pub rise_keep_prob: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            repeats: 8,
            rise_masks: 500,
            rise_keep_prob: 0.5,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        if self.rise_masks == 0 {
            return Err(Error::Config("rise_masks must be positive".into()));
        }
        let p = self.rise_keep_prob;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!("rise_keep_prob {p} not in (0, 1)")));
        }
        Ok(())
    }
}

/// Maps values affinely onto `[0, 1]`; a constant input maps to zeros.
pub fn min_max_normalize<S: Scalar>(d_features: usize, t_steps: usize, raw: &[S]) -> Result<DenseMask<S>> {
    if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::Model(format!("non-finite saliency value {v}")));
    }
    let lo = raw.iter().copied().fold(S::infinity(), S::min);
    let hi = raw.iter().copied().fold(S::neg_infinity(), S::max);
    let span = hi - lo;
    let values = if span > S::zero() {
        raw.iter()
            .map(|&v| ((v - lo) / span).max(S::zero()).min(S::one()))
            .collect()
    } else {
        vec![S::zero(); raw.len()]
    };
    DenseMask::new(d_features, t_steps, values)
}

fn map_points<S, M, F>(model: &M, n: usize, f: F) -> Result<Vec<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
    F: Fn(usize) -> Result<S> + Send + Sync,
{
    if model.concurrent_safe() {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn point_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Perturbation error of occluding each point on its own.
pub fn feature_occlusion_raw<S, M>(model: &M, x: &TimeSeries<S>, spec: &PerturbationSpec) -> Result<Vec<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    let (d_features, t_steps) = x.shape();
    let evaluator = FitnessEvaluator::new(model, x, *spec)?;
    let masks: Vec<DenseMask<S>> = (0..d_features * t_steps)
        .map(|i| DenseMask::one_hot(d_features, t_steps, i / t_steps, i % t_steps))
        .collect::<Result<_>>()?;
    let refs: Vec<MaskRef<'_, S>> = masks.iter().map(MaskRef::from).collect();
    evaluator.evaluate_batch(&refs)
}

pub fn feature_occlusion<S, M>(model: &M, x: &TimeSeries<S>, spec: &PerturbationSpec) -> Result<DenseMask<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    let raw = feature_occlusion_raw(model, x, spec)?;
    min_max_normalize(x.d_features(), x.t_steps(), &raw)
}

/// Mean perturbation error of replacing each point with the value of the same
/// feature at another, uniformly chosen time step.
pub fn feature_permutation_raw<S, M>(model: &M, x: &TimeSeries<S>, cfg: &BaselineConfig) -> Result<Vec<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    cfg.validate()?;
    let (d_features, t_steps) = x.shape();
    if t_steps < 2 {
        return Err(Error::DegenerateWindow(
            "permutation needs at least two time steps".into(),
        ));
    }
    let task = model.task();
    let y = checked_predict(model, x)?;
    map_points(model, d_features * t_steps, |i| {
        let (d, t) = (i / t_steps, i % t_steps);
        let mut rng = point_rng(cfg.seed, i);
        let mut total = S::zero();
        for _ in 0..cfg.repeats {
            let mut other = rng.random_range(0..t_steps - 1);
            if other >= t {
                other += 1;
            }
            let swapped = x.with_value(d, t, x.get(d, other))?;
            let y_hat = checked_predict(model, &swapped)?;
            total = total + perturbation_error(task, &y, &y_hat, DEFAULT_LOG_CLAMP)?;
        }
        Ok(total / S::from_count(cfg.repeats))
    })
}

pub fn feature_permutation<S, M>(model: &M, x: &TimeSeries<S>, cfg: &BaselineConfig) -> Result<DenseMask<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    let raw = feature_permutation_raw(model, x, cfg)?;
    min_max_normalize(x.d_features(), x.t_steps(), &raw)
}

fn rise_score<S: Scalar>(y: &ModelOutput<S>, class: Option<usize>, y_hat: &ModelOutput<S>) -> Result<S> {
    match class {
        Some(c) => y_hat
            .values()
            .get(c)
            .copied()
            .ok_or_else(|| Error::LengthMismatch { left: y.len(), right: y_hat.len() }),
        None => Ok(-crate::fitness::error_regression(y, y_hat)?),
    }
}

/// RISE accumulation over explicit keep-masks (`true` = keep).
pub fn rise_raw_with_masks<S, M>(
    model: &M,
    x: &TimeSeries<S>,
    keep_masks: &[Vec<bool>],
    keep_prob: f64,
    spec: &PerturbationSpec,
) -> Result<Vec<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    let n = x.values().len();
    if let Some(bad) = keep_masks.iter().find(|m| m.len() != n) {
        return Err(Error::LengthMismatch { left: n, right: bad.len() });
    }
    let y = checked_predict(model, x)?;
    let class = match model.task() {
        TaskKind::Classification => y.argmax(),
        TaskKind::Regression => None,
    };
    let p = perturbation_matrix(x, spec)?;
    let scores: Vec<S> = map_points(model, keep_masks.len(), |k| {
        let drop: Vec<bool> = keep_masks[k].iter().map(|&b| !b).collect();
        let y_hat = checked_predict(model, &apply_binary(x, &drop, &p)?)?;
        rise_score(&y, class, &y_hat)
    })?;
    let mut sal = vec![S::zero(); n];
    for (mask, &score) in keep_masks.iter().zip(&scores) {
        for (s, _) in sal.iter_mut().zip(mask).filter(|(_, &keep)| keep) {
            *s = *s + score;
        }
    }
    let scale = S::from_f64_lossy(1.0 / (keep_masks.len() as f64 * keep_prob));
    Ok(sal.into_iter().map(|v| v * scale).collect())
}

/// Samples `rise_masks` Bernoulli keep-masks, one random stream per mask.
pub fn rise_keep_masks(cfg: &BaselineConfig, n: usize) -> Vec<Vec<bool>> {
    (0..cfg.rise_masks)
        .map(|k| {
            let mut rng = point_rng(cfg.seed, k);
            (0..n).map(|_| rng.random_bool(cfg.rise_keep_prob)).collect()
        })
        .collect()
}

pub fn rise<S, M>(
    model: &M,
    x: &TimeSeries<S>,
    cfg: &BaselineConfig,
    spec: &PerturbationSpec,
) -> Result<DenseMask<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    cfg.validate()?;
    let masks = rise_keep_masks(cfg, x.values().len());
    let raw = rise_raw_with_masks(model, x, &masks, cfg.rise_keep_prob, spec)?;
    min_max_normalize(x.d_features(), x.t_steps(), &raw)
}
