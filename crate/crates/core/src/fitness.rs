//! Perturbation error and cached mask evaluation.
//!
//! The fitness of a mask is the discrepancy between the model's prediction on
//! the original input and on the masked input: a sum of squared differences
//! for regression, cross-entropy for classification.

use std::sync::atomic::{AtomicUsize, Ordering};

use dashmap::DashMap;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::BlackBoxModel;
use crate::perturbation::{apply_binary, blend, perturbation_matrix, PerturbationSpec};
use crate::scalar::Scalar;
use crate::series::{validate_pair, DenseMask, ModelOutput, TaskKind, TimeSeries};
use crate::strip::StripMask;

/// Lower clamp applied to predicted probabilities before taking logs.
pub const DEFAULT_LOG_CLAMP: f64 = 1e-12;

fn same_len<S>(y: &ModelOutput<S>, y_hat: &ModelOutput<S>) -> Result<()>
where
    S: Scalar,
{
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    Ok(())
}

/// `Σ (y_i − ŷ_i)²`.
pub fn error_regression<S: Scalar>(y: &ModelOutput<S>, y_hat: &ModelOutput<S>) -> Result<S> {
    same_len(y, y_hat)?;
    Ok(y
        .values()
        .iter()
        .zip(y_hat.values())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum())
}

/// `−Σ y_c · ln(max(ŷ_c, ε))` with the default clamp.
pub fn error_classification<S: Scalar>(y: &ModelOutput<S>, y_hat: &ModelOutput<S>) -> Result<S> {
    error_classification_with(y, y_hat, DEFAULT_LOG_CLAMP)
}

pub fn error_classification_with<S: Scalar>(
    y: &ModelOutput<S>,
    y_hat: &ModelOutput<S>,
    log_clamp: f64,
) -> Result<S> {
    same_len(y, y_hat)?;
    for out in [y, y_hat] {
        if out.task() != TaskKind::Classification {
            return Err(Error::NotProbability(
                "cross-entropy needs classification outputs".into(),
            ));
        }
    }
    let eps = S::from_f64_lossy(log_clamp);
    let total = y
        .values()
        .iter()
        .zip(y_hat.values())
        .filter(|(&p, _)| p != S::zero())
        .map(|(&p, &q)| p * q.max(eps).min(S::one()).ln())
        .sum::<S>();
    // −0 would break bit-exact comparisons against 0
    Ok(if total == S::zero() { S::zero() } else { -total })
}

/// Dispatches to the error measure matching `task`.
pub fn perturbation_error<S: Scalar>(
    task: TaskKind,
    y: &ModelOutput<S>,
    y_hat: &ModelOutput<S>,
    log_clamp: f64,
) -> Result<S> {
    match task {
        TaskKind::Regression => error_regression(y, y_hat),
        TaskKind::Classification => error_classification_with(y, y_hat, log_clamp),
    }
}

/// Cache key: exact packed bits for binary masks, a content digest otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MaskKey {
    Bits(Vec<u64>),
    Digest([u8; 32]),
}

impl MaskKey {
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            words[i / 64] |= 1 << (i % 64);
        }
        MaskKey::Bits(words)
    }

    pub fn from_dense<S: Scalar>(m: &DenseMask<S>) -> Self {
        if m.is_binary() {
            let bits: Vec<bool> = m.values().iter().map(|&v| v == S::one()).collect();
            return Self::from_bits(&bits);
        }
        let mut hasher = Sha256::new();
        hasher.update((m.d_features() as u64).to_le_bytes());
        hasher.update((m.t_steps() as u64).to_le_bytes());
        for v in m.values() {
            hasher.update(v.key_bits().to_le_bytes());
        }
        MaskKey::Digest(hasher.finalize().into())
    }
}

/// A mask in either representation.
#[derive(Debug, Clone, Copy)]
pub enum MaskRef<'a, S> {
    Strip(&'a StripMask),
    Dense(&'a DenseMask<S>),
}

impl<'a, S> From<&'a StripMask> for MaskRef<'a, S> {
    fn from(m: &'a StripMask) -> Self {
        MaskRef::Strip(m)
    }
}

impl<'a, S> From<&'a DenseMask<S>> for MaskRef<'a, S> {
    fn from(m: &'a DenseMask<S>) -> Self {
        MaskRef::Dense(m)
    }
}

/// Evaluates masks against one model and one input, memoizing by footprint.
///
/// `f(X)` is computed once at construction. Masks with identical dense
/// content share one cache entry regardless of how they were built.
pub struct FitnessEvaluator<'a, S: Scalar, M: BlackBoxModel<S> + ?Sized> {
    model: &'a M,
    x: &'a TimeSeries<S>,
    spec: PerturbationSpec,
    perturbation: Vec<S>,
    reference: ModelOutput<S>,
    log_clamp: f64,
    cache: DashMap<MaskKey, S>,
    evaluations: AtomicUsize,
}

impl<'a, S: Scalar, M: BlackBoxModel<S> + ?Sized> FitnessEvaluator<'a, S, M> {
    pub fn new(model: &'a M, x: &'a TimeSeries<S>, spec: PerturbationSpec) -> Result<Self> {
        let perturbation = perturbation_matrix(x, &spec)?;
        let reference = checked_predict(model, x)?;
        Ok(Self {
            model,
            x,
            spec,
            perturbation,
            reference,
            log_clamp: DEFAULT_LOG_CLAMP,
            cache: DashMap::new(),
            evaluations: AtomicUsize::new(1),
        })
    }

    /// Evaluates `f(X)` a second time and fails if the model is not
    /// deterministic.
    pub fn verify_determinism(&self) -> Result<()> {
        let again = checked_predict(self.model, self.x)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        if again != self.reference {
            return Err(Error::Model(
                "model returned different outputs for the same input".into(),
            ));
        }
        Ok(())
    }

    pub fn with_log_clamp(mut self, log_clamp: f64) -> Self {
        self.log_clamp = log_clamp;
        self
    }

    pub fn reference(&self) -> &ModelOutput<S> {
        &self.reference
    }

    pub fn input(&self) -> &TimeSeries<S> {
        self.x
    }

    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }

    pub fn model(&self) -> &M {
        self.model
    }

    /// Number of model calls so far, including the reference prediction.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    fn key(&self, mask: MaskRef<'_, S>) -> Result<MaskKey> {
        match mask {
            MaskRef::Strip(m) => {
                if m.shape() != self.x.shape() {
                    return Err(Error::ShapeMismatch {
                        expected: self.x.shape(),
                        actual: m.shape(),
                    });
                }
                Ok(MaskKey::from_bits(m.dense()))
            }
            MaskRef::Dense(m) => {
                validate_pair(self.x, m)?;
                Ok(MaskKey::from_dense(m))
            }
        }
    }

    fn perturbed(&self, mask: MaskRef<'_, S>) -> Result<TimeSeries<S>> {
        match mask {
            MaskRef::Strip(m) => apply_binary(self.x, m.dense(), &self.perturbation),
            MaskRef::Dense(m) => Ok(blend(self.x, m.values(), &self.perturbation)),
        }
    }

    fn score(&self, y_hat: &ModelOutput<S>) -> Result<S> {
        let delta = perturbation_error(self.model.task(), &self.reference, y_hat, self.log_clamp)?;
        if !delta.is_finite() {
            return Err(Error::Model(format!("non-finite perturbation error {delta}")));
        }
        Ok(delta)
    }

    fn compute(&self, mask: MaskRef<'_, S>) -> Result<S> {
        let x_hat = self.perturbed(mask)?;
        let y_hat = checked_predict(self.model, &x_hat)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.score(&y_hat)
    }

    /// Perturbation error of one mask.
    pub fn evaluate<'m>(&self, mask: impl Into<MaskRef<'m, S>>) -> Result<S>
    where
        S: 'm,
    {
        let mask = mask.into();
        let key = self.key(mask)?;
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let delta = self.compute(mask)?;
        self.cache.insert(key, delta);
        Ok(delta)
    }

    /// Evaluates many masks, running uncached ones in parallel when the model
    /// allows it.
    ///
    /// Each distinct footprint is sent to the model at most once, so the
    /// number of model calls does not depend on scheduling. On failure the
    /// error of the lowest-indexed failing mask is returned.
    pub fn evaluate_batch(&self, masks: &[MaskRef<'_, S>]) -> Result<Vec<S>> {
        let keys: Vec<MaskKey> = masks
            .par_iter()
            .map(|&m| self.key(m))
            .collect::<Result<_>>()?;

        let mut pending: Vec<usize> = Vec::new();
        {
            let mut seen = std::collections::HashSet::new();
            for (i, k) in keys.iter().enumerate() {
                if !self.cache.contains_key(k) && seen.insert(k) {
                    pending.push(i);
                }
            }
        }

        let computed: Vec<Result<S>> = if self.model.supports_batch() {
            self.compute_batched(masks, &pending)
        } else if self.model.concurrent_safe() {
            pending.par_iter().map(|&i| self.compute(masks[i])).collect()
        } else {
            pending.iter().map(|&i| self.compute(masks[i])).collect()
        };
        for (&i, r) in pending.iter().zip(computed) {
            self.cache.insert(keys[i].clone(), r?);
        }

        Ok(keys
            .iter()
            .map(|k| *self.cache.get(k).expect("every key evaluated above"))
            .collect())
    }

    fn compute_batched(&self, masks: &[MaskRef<'_, S>], pending: &[usize]) -> Vec<Result<S>> {
        let inputs: Result<Vec<TimeSeries<S>>> =
            pending.iter().map(|&i| self.perturbed(masks[i])).collect();
        let outputs = inputs.and_then(|xs| {
            let ys = self.model.predict_batch(&xs)?;
            if ys.len() != xs.len() {
                return Err(Error::Model(format!(
                    "batch of {} inputs returned {} outputs",
                    xs.len(),
                    ys.len()
                )));
            }
            self.evaluations.fetch_add(xs.len(), Ordering::Relaxed);
            Ok(ys)
        });
        match outputs {
            Ok(ys) => ys
                .iter()
                .map(|y| {
                    check_output(self.model.task(), y)?;
                    self.score(y)
                })
                .collect(),
            Err(e) => {
                let msg = e.to_string();
                let mut out = vec![Err(e)];
                out.extend((1..pending.len()).map(|_| Err(Error::Model(msg.clone()))));
                out
            }
        }
    }
}

fn check_output<S: Scalar>(task: TaskKind, y: &ModelOutput<S>) -> Result<()> {
    if y.task() != task {
        return Err(Error::Model(format!(
            "model declared {task} but returned a {} output",
            y.task()
        )));
    }
    Ok(())
}

/// Calls the model and checks the output against its declared task.
pub(crate) fn checked_predict<S: Scalar, M: BlackBoxModel<S> + ?Sized>(
    model: &M,
    x: &TimeSeries<S>,
) -> Result<ModelOutput<S>> {
    let y = model.predict(x)?;
    check_output(model.task(), &y)?;
    Ok(y)
}
