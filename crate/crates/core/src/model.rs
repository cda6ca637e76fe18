//! The black-box model contract.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{ModelOutput, TaskKind, TimeSeries};

/// An opaque predictor `X -> y`.
///
/// Implementations must be deterministic: identical inputs produce identical
/// outputs, and the output length only depends on the input shape. Fitness
/// caching relies on both.
pub trait BlackBoxModel<S: Scalar>: Send + Sync {
    fn task(&self) -> TaskKind;

    fn predict(&self, x: &TimeSeries<S>) -> Result<ModelOutput<S>>;

    /// Whether `predict_batch` is cheaper than repeated `predict` calls.
    fn supports_batch(&self) -> bool {
        false
    }

    fn predict_batch(&self, xs: &[TimeSeries<S>]) -> Result<Vec<ModelOutput<S>>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Whether `predict` may be called from several threads at once. Callers
    /// serialize evaluation when this is false.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

impl<S: Scalar, M: BlackBoxModel<S> + ?Sized> BlackBoxModel<S> for &M {
    fn task(&self) -> TaskKind {
        (**self).task()
    }
    fn predict(&self, x: &TimeSeries<S>) -> Result<ModelOutput<S>> {
        (**self).predict(x)
    }
    fn supports_batch(&self) -> bool {
        (**self).supports_batch()
    }
    fn predict_batch(&self, xs: &[TimeSeries<S>]) -> Result<Vec<ModelOutput<S>>> {
        (**self).predict_batch(xs)
    }
    fn concurrent_safe(&self) -> bool {
        (**self).concurrent_safe()
    }
}

impl<S: Scalar, M: BlackBoxModel<S> + ?Sized> BlackBoxModel<S> for Box<M> {
    fn task(&self) -> TaskKind {
        (**self).task()
    }
    fn predict(&self, x: &TimeSeries<S>) -> Result<ModelOutput<S>> {
        (**self).predict(x)
    }
    fn supports_batch(&self) -> bool {
        (**self).supports_batch()
    }
    fn predict_batch(&self, xs: &[TimeSeries<S>]) -> Result<Vec<ModelOutput<S>>> {
        (**self).predict_batch(xs)
    }
    fn concurrent_safe(&self) -> bool {
        (**self).concurrent_safe()
    }
}

/// Wraps a closure returning raw output values as a model.
pub struct FnModel<F> {
    task: TaskKind,
    f: F,
}

impl<F> FnModel<F> {
    pub fn new(task: TaskKind, f: F) -> Self {
        Self { task, f }
    }
}

impl<S, F> BlackBoxModel<S> for FnModel<F>
where
    S: Scalar,
    F: Fn(&TimeSeries<S>) -> Vec<S> + Send + Sync,
{
    fn task(&self) -> TaskKind {
        self.task
    }

    fn predict(&self, x: &TimeSeries<S>) -> Result<ModelOutput<S>> {
        ModelOutput::new((self.f)(x), self.task).map_err(|e| match e {
            Error::NonFinite(msg) => Error::Model(format!("non-finite output: {msg}")),
            other => other,
        })
    }
}
