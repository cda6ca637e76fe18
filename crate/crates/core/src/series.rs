//! Dense D×T containers: the model input, real-valued saliency masks and
//! model outputs.
//!
//! Storage is feature-major (`values[d * t_steps + t]`) and indices are
//! 0-based in the API. File formats translate to 1-based indices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Kind of prediction a model makes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Regression,
    Classification,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Regression => f.write_str("regression"),
            TaskKind::Classification => f.write_str("classification"),
        }
    }
}

fn check_shape(d_features: usize, t_steps: usize, len: usize) -> Result<()> {
    if d_features == 0 || t_steps == 0 {
        return Err(Error::Dimension(format!(
            "shape {d_features}x{t_steps} must be at least 1x1"
        )));
    }
    if d_features.checked_mul(t_steps) != Some(len) {
        return Err(Error::Dimension(format!(
            "{len} values cannot fill a {d_features}x{t_steps} matrix"
        )));
    }
    Ok(())
}

/// A multivariate time series with `d_features` rows and `t_steps` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<S> {
    d_features: usize,
    t_steps: usize,
    values: Vec<S>,
}

impl<S: Scalar> TimeSeries<S> {
    /// Builds a series from feature-major values. Every entry must be finite.
    pub fn new(d_features: usize, t_steps: usize, values: Vec<S>) -> Result<Self> {
        check_shape(d_features, t_steps, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "series entry ({}, {})",
                i / t_steps + 1,
                i % t_steps + 1
            )));
        }
        Ok(Self {
            d_features,
            t_steps,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != t) {
            return Err(Error::Dimension(format!(
                "row {} has {} entries, expected {t}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), t, rows.concat())
    }

    pub fn zeros(d_features: usize, t_steps: usize) -> Result<Self> {
        Self::new(d_features, t_steps, vec![S::zero(); d_features * t_steps])
    }

    /// Builds a series from trusted, already validated values.
    pub(crate) fn from_raw(d_features: usize, t_steps: usize, values: Vec<S>) -> Self {
        debug_assert_eq!(values.len(), d_features * t_steps);
        Self {
            d_features,
            t_steps,
            values,
        }
    }

    pub fn d_features(&self) -> usize {
        self.d_features
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d_features, self.t_steps)
    }

    #[inline]
    pub fn get(&self, d: usize, t: usize) -> S {
        self.values[d * self.t_steps + t]
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn row(&self, d: usize) -> &[S] {
        &self.values[d * self.t_steps..(d + 1) * self.t_steps]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.values.chunks(self.t_steps)
    }

    /// Returns a copy with one entry replaced. The value must be finite.
    pub fn with_value(&self, d: usize, t: usize, value: S) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("replacement at ({}, {})", d + 1, t + 1)));
        }
        let mut out = self.clone();
        out.values[d * self.t_steps + t] = value;
        Ok(out)
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }
}

/// A real-valued saliency mask with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMask<S> {
    d_features: usize,
    t_steps: usize,
    values: Vec<S>,
}

impl<S: Scalar> DenseMask<S> {
    pub fn new(d_features: usize, t_steps: usize, values: Vec<S>) -> Result<Self> {
        check_shape(d_features, t_steps, values.len())?;
        for (i, v) in values.iter().enumerate() {
            let (d, t) = (i / t_steps + 1, i % t_steps + 1);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("mask entry ({d}, {t})")));
            }
            if *v < S::zero() || *v > S::one() {
                return Err(Error::MaskRange {
                    d,
                    t,
                    value: v.as_f64(),
                });
            }
        }
        Ok(Self {
            d_features,
            t_steps,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != t) {
            return Err(Error::Dimension(format!(
                "mask row {} has {} entries, expected {t}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), t, rows.concat())
    }

    pub fn zeros(d_features: usize, t_steps: usize) -> Result<Self> {
        Self::filled(d_features, t_steps, S::zero())
    }

    pub fn ones(d_features: usize, t_steps: usize) -> Result<Self> {
        Self::filled(d_features, t_steps, S::one())
    }

    pub fn filled(d_features: usize, t_steps: usize, value: S) -> Result<Self> {
        Self::new(d_features, t_steps, vec![value; d_features * t_steps])
    }

    /// Mask equal to one at a single point and zero elsewhere.
    pub fn one_hot(d_features: usize, t_steps: usize, d: usize, t: usize) -> Result<Self> {
        if d >= d_features || t >= t_steps {
            return Err(Error::Dimension(format!(
                "point ({}, {}) outside {d_features}x{t_steps}",
                d + 1,
                t + 1
            )));
        }
        let mut values = vec![S::zero(); d_features * t_steps];
        values[d * t_steps + t] = S::one();
        Self::new(d_features, t_steps, values)
    }

    /// Builds a mask from a binary occupancy vector.
    pub fn from_binary(d_features: usize, t_steps: usize, bits: &[bool]) -> Result<Self> {
        check_shape(d_features, t_steps, bits.len())?;
        Ok(Self::from_raw(
            d_features,
            t_steps,
            bits.iter().map(|&b| if b { S::one() } else { S::zero() }).collect(),
        ))
    }

    pub(crate) fn from_raw(d_features: usize, t_steps: usize, values: Vec<S>) -> Self {
        debug_assert_eq!(values.len(), d_features * t_steps);
        Self {
            d_features,
            t_steps,
            values,
        }
    }

    pub fn d_features(&self) -> usize {
        self.d_features
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d_features, self.t_steps)
    }

    #[inline]
    pub fn get(&self, d: usize, t: usize) -> S {
        self.values[d * self.t_steps + t]
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn row(&self, d: usize) -> &[S] {
        &self.values[d * self.t_steps..(d + 1) * self.t_steps]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.values.chunks(self.t_steps)
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == S::zero() || v == S::one())
    }

    /// Number of entries that are nonzero.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|&&v| v != S::zero()).count()
    }
}

/// Flattened model prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput<S> {
    values: Vec<S>,
    task: TaskKind,
}

/// Tolerance on the sum of a classification output.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

impl<S: Scalar> ModelOutput<S> {
    pub fn new(values: Vec<S>, task: TaskKind) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("model output entry {}", i + 1)));
        }
        if task == TaskKind::Classification {
            if values.is_empty() {
                return Err(Error::NotProbability("empty output".into()));
            }
            if let Some(v) = values.iter().find(|&&v| v < S::zero() || v > S::one()) {
                return Err(Error::NotProbability(format!("entry {v} outside [0, 1]")));
            }
            let sum: f64 = values.iter().map(|v| v.as_f64()).sum();
            if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                return Err(Error::NotProbability(format!("entries sum to {sum}")));
            }
        }
        Ok(Self { values, task })
    }

    pub fn regression(values: Vec<S>) -> Result<Self> {
        Self::new(values, TaskKind::Regression)
    }

    pub fn classification(values: Vec<S>) -> Result<Self> {
        Self::new(values, TaskKind::Classification)
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, S)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            match best {
                Some((_, b)) if v <= b => {}
                _ => best = Some((i, v)),
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Checks that a series and a mask have the same shape. Both types validate
/// their own entries on construction.
pub fn validate_pair<S: Scalar>(x: &TimeSeries<S>, m: &DenseMask<S>) -> Result<()> {
    if x.shape() != m.shape() {
        return Err(Error::ShapeMismatch {
            expected: x.shape(),
            actual: m.shape(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pair_is_ok() {
        let x = TimeSeries::<f64>::zeros(2, 3).unwrap();
        let m = DenseMask::<f64>::zeros(2, 3).unwrap();
        validate_pair(&x, &m).unwrap();
    }

    #[test]
    fn transposed_mask_is_shape_error() {
        let x = TimeSeries::<f64>::zeros(2, 3).unwrap();
        let m = DenseMask::<f64>::zeros(3, 2).unwrap();
        assert!(matches!(
            validate_pair(&x, &m),
            Err(Error::ShapeMismatch { expected: (2, 3), actual: (3, 2) })
        ));
    }

    #[test]
    fn mask_entry_above_one_is_range_error() {
        let err = DenseMask::<f64>::from_rows(&[vec![0.0, 1.2]]).unwrap_err();
        assert!(matches!(err, Error::MaskRange { d: 1, t: 2, .. }));
    }

    #[test]
    fn non_finite_series_rejected() {
        assert!(matches!(
            TimeSeries::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(TimeSeries::<f32>::new(1, 1, vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn empty_shapes_rejected() {
        assert!(TimeSeries::<f64>::new(0, 3, vec![]).is_err());
        assert!(DenseMask::<f64>::new(1, 0, vec![]).is_err());
        assert!(TimeSeries::<f64>::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn classification_output_must_be_normalized() {
        assert!(ModelOutput::classification(vec![0.6, 0.4]).is_ok());
        assert!(matches!(
            ModelOutput::classification(vec![0.6, 0.6]),
            Err(Error::NotProbability(_))
        ));
        assert!(ModelOutput::classification(vec![1.2, -0.2]).is_err());
        assert!(ModelOutput::regression(vec![5.0, -3.0]).is_ok());
        assert!(ModelOutput::regression(vec![f64::NAN]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        let y = ModelOutput::classification(vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(y.argmax(), Some(0));
    }
}
