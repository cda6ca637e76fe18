//! Perturbation baselines and the masking operator
//! `x̂ = m·p + (1 − m)·x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{validate_pair, DenseMask, TimeSeries};
use crate::strip::StripMask;

/// Half-width used for [`PerturbationSpec::WindowMean`] when none is given.
pub const DEFAULT_WINDOW: usize = 3;

/// How replacement values are computed for masked points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    /// Every masked point is replaced by `value`.
    Constant { value: f64 },
    /// Mean of the feature over the whole horizon.
    GlobalMean,
    /// Mean of the `half_width` neighbors on each side, excluding the point
    /// itself and clipped to the horizon.
    WindowMean { half_width: usize },
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec::Constant { value: 0.0 }
    }
}

impl PerturbationSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PerturbationSpec::Constant { value } if !value.is_finite() => {
                Err(Error::Config(format!("constant perturbation {value} is not finite")))
            }
            PerturbationSpec::WindowMean { half_width: 0 } => {
                Err(Error::Config("window half-width must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Replacement values for every point of `x`.
pub fn perturbation_matrix<S: Scalar>(
    x: &TimeSeries<S>,
    spec: &PerturbationSpec,
) -> Result<Vec<S>> {
    spec.validate()?;
    let (d_features, t_steps) = x.shape();
    let mut out = Vec::with_capacity(d_features * t_steps);
    match *spec {
        PerturbationSpec::Constant { value } => {
            out.resize(d_features * t_steps, S::from_f64_lossy(value));
        }
        PerturbationSpec::GlobalMean => {
            for row in x.rows() {
                let mean = row.iter().copied().sum::<S>() / S::from_count(t_steps);
                out.extend(std::iter::repeat_n(mean, t_steps));
            }
        }
        PerturbationSpec::WindowMean { half_width } => {
            if t_steps < 2 {
                return Err(Error::DegenerateWindow(
                    "a single time step has no neighbors".into(),
                ));
            }
            for row in x.rows() {
                for t in 0..t_steps {
                    let lo = t.saturating_sub(half_width);
                    let hi = (t + half_width).min(t_steps - 1);
                    let sum: S = row[lo..t].iter().chain(&row[t + 1..=hi]).copied().sum();
                    out.push(sum / S::from_count(hi - lo));
                }
            }
        }
    }
    Ok(out)
}

/// Applies a real-valued mask.
pub fn apply_mask<S: Scalar>(
    x: &TimeSeries<S>,
    m: &DenseMask<S>,
    spec: &PerturbationSpec,
) -> Result<TimeSeries<S>> {
    validate_pair(x, m)?;
    let p = perturbation_matrix(x, spec)?;
    Ok(blend(x, m.values(), &p))
}

/// Applies a binary strip mask: covered points take their perturbation value.
pub fn apply_strip_mask<S: Scalar>(
    x: &TimeSeries<S>,
    m: &StripMask,
    spec: &PerturbationSpec,
) -> Result<TimeSeries<S>> {
    let p = perturbation_matrix(x, spec)?;
    apply_binary(x, m.dense(), &p)
}

/// Applies a binary footprint against a precomputed perturbation matrix.
pub(crate) fn apply_binary<S: Scalar>(
    x: &TimeSeries<S>,
    bits: &[bool],
    p: &[S],
) -> Result<TimeSeries<S>> {
    if bits.len() != x.values().len() {
        return Err(Error::LengthMismatch {
            left: x.values().len(),
            right: bits.len(),
        });
    }
    let values = x
        .values()
        .iter()
        .zip(bits)
        .zip(p)
        .map(|((&xv, &b), &pv)| if b { pv } else { xv })
        .collect();
    Ok(TimeSeries::from_raw(x.d_features(), x.t_steps(), values))
}

pub(crate) fn blend<S: Scalar>(x: &TimeSeries<S>, m: &[S], p: &[S]) -> TimeSeries<S> {
    let values = x
        .values()
        .iter()
        .zip(m)
        .zip(p)
        .map(|((&xv, &mv), &pv)| mv * pv + (S::one() - mv) * xv)
        .collect();
    TimeSeries::from_raw(x.d_features(), x.t_steps(), values)
}
