//! Strips and strip masks.
//!
//! A strip marks `length` consecutive time steps of one feature, starting at
//! `start`. Indices are 0-based here; `Display` and the file formats use
//! 1-based indices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::DenseMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Strip {
    pub feature: usize,
    pub start: usize,
    pub length: usize,
}

impl Strip {
    pub fn new(feature: usize, start: usize, length: usize) -> Self {
        Self {
            feature,
            start,
            length,
        }
    }

    /// Builds a strip, truncating its length so it ends inside the horizon.
    /// The start is never moved.
    pub fn clamped(feature: usize, start: usize, length: usize, t_steps: usize) -> Self {
        let length = length.min(t_steps.saturating_sub(start)).max(1);
        Self {
            feature,
            start,
            length,
        }
    }

    /// One past the last covered time step.
    pub fn end(&self) -> usize {
        self.start + self.length
    }

    pub fn fits(&self, d_features: usize, t_steps: usize) -> bool {
        self.length >= 1 && self.feature < d_features && self.end() <= t_steps
    }

    pub fn covers(&self, d: usize, t: usize) -> bool {
        d == self.feature && (self.start..self.end()).contains(&t)
    }
}

impl fmt::Display for Strip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(feature {}, start {}, length {})",
            self.feature + 1,
            self.start + 1,
            self.length
        )
    }
}

/// Union of strip footprints as a feature-major occupancy vector.
pub fn materialize(strips: &[Strip], d_features: usize, t_steps: usize) -> Result<Vec<bool>> {
    let mut dense = vec![false; d_features * t_steps];
    for s in strips {
        if !s.fits(d_features, t_steps) {
            return Err(Error::StripOutOfBounds {
                strip: *s,
                d_features,
                t_steps,
            });
        }
        let row = s.feature * t_steps;
        dense[row + s.start..row + s.end()].fill(true);
    }
    Ok(dense)
}

/// A non-empty list of strips together with its materialized footprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripMask {
    strips: Vec<Strip>,
    d_features: usize,
    t_steps: usize,
    dense: Vec<bool>,
}

impl StripMask {
    pub fn new(strips: Vec<Strip>, d_features: usize, t_steps: usize) -> Result<Self> {
        if strips.is_empty() {
            return Err(Error::Dimension("a strip mask needs at least one strip".into()));
        }
        let dense = materialize(&strips, d_features, t_steps)?;
        Ok(Self {
            strips,
            d_features,
            t_steps,
            dense,
        })
    }

    pub fn strips(&self) -> &[Strip] {
        &self.strips
    }

    pub fn strip_count(&self) -> usize {
        self.strips.len()
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

    /// Feature-major binary footprint.
    pub fn dense(&self) -> &[bool] {
        &self.dense
    }

    pub fn is_set(&self, d: usize, t: usize) -> bool {
        self.dense[d * self.t_steps + t]
    }

    /// Number of covered points.
    pub fn popcount(&self) -> usize {
        self.dense.iter().filter(|&&b| b).count()
    }

    /// Replaces strip `index`, re-materializing the footprint.
    pub fn with_strip(&self, index: usize, strip: Strip) -> Result<Self> {
        let mut strips = self.strips.clone();
        strips[index] = strip;
        Self::new(strips, self.d_features, self.t_steps)
    }

    pub fn to_dense<S: Scalar>(&self) -> DenseMask<S> {
        DenseMask::from_raw(
            self.d_features,
            self.t_steps,
            self.dense
                .iter()
                .map(|&b| if b { S::one() } else { S::zero() })
                .collect(),
        )
    }
}
