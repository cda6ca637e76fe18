//! Synthetic benchmarks with known ground truth.
//!
//! Inputs are independent AR(3) sequences per feature. A salient set `A` is
//! placed according to the dataset kind, and the predictor is the white-box
//! model `f(X) = Σ_{(d,t)∈A} x(d,t)²`, which ignores every point outside `A`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::GroundTruth;
use crate::model::BlackBoxModel;
use crate::scalar::Scalar;
use crate::series::{ModelOutput, TaskKind, TimeSeries};

/// Side length used by the standard benchmarks.
pub const STANDARD_SIZE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmaConfig {
    /// Autoregressive coefficients for lags 1, 2 and 3.
    pub coefficients: [f64; 3],
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for ArmaConfig {
    fn default() -> Self {
        Self {
            coefficients: [0.25, 0.1, 0.05],
            noise_std: 1.0,
            seed: 0,
        }
    }
}

/// Runs `x_t = Σ_k c_k x_{t−k} + ε_t` over a given noise sequence, with zero
/// history before the first step.
pub fn ar3_recurrence(coefficients: &[f64; 3], noise: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = Vec::with_capacity(noise.len());
    for (t, &eps) in noise.iter().enumerate() {
        let mut v = eps;
        for (k, c) in coefficients.iter().enumerate() {
            if let Some(prev) = t.checked_sub(k + 1) {
                v += c * x[prev];
            }
        }
        x.push(v);
    }
    x
}

/// Generates a `d_features × t_steps` series; feature `d` uses its own random
/// stream derived from the seed.
pub fn arma_generate<S: Scalar>(cfg: &ArmaConfig, d_features: usize, t_steps: usize) -> Result<TimeSeries<S>> {
    if !cfg.noise_std.is_finite() || cfg.noise_std < 0.0 {
        return Err(Error::Config(format!("noise_std {} must be finite and non-negative", cfg.noise_std)));
    }
    let mut values = Vec::with_capacity(d_features * t_steps);
    for d in 0..d_features {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(d as u64);
        let noise: Vec<f64> = (0..t_steps)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * cfg.noise_std
            })
            .collect();
        values.extend(
            ar3_recurrence(&cfg.coefficients, &noise)
                .into_iter()
                .map(S::from_f64_lossy),
        );
    }
    TimeSeries::new(d_features, t_steps, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    RareFeature,
    RareTime,
    Mixture,
    Random,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::RareFeature,
        DatasetKind::RareTime,
        DatasetKind::Mixture,
        DatasetKind::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::RareFeature => "rare_feature",
            DatasetKind::RareTime => "rare_time",
            DatasetKind::Mixture => "mixture",
            DatasetKind::Random => "random",
        }
    }

    /// Strip budget `(count, min length, max length)` tuned for this kind at
    /// the standard size.
    pub fn strip_settings(&self) -> (usize, usize, usize) {
        match self {
            DatasetKind::RareFeature => (14, 6, 10),
            DatasetKind::RareTime => (25, 3, 5),
            DatasetKind::Mixture => (45, 2, 8),
            DatasetKind::Random => (55, 1, 6),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown dataset kind {s:?} (expected rare_feature, rare_time, mixture or random)"
                ))
            })
    }
}

/// Sizes of the salient structures. At 50×50 these are 5 features × 25 steps
/// (rare feature), 5 steps × 25 features (rare time) and 250 points (random);
/// other shapes scale proportionally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SalientLayout {
    pub salient_features: usize,
    pub feature_run: usize,
    pub salient_steps: usize,
    pub step_features: usize,
    pub random_points: usize,
    /// Longest consecutive run used when scattering random regions; 1 gives
    /// isolated points.
    pub random_run_max: usize,
}

impl SalientLayout {
    pub fn scaled(d_features: usize, t_steps: usize) -> Self {
        Self {
            salient_features: (d_features / 10).max(1),
            feature_run: (t_steps / 2).max(1),
            salient_steps: (t_steps / 10).max(1),
            step_features: (d_features / 2).max(1),
            random_points: (d_features * t_steps / 10).max(1),
            random_run_max: (t_steps / 8).max(1),
        }
    }

    fn check(&self, d_features: usize, t_steps: usize) -> Result<()> {
        let ok = self.salient_features >= 1
            && self.salient_features <= d_features
            && (1..=t_steps).contains(&self.feature_run)
            && (1..=t_steps).contains(&self.salient_steps)
            && (1..=d_features).contains(&self.step_features)
            && (1..=d_features * t_steps).contains(&self.random_points)
            && (1..=t_steps).contains(&self.random_run_max);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "salient layout {self:?} does not fit a {d_features}x{t_steps} input"
            )))
        }
    }
}

fn rare_feature_points<R: Rng>(
    layout: &SalientLayout,
    t_steps: usize,
    features: &[usize],
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &d in features {
        let start = rng.random_range(0..=t_steps - layout.feature_run);
        out.extend((start..start + layout.feature_run).map(|t| (d, t)));
    }
    out
}

fn rare_time_points<R: Rng>(
    layout: &SalientLayout,
    t_steps: usize,
    features: &[usize],
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let start = rng.random_range(0..=t_steps - layout.salient_steps);
    features
        .iter()
        .flat_map(|&d| (start..start + layout.salient_steps).map(move |t| (d, t)))
        .collect()
}

fn distinct<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut v = sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// Places the salient set for `kind`.
pub fn place_salient<R: Rng>(
    kind: DatasetKind,
    d_features: usize,
    t_steps: usize,
    layout: &SalientLayout,
    rng: &mut R,
) -> Result<GroundTruth> {
    layout.check(d_features, t_steps)?;
    let points: Vec<(usize, usize)> = match kind {
        DatasetKind::RareFeature => {
            let features = distinct(rng, d_features, layout.salient_features);
            rare_feature_points(layout, t_steps, &features, rng)
        }
        DatasetKind::RareTime => {
            let features = distinct(rng, d_features, layout.step_features);
            rare_time_points(layout, t_steps, &features, rng)
        }
        DatasetKind::Mixture => {
            let features = distinct(rng, d_features, layout.salient_features);
            let mut set: BTreeSet<(usize, usize)> =
                rare_feature_points(layout, t_steps, &features, rng).into_iter().collect();
            // rare-time features come from the remaining rows when possible
            let rest: Vec<usize> = (0..d_features).filter(|d| !features.contains(d)).collect();
            let step_features = if rest.len() >= layout.step_features {
                let pick = distinct(rng, rest.len(), layout.step_features);
                pick.into_iter().map(|i| rest[i]).collect()
            } else {
                distinct(rng, d_features, layout.step_features)
            };
            set.extend(rare_time_points(layout, t_steps, &step_features, rng));
            let target = (layout.salient_features * layout.feature_run
                + layout.salient_steps * layout.step_features)
                .min(d_features * t_steps);
            while set.len() < target {
                set.insert((rng.random_range(0..d_features), rng.random_range(0..t_steps)));
            }
            set.into_iter().collect()
        }
        DatasetKind::Random => {
            let mut set = BTreeSet::new();
            while set.len() < layout.random_points {
                let d = rng.random_range(0..d_features);
                let len = rng.random_range(1..=layout.random_run_max);
                let start = rng.random_range(0..=t_steps - len);
                for t in start..start + len {
                    if set.len() == layout.random_points {
                        break;
                    }
                    set.insert((d, t));
                }
            }
            set.into_iter().collect()
        }
    };
    GroundTruth::new(d_features, t_steps, points)
}

/// `f(X) = Σ_{(d,t)∈A} x(d,t)²` as a one-output regression model.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteBoxModel {
    d_features: usize,
    t_steps: usize,
    points: Vec<(usize, usize)>,
}

impl WhiteBoxModel {
    pub fn new(gt: &GroundTruth) -> Self {
        Self {
            d_features: gt.d_features(),
            t_steps: gt.t_steps(),
            points: gt.points().collect(),
        }
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }
}

pub fn make_white_box(gt: &GroundTruth) -> WhiteBoxModel {
    WhiteBoxModel::new(gt)
}

impl<S: Scalar> BlackBoxModel<S> for WhiteBoxModel {
    fn task(&self) -> TaskKind {
        TaskKind::Regression
    }

    fn predict(&self, x: &TimeSeries<S>) -> Result<ModelOutput<S>> {
        if x.shape() != (self.d_features, self.t_steps) {
            return Err(Error::ShapeMismatch {
                expected: (self.d_features, self.t_steps),
                actual: x.shape(),
            });
        }
        let sum = self
            .points
            .iter()
            .map(|&(d, t)| {
                let v = x.get(d, t);
                v * v
            })
            .sum();
        ModelOutput::regression(vec![sum])
    }
}

/// A generated benchmark input with its ground truth and predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance<S> {
    pub kind: DatasetKind,
    pub seed: u64,
    pub x: TimeSeries<S>,
    pub gt: GroundTruth,
    pub model: WhiteBoxModel,
}

/// Standard 50×50 instance.
pub fn make_instance<S: Scalar>(kind: DatasetKind, seed: u64) -> Result<SyntheticInstance<S>> {
    make_instance_sized(kind, STANDARD_SIZE, STANDARD_SIZE, seed)
}

pub fn make_instance_sized<S: Scalar>(
    kind: DatasetKind,
    d_features: usize,
    t_steps: usize,
    seed: u64,
) -> Result<SyntheticInstance<S>> {
    make_instance_with(kind, d_features, t_steps, &SalientLayout::scaled(d_features, t_steps), seed)
}

pub fn make_instance_with<S: Scalar>(
    kind: DatasetKind,
    d_features: usize,
    t_steps: usize,
    layout: &SalientLayout,
    seed: u64,
) -> Result<SyntheticInstance<S>> {
    let x = arma_generate(
        &ArmaConfig {
            seed,
            ..ArmaConfig::default()
        },
        d_features,
        t_steps,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let gt = place_salient(kind, d_features, t_steps, layout, &mut rng)?;
    let model = make_white_box(&gt);
    Ok(SyntheticInstance {
        kind,
        seed,
        x,
        gt,
        model,
    })
}
