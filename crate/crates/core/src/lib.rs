//! Binary strip-mask saliency for black-box multivariate time-series models.
//!
//! A strip mask marks runs of consecutive time steps on individual features.
//! [`optimizer::run`] searches for the strip mask whose perturbation changes a
//! model's prediction the most, using a cellular genetic algorithm. The crate
//! also ships synthetic benchmarks with known ground truth ([`synth`]),
//! evaluation metrics ([`metrics`]), comparison baselines ([`baselines`]) and a
//! subprocess adapter for models written in other languages ([`adapter`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common `f64` case.

pub mod adapter;
pub mod baselines;
pub mod error;
pub mod fitness;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod perturbation;
pub mod scalar;
pub mod series;
pub mod strip;
pub mod synth;

pub use error::{Error, Result};
pub use fitness::{FitnessEvaluator, MaskRef};
pub use metrics::{GroundTruth, MetricsConfig};
pub use model::{BlackBoxModel, FnModel};
pub use optimizer::{Neighborhood, OptimizerConfig, RunResult};
pub use perturbation::PerturbationSpec;
pub use scalar::Scalar;
pub use series::{validate_pair, DenseMask, ModelOutput, TaskKind, TimeSeries};
pub use strip::{materialize, Strip, StripMask};
pub use synth::{DatasetKind, SyntheticInstance, WhiteBoxModel};

pub type Series = TimeSeries<f64>;
pub type Series32 = TimeSeries<f32>;
pub type Mask = DenseMask<f64>;
pub type Mask32 = DenseMask<f32>;
pub type Output = ModelOutput<f64>;
pub type Output32 = ModelOutput<f32>;
pub type Instance = SyntheticInstance<f64>;
pub type Instance32 = SyntheticInstance<f32>;
pub type Outcome = RunResult<f64>;
pub type Outcome32 = RunResult<f32>;
