//! Command-line front end for strip-mask saliency: benchmark sweeps,
//! explanations of single inputs, mask evaluation and heatmap rendering.

pub mod bench;
pub mod error;
pub mod evaluate;
pub mod explain;
pub mod options;
pub mod render;
pub mod workers;

pub use error::{CliError, CliResult};
