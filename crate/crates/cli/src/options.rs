//! Command-line pieces shared by several subcommands.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::Args;
use serde::de::DeserializeOwned;

use stripmask_core::adapter::{ExternalModelOptions, ModelCommand};
use stripmask_core::{DatasetKind, Neighborhood, OptimizerConfig, PerturbationSpec, TaskKind};

use crate::error::{CliError, CliResult};

/// Parses `zero`, `constant:V`, `global-mean` or `window-mean[:K]`.
pub fn parse_perturbation(s: &str) -> Result<PerturbationSpec, String> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    let spec = match (name.replace('_', "-").as_str(), arg) {
        ("zero", None) => PerturbationSpec::zero(),
        ("constant", Some(v)) => PerturbationSpec::Constant {
            value: v.parse().map_err(|_| format!("bad constant {v:?}"))?,
        },
        ("global-mean", None) => PerturbationSpec::GlobalMean,
        ("window-mean", None) => PerturbationSpec::WindowMean {
            half_width: stripmask_core::perturbation::DEFAULT_WINDOW,
        },
        ("window-mean", Some(k)) => PerturbationSpec::WindowMean {
            half_width: k.parse().map_err(|_| format!("bad window half-width {k:?}"))?,
        },
        _ => {
            return Err(format!(
                "unknown perturbation {s:?} (zero, constant:V, global-mean, window-mean[:K])"
            ))
        }
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// `kind:seed`, e.g. `rare_feature:3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub kind: DatasetKind,
    pub seed: u64,
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, seed) = s
            .split_once(':')
            .ok_or_else(|| format!("expected kind:seed, got {s:?}"))?;
        Ok(Self {
            kind: kind.parse().map_err(|e: stripmask_core::Error| e.to_string())?,
            seed: seed.parse().map_err(|_| format!("bad seed {seed:?}"))?,
        })
    }
}

pub fn parse_task(s: &str) -> Result<TaskKind, String> {
    match s {
        "regression" => Ok(TaskKind::Regression),
        "classification" => Ok(TaskKind::Classification),
        _ => Err(format!("unknown task {s:?} (regression or classification)")),
    }
}

fn parse_neighborhood(s: &str) -> Result<Neighborhood, String> {
    match s.replace('-', "_").as_str() {
        "moore" => Ok(Neighborhood::Moore),
        "von_neumann" => Ok(Neighborhood::VonNeumann),
        _ => Err(format!("unknown neighborhood {s:?} (moore or von-neumann)")),
    }
}

/// External model selection.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Command line of an external model speaking the JSON-lines protocol.
    #[arg(long)]
    pub model: Option<String>,
    /// Task the model must declare.
    #[arg(long, value_parser = parse_task)]
    pub task: Option<TaskKind>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
}

impl ModelArgs {
    pub fn command(&self) -> CliResult<Option<ModelCommand>> {
        self.model
            .as_deref()
            .map(|m| ModelCommand::parse(m).map_err(CliError::from))
            .transpose()
    }

    pub fn adapter_options(&self) -> CliResult<ExternalModelOptions> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(CliError::config(format!("timeout {} must be positive", self.timeout)));
        }
        Ok(ExternalModelOptions {
            request_timeout: Duration::from_secs_f64(self.timeout),
            ..ExternalModelOptions::default()
        })
    }
}

/// Optimizer overrides; unset flags keep the base configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct OptimizerArgs {
    /// TOML file with optimizer settings.
    #[arg(long = "optimizer-config")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of strips per mask.
    #[arg(long)]
    pub strips: Option<usize>,
    #[arg(long)]
    pub len_min: Option<usize>,
    #[arg(long)]
    pub len_max: Option<usize>,
    #[arg(long)]
    pub grid_rows: Option<usize>,
    #[arg(long)]
    pub grid_cols: Option<usize>,
    #[arg(long)]
    pub p_crossover: Option<f64>,
    #[arg(long)]
    pub p_mutation: Option<f64>,
    #[arg(long)]
    pub p_translation: Option<f64>,
    #[arg(long, value_parser = parse_neighborhood)]
    pub neighborhood: Option<Neighborhood>,
    #[arg(long)]
    pub max_translation: Option<usize>,
}

impl OptimizerArgs {
    /// `base` (or the config file, when given) with every set flag applied.
    pub fn resolve(&self, base: OptimizerConfig) -> CliResult<OptimizerConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_toml(path)?,
            None => base,
        };
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        set!(
            generations => generations,
            seed => seed,
            strips => strip_count,
            len_min => strip_len_min,
            len_max => strip_len_max,
            grid_rows => grid_rows,
            grid_cols => grid_cols,
            p_crossover => p_crossover,
            p_mutation => p_mutation,
            p_translation => p_translation,
            neighborhood => neighborhood,
        );
        if self.max_translation.is_some() {
            cfg.max_translation = self.max_translation;
        }
        Ok(cfg)
    }
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        CliError::Core(stripmask_core::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    toml::from_str(&text).map_err(|e| CliError::ConfigFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
