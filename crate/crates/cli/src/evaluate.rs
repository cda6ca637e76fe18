//! `evaluate`: metrics of an existing mask.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use stripmask_core::adapter::{read_ground_truth_json, read_mask_json, read_series_csv, write_atomic, ExternalModelPool};
use stripmask_core::metrics::{self, MetricsConfig};
use stripmask_core::{FitnessEvaluator, Mask, PerturbationSpec, Series};

use crate::error::{CliError, CliResult};
use crate::options::{parse_perturbation, ModelArgs};

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Mask JSON (strip or dense).
    #[arg(long)]
    pub mask: PathBuf,
    /// Input series CSV; required with --model.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Ground-truth JSON; enables AUP and AUR.
    #[arg(long = "ground-truth")]
    pub ground_truth: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = parse_perturbation, default_value = "zero")]
    pub perturbation: PerturbationSpec,
    /// Jump threshold for discreteness.
    #[arg(long, default_value_t = 0.10)]
    pub beta: f64,
    /// Also write the JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub d: usize,
    pub t: usize,
    pub dm: usize,
    pub em: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aur: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_p: Option<f64>,
}

pub fn run_evaluate(args: &EvaluateArgs) -> CliResult<Evaluation> {
    let cfg = MetricsConfig {
        discreteness_threshold: args.beta,
        ..MetricsConfig::default()
    };
    cfg.validate()?;
    let loaded = read_mask_json::<f64>(&args.mask)?;
    let mask: Mask = loaded.to_dense();
    let (d, t) = mask.shape();

    let series: Option<Series> = args.series.as_deref().map(read_series_csv).transpose()?;
    if let Some(x) = &series {
        if x.shape() != (d, t) {
            return Err(stripmask_core::Error::ShapeMismatch {
                expected: x.shape(),
                actual: (d, t),
            }
            .into());
        }
    }

    let (aup, aur) = match &args.ground_truth {
        Some(path) => {
            let gt = read_ground_truth_json(path, d, t)?;
            let (p, r) = metrics::aup_aur(&mask, &gt, &cfg)?;
            (Some(p), Some(r))
        }
        None => (None, None),
    };

    let delta_p = match args.model.command()? {
        Some(command) => {
            let x = series
                .as_ref()
                .ok_or_else(|| CliError::config("--model needs --series"))?;
            let model = ExternalModelPool::spawn(&command, args.model.task, args.model.adapter_options()?, 1)
                .map_err(stripmask_core::Error::from)?;
            let evaluator = FitnessEvaluator::new(&model, x, args.perturbation)?;
            Some(evaluator.evaluate(loaded.as_ref())?)
        }
        None => None,
    };

    let eval = Evaluation {
        d,
        t,
        dm: metrics::discreteness(&mask, &cfg),
        em: metrics::entropy(&mask),
        aup,
        aur,
        delta_p,
    };
    if let Some(out) = &args.out {
        write_atomic(out, format!("{}\n", to_json(&eval)).as_bytes())?;
    }
    Ok(eval)
}

pub fn to_json(eval: &Evaluation) -> String {
    serde_json::to_string(eval).expect("plain struct serializes")
}
