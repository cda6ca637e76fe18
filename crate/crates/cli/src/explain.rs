//! `explain`: search for the strip mask of one input.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;

use stripmask_core::adapter::{
    read_series_csv, write_atomic, write_ground_truth_json, write_mask_json, write_series_csv,
    ExternalModelPool,
};
use stripmask_core::synth::make_instance;
use stripmask_core::{
    optimizer, BlackBoxModel, FitnessEvaluator, Instance, OptimizerConfig, Outcome, PerturbationSpec, Series,
};

use crate::error::{CliError, CliResult};
use crate::options::{parse_perturbation, ModelArgs, OptimizerArgs, SyntheticSpec};
use crate::workers::{build_pool, resolve_workers};

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    /// Input series CSV (with --model).
    #[arg(long, requires = "model", conflicts_with = "synthetic")]
    pub series: Option<PathBuf>,
    /// Built-in benchmark instance `kind:seed`; its white-box model is used.
    #[arg(long, conflicts_with = "model")]
    pub synthetic: Option<SyntheticSpec>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long, value_parser = parse_perturbation, default_value = "zero")]
    pub perturbation: PerturbationSpec,
    /// Output directory for mask.json and history.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainSummary {
    pub best_fitness: f64,
    pub evaluations: usize,
    pub seconds: f64,
    pub generations: usize,
}

impl std::fmt::Display for ExplainSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "best_delta={} evaluations={} generations={} seconds={:.3}",
            self.best_fitness, self.evaluations, self.generations, self.seconds
        )
    }
}

pub fn history_csv(history: &[f64]) -> String {
    let mut out = String::from("generation,best\n");
    for (g, v) in history.iter().enumerate() {
        out.push_str(&format!("{g},{v:?}\n"));
    }
    out
}

fn search<M: BlackBoxModel<f64> + ?Sized>(
    model: &M,
    x: &Series,
    cfg: &OptimizerConfig,
    spec: PerturbationSpec,
    check_determinism: bool,
) -> stripmask_core::Result<Outcome> {
    cfg.validate(x.t_steps())?;
    let evaluator = FitnessEvaluator::new(model, x, spec)?;
    if check_determinism {
        evaluator.verify_determinism()?;
    }
    optimizer::run_with(&evaluator, cfg)
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|source| {
        CliError::Core(stripmask_core::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

pub fn run_explain(args: &ExplainArgs) -> CliResult<ExplainSummary> {
    let workers = resolve_workers(args.workers, None)?;
    let pool = build_pool(workers)?;
    let started = Instant::now();

    let result = if let Some(syn) = args.synthetic {
        let inst: Instance = make_instance(syn.kind, syn.seed)?;
        let (count, lo, hi) = syn.kind.strip_settings();
        let base = OptimizerConfig::default().with_strips(count, lo, hi).with_seed(syn.seed);
        let cfg = args.optimizer.resolve(base)?;
        create_dir(&args.out)?;
        write_series_csv(&inst.x, &args.out.join("series.csv"))?;
        write_ground_truth_json(&inst.gt, &args.out.join("ground_truth.json"))?;
        pool.install(|| search(&inst.model, &inst.x, &cfg, args.perturbation, false))?
    } else {
        let command = args
            .model
            .command()?
            .ok_or_else(|| CliError::config("explain needs --synthetic kind:seed or --series with --model"))?;
        let series = args
            .series
            .as_ref()
            .ok_or_else(|| CliError::config("--model needs --series"))?;
        let x: Series = read_series_csv(series)?;
        let cfg = args.optimizer.resolve(OptimizerConfig::default())?;
        cfg.validate(x.t_steps())?;
        let model = ExternalModelPool::spawn(&command, args.model.task, args.model.adapter_options()?, workers)
            .map_err(stripmask_core::Error::from)?;
        create_dir(&args.out)?;
        pool.install(|| search(&model, &x, &cfg, args.perturbation, true))?
    };

    write_mask_json::<f64>(&result.best_mask, &args.out.join("mask.json"))?;
    write_atomic(&args.out.join("history.csv"), history_csv(&result.history).as_bytes())?;
    Ok(ExplainSummary {
        best_fitness: result.best_fitness,
        evaluations: result.evaluations,
        seconds: started.elapsed().as_secs_f64(),
        generations: result.history.len() - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_format() {
        assert_eq!(history_csv(&[1.0, 2.5]), "generation,best\n0,1.0\n1,2.5\n");
    }
}
