//! Synthetic benchmark sweeps.
//!
//! Every (dataset, seed, method) triple is one row of `report.csv`. Rows run
//! in parallel but each owns its random streams, so the report depends only
//! on the configuration. Wall-clock seconds are the one exception and can be
//! switched off with `record_seconds = false`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use stripmask_core::adapter::{write_atomic, write_ground_truth_json, write_mask_json, write_series_csv};
use stripmask_core::baselines::{self, BaselineConfig};
use stripmask_core::metrics::{self, MetricsConfig};
use stripmask_core::synth::{make_instance_sized, STANDARD_SIZE};
use stripmask_core::{
    optimizer, DatasetKind, FitnessEvaluator, Instance, Mask, MaskRef, OptimizerConfig,
    PerturbationSpec, StripMask,
};

use crate::error::{CliError, CliResult};
use crate::options::read_toml;
use crate::workers::{build_pool, resolve_workers};

pub const REPORT_HEADER: [&str; 9] = [
    "method", "dataset", "seed", "aup", "aur", "dm", "em", "delta_p", "seconds",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cgs,
    Fo,
    Fp,
    Rise,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Cgs => "cgs",
            Method::Fo => "fo",
            Method::Fp => "fp",
            Method::Rise => "rise",
        }
    }
}

fn default_size() -> usize {
    STANDARD_SIZE
}

fn default_top_fraction() -> f64 {
    0.10
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub kinds: Vec<DatasetKind>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Relative paths are taken from the config file's directory.
    pub output_dir: PathBuf,
    #[serde(default = "default_size")]
    pub d_features: usize,
    #[serde(default = "default_size")]
    pub t_steps: usize,
    /// Share of points kept when scoring a baseline map by perturbation error.
    #[serde(default = "default_top_fraction")]
    pub top_fraction: f64,
    /// Take strip count and length range from the dataset kind instead of
    /// the `[optimizer]` table.
    #[serde(default = "yes")]
    pub per_kind_strips: bool,
    #[serde(default = "yes")]
    pub record_seconds: bool,
    /// Also write each instance's series and ground truth under `data/`.
    #[serde(default)]
    pub write_instances: bool,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

impl BenchConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut cfg: BenchConfig = read_toml(path)?;
        if cfg.output_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.kinds.is_empty() {
            return Err(CliError::config("kinds is empty"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds is empty"));
        }
        if self.methods.is_empty() {
            return Err(CliError::config("methods is empty"));
        }
        for (name, list) in [
            ("kinds", self.kinds.iter().map(|k| k.name()).collect::<Vec<_>>()),
            ("methods", self.methods.iter().map(|m| m.name()).collect()),
        ] {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(CliError::config(format!("{name} lists {:?} twice", w[0])));
            }
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::config("seeds contain duplicates"));
        }
        if self.d_features == 0 || self.t_steps == 0 {
            return Err(CliError::config("d_features and t_steps must be positive"));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(CliError::config(format!(
                "top_fraction {} not in (0, 1]",
                self.top_fraction
            )));
        }
        if self.workers == Some(0) {
            return Err(CliError::config("workers must be positive"));
        }
        self.perturbation.validate()?;
        self.metrics.validate()?;
        if self.methods.iter().any(|m| *m != Method::Cgs) {
            self.baselines.validate()?;
        }
        for kind in &self.kinds {
            self.optimizer_for(*kind, 0).validate(self.t_steps)?;
        }
        Ok(())
    }

    pub fn optimizer_for(&self, kind: DatasetKind, seed: u64) -> OptimizerConfig {
        let mut cfg = self.optimizer.clone();
        if self.per_kind_strips {
            let (count, lo, hi) = kind.strip_settings();
            cfg = cfg.with_strips(count, lo, hi);
        }
        cfg.seed = cfg.seed.wrapping_add(seed);
        cfg
    }

    fn baselines_for(&self, seed: u64) -> BaselineConfig {
        BaselineConfig {
            seed: self.baselines.seed.wrapping_add(seed),
            ..self.baselines.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowMetrics {
    pub aup: f64,
    pub aur: f64,
    pub dm: usize,
    pub em: f64,
    pub delta_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub method: Method,
    pub kind: DatasetKind,
    pub seed: u64,
    pub outcome: Result<RowMetrics, String>,
    pub seconds: Option<f64>,
}

enum Saliency {
    Strips(StripMask),
    Dense(Mask),
}

impl Saliency {
    fn as_ref(&self) -> MaskRef<'_, f64> {
        match self {
            Saliency::Strips(m) => MaskRef::from(m),
            Saliency::Dense(m) => MaskRef::from(m),
        }
    }
}

struct Finished {
    metrics: RowMetrics,
    saliency: Saliency,
}

fn run_method(cfg: &BenchConfig, inst: &Instance, method: Method) -> stripmask_core::Result<Finished> {
    let spec = &cfg.perturbation;
    let evaluator = FitnessEvaluator::new(&inst.model, &inst.x, *spec)?;
    let (saliency, dense, delta_p) = match method {
        Method::Cgs => {
            let ocfg = cfg.optimizer_for(inst.kind, inst.seed);
            ocfg.validate(inst.x.t_steps())?;
            let result = optimizer::run_with(&evaluator, &ocfg)?;
            let dense: Mask = result.best_mask.to_dense();
            (Saliency::Strips(result.best_mask), dense, result.best_fitness)
        }
        _ => {
            let bcfg = cfg.baselines_for(inst.seed);
            let map = match method {
                Method::Fo => baselines::feature_occlusion(&inst.model, &inst.x, spec)?,
                Method::Fp => baselines::feature_permutation(&inst.model, &inst.x, &bcfg)?,
                _ => baselines::rise(&inst.model, &inst.x, &bcfg, spec)?,
            };
            let top = metrics::top_fraction(&map, cfg.top_fraction)?;
            let delta_p = evaluator.evaluate(&top)?;
            (Saliency::Dense(map.clone()), map, delta_p)
        }
    };
    let (aup, aur) = metrics::aup_aur(&dense, &inst.gt, &cfg.metrics)?;
    Ok(Finished {
        metrics: RowMetrics {
            aup,
            aur,
            dm: metrics::discreteness(&dense, &cfg.metrics),
            em: metrics::entropy(&dense),
            delta_p,
        },
        saliency,
    })
}

fn mask_path(out: &Path, method: Method, kind: DatasetKind, seed: u64) -> PathBuf {
    out.join("masks")
        .join(format!("{}_{}_{}.json", method.name(), kind.name(), seed))
}

fn run_row(cfg: &BenchConfig, kind: DatasetKind, seed: u64, method: Method) -> CliResult<Row> {
    let started = Instant::now();
    let outcome = make_instance_sized::<f64>(kind, cfg.d_features, cfg.t_steps, seed)
        .and_then(|inst| run_method(cfg, &inst, method));
    let seconds = cfg.record_seconds.then(|| started.elapsed().as_secs_f64());
    let outcome = match outcome {
        Ok(done) => {
            write_mask_json(done.saliency.as_ref(), &mask_path(&cfg.output_dir, method, kind, seed))?;
            Ok(done.metrics)
        }
        Err(e) => Err(e.to_string()),
    };
    Ok(Row {
        method,
        kind,
        seed,
        outcome,
        seconds,
    })
}

/// Result of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<Row>,
    pub output_dir: PathBuf,
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Runs the sweep and writes `report.csv`, `summary.csv`, `errors.csv` and
/// one mask JSON per successful row.
pub fn run_bench(cfg: &BenchConfig, workers_flag: Option<usize>) -> CliResult<BenchReport> {
    cfg.validate()?;
    let workers = resolve_workers(workers_flag, cfg.workers)?;
    let out = &cfg.output_dir;
    let mkdir = |p: &Path| {
        fs::create_dir_all(p).map_err(|source| {
            CliError::Core(stripmask_core::Error::Io {
                path: p.to_path_buf(),
                source,
            })
        })
    };
    mkdir(&out.join("masks"))?;

    if cfg.write_instances {
        mkdir(&out.join("data"))?;
        for &kind in &cfg.kinds {
            for &seed in &cfg.seeds {
                let inst: Instance = make_instance_sized(kind, cfg.d_features, cfg.t_steps, seed)?;
                let stem = format!("{}_{}", kind.name(), seed);
                write_series_csv(&inst.x, &out.join("data").join(format!("{stem}.csv")))?;
                write_ground_truth_json(&inst.gt, &out.join("data").join(format!("{stem}_gt.json")))?;
            }
        }
    }

    let jobs: Vec<(DatasetKind, u64, Method)> = cfg
        .kinds
        .iter()
        .flat_map(|&k| {
            cfg.seeds
                .iter()
                .flat_map(move |&s| cfg.methods.iter().map(move |&m| (k, s, m)))
        })
        .collect();
    let pool = build_pool(workers)?;
    let rows: Vec<Row> = pool.install(|| {
        jobs.par_iter()
            .map(|&(k, s, m)| run_row(cfg, k, s, m))
            .collect::<CliResult<_>>()
    })?;

    write_atomic(&out.join("report.csv"), report_csv(&rows).as_bytes())?;
    write_atomic(&out.join("summary.csv"), summary_csv(cfg, &rows).as_bytes())?;
    write_atomic(&out.join("errors.csv"), errors_csv(&rows).as_bytes())?;
    Ok(BenchReport {
        rows,
        output_dir: out.clone(),
    })
}

fn csv_bytes(records: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn report_csv(rows: &[Row]) -> String {
    let header = REPORT_HEADER.iter().map(|s| s.to_string()).collect();
    let body = rows.iter().map(|r| {
        let mut rec = vec![r.method.name().to_string(), r.kind.name().to_string(), r.seed.to_string()];
        match &r.outcome {
            Ok(m) => rec.extend([num(m.aup), num(m.aur), m.dm.to_string(), num(m.em), num(m.delta_p)]),
            Err(_) => rec.extend(std::iter::repeat_n(String::new(), 5)),
        }
        rec.push(r.seconds.map(num).unwrap_or_default());
        rec
    });
    csv_bytes(std::iter::once(header).chain(body))
}

pub fn errors_csv(rows: &[Row]) -> String {
    let header = ["method", "dataset", "seed", "error"].map(String::from).to_vec();
    let body = rows.iter().filter_map(|r| {
        r.outcome.as_ref().err().map(|e| {
            vec![r.method.name().to_string(), r.kind.name().to_string(), r.seed.to_string(), e.clone()]
        })
    });
    csv_bytes(std::iter::once(header).chain(body))
}

/// Mean and sample standard deviation; the deviation is undefined for fewer
/// than two values.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some(var.sqrt()))
}

pub fn summary_csv(cfg: &BenchConfig, rows: &[Row]) -> String {
    let columns = ["aup", "aur", "dm", "em", "delta_p", "seconds"];
    let mut header = vec!["method".to_string(), "dataset".into(), "runs".into(), "failed".into()];
    for c in columns {
        header.push(format!("{c}_mean"));
        header.push(format!("{c}_std"));
    }
    let mut records = vec![header];
    for &method in &cfg.methods {
        for &kind in &cfg.kinds {
            let group: Vec<&Row> = rows.iter().filter(|r| r.method == method && r.kind == kind).collect();
            let ok: Vec<&RowMetrics> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let mut rec = vec![
                method.name().to_string(),
                kind.name().to_string(),
                group.len().to_string(),
                (group.len() - ok.len()).to_string(),
            ];
            let seconds: Vec<f64> = group.iter().filter_map(|r| r.seconds).collect();
            let series: [Vec<f64>; 6] = [
                ok.iter().map(|m| m.aup).collect(),
                ok.iter().map(|m| m.aur).collect(),
                ok.iter().map(|m| m.dm as f64).collect(),
                ok.iter().map(|m| m.em).collect(),
                ok.iter().map(|m| m.delta_p).collect(),
                seconds,
            ];
            for values in series {
                let (mean, std) = mean_std(&values);
                rec.push(mean.map(num).unwrap_or_default());
                rec.push(std.map(num).unwrap_or_default());
            }
            records.push(rec);
        }
    }
    csv_bytes(records)
}

/// One-line human summary per (method, dataset).
pub fn render_summary(cfg: &BenchConfig, report: &BenchReport) -> String {
    let mut out = String::new();
    for &method in &cfg.methods {
        for &kind in &cfg.kinds {
            let ok: Vec<&RowMetrics> = report
                .rows
                .iter()
                .filter(|r| r.method == method && r.kind == kind)
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let fmt = |vals: Vec<f64>| match mean_std(&vals) {
                (Some(m), Some(s)) => format!("{m:.3}±{s:.3}"),
                (Some(m), None) => format!("{m:.3}"),
                _ => "-".into(),
            };
            let _ = writeln!(
                out,
                "{:<5} {:<13} runs={:<3} aup={} aur={} dm={} em={}",
                method.name(),
                kind.name(),
                ok.len(),
                fmt(ok.iter().map(|m| m.aup).collect()),
                fmt(ok.iter().map(|m| m.aur).collect()),
                fmt(ok.iter().map(|m| m.dm as f64).collect()),
                fmt(ok.iter().map(|m| m.em).collect()),
            );
        }
    }
    out
}
