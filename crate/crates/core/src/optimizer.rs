//! Cellular genetic search over strip masks.
//!
//! A toroidal `rows × cols` grid holds one strip mask per cell. Each
//! generation every cell draws `r ~ U[0, 1)` and produces one offspring:
//!
//! * `r ≤ p_crossover`: fitness-proportional mate choice among neighbors at
//!   least as fit as the cell, then strip-wise crossover (copy if none).
//! * next `p_mutation`: one strip replaced by a freshly sampled strip.
//! * next `p_translation`: one strip shifted along the time axis.
//! * otherwise the cell is copied.
//!
//! Offspring of generation `g` are computed from a snapshot of `g` and swapped
//! in together. Every cell draws from its own ChaCha stream keyed by
//! `(seed, generation, cell)`, so results do not depend on thread count.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::{FitnessEvaluator, MaskRef};
use crate::model::BlackBoxModel;
use crate::perturbation::PerturbationSpec;
use crate::scalar::Scalar;
use crate::series::TimeSeries;
use crate::strip::{Strip, StripMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// The 8 surrounding cells.
    #[default]
    Moore,
    /// The 4 orthogonally adjacent cells.
    VonNeumann,
}

impl fmt::Display for Neighborhood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Neighborhood::Moore => f.write_str("moore"),
            Neighborhood::VonNeumann => f.write_str("von_neumann"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub generations: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub p_translation: f64,
    pub neighborhood: Neighborhood,
    pub strip_count: usize,
    pub strip_len_min: usize,
    pub strip_len_max: usize,
    /// Largest shift of the translation operator; `max(1, T / 10)` if unset.
    pub max_translation: Option<usize>,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            generations: 500,
            grid_rows: 10,
            grid_cols: 10,
            p_crossover: 0.75,
            p_mutation: 0.1,
            p_translation: 0.1,
            neighborhood: Neighborhood::Moore,
            strip_count: 14,
            strip_len_min: 6,
            strip_len_max: 10,
            max_translation: None,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_strips(mut self, count: usize, len_min: usize, len_max: usize) -> Self {
        self.strip_count = count;
        self.strip_len_min = len_min;
        self.strip_len_max = len_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_generations(mut self, generations: usize) -> Self {
        self.generations = generations;
        self
    }

    pub fn translation_limit(&self, t_steps: usize) -> usize {
        self.max_translation.unwrap_or((t_steps / 10).max(1))
    }

    /// Checks the configuration against an input with `t_steps` time steps.
    pub fn validate(&self, t_steps: usize) -> Result<()> {
        let probs = [
            ("p_crossover", self.p_crossover),
            ("p_mutation", self.p_mutation),
            ("p_translation", self.p_translation),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        let total = self.p_crossover + self.p_mutation + self.p_translation;
        if total > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "operator probabilities sum to {total}, more than 1"
            )));
        }
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if self.strip_count == 0 {
            return Err(Error::Config("strip_count must be positive".into()));
        }
        if self.strip_len_min == 0 || self.strip_len_min > self.strip_len_max {
            return Err(Error::Config(format!(
                "strip length range [{}, {}] is empty",
                self.strip_len_min, self.strip_len_max
            )));
        }
        if self.strip_len_max > t_steps {
            return Err(Error::Config(format!(
                "strip_len_max {} exceeds the {t_steps} available time steps",
                self.strip_len_max
            )));
        }
        if self.max_translation == Some(0) {
            return Err(Error::Config("max_translation must be positive".into()));
        }
        Ok(())
    }
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell<S> {
    pub mask: StripMask,
    pub fitness: S,
}

/// Toroidal grid of evaluated masks.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid<S> {
    rows: usize,
    cols: usize,
    cells: Vec<Cell<S>>,
    generation: usize,
}

impl<S: Scalar> CellGrid<S> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn cells(&self) -> &[Cell<S>] {
        &self.cells
    }

    pub fn cell(&self, i: usize, j: usize) -> &Cell<S> {
        &self.cells[i * self.cols + j]
    }

    /// Index of the fittest cell, lowest index on ties.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (k, c) in self.cells.iter().enumerate().skip(1) {
            if c.fitness > self.cells[best].fitness {
                best = k;
            }
        }
        best
    }

    pub fn best(&self) -> &Cell<S> {
        &self.cells[self.best_index()]
    }
}

/// Grid coordinates of the neighbors of `(i, j)` on a torus, without
/// duplicates and never including `(i, j)` itself.
pub fn neighbors(
    rows: usize,
    cols: usize,
    i: usize,
    j: usize,
    scheme: Neighborhood,
) -> Vec<(usize, usize)> {
    const MOORE: [(isize, isize); 8] = [
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, -1),
        (0, 1),
        (1, -1),
        (1, 0),
        (1, 1),
    ];
    const VON_NEUMANN: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
    let offsets: &[(isize, isize)] = match scheme {
        Neighborhood::Moore => &MOORE,
        Neighborhood::VonNeumann => &VON_NEUMANN,
    };
    let wrap = |v: usize, dv: isize, n: usize| (v as isize + dv).rem_euclid(n as isize) as usize;
    let mut out = Vec::with_capacity(offsets.len());
    for &(di, dj) in offsets {
        let cell = (wrap(i, di, rows), wrap(j, dj, cols));
        if cell != (i, j) && !out.contains(&cell) {
            out.push(cell);
        }
    }
    out
}

/// Fitness-proportional choice among candidates at least as fit as `own`.
///
/// Returns the position in `candidates` of the chosen mate, or `None` when
/// every candidate is strictly worse. If all eligible candidates have zero
/// fitness the choice is uniform.
pub fn select_mate<S: Scalar, R: Rng + ?Sized>(
    own: S,
    candidates: &[S],
    rng: &mut R,
) -> Option<usize> {
    let eligible: Vec<usize> = (0..candidates.len())
        .filter(|&k| candidates[k] >= own)
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let total: f64 = eligible.iter().map(|&k| candidates[k].as_f64()).sum();
    if total <= 0.0 || !total.is_finite() {
        return Some(eligible[rng.random_range(0..eligible.len())]);
    }
    let mut target = rng.random::<f64>() * total;
    for &k in &eligible {
        let w = candidates[k].as_f64();
        if target < w {
            return Some(k);
        }
        target -= w;
    }
    // rounding left a sliver past the last weight
    eligible.iter().rev().copied().find(|&k| candidates[k].as_f64() > 0.0)
}

/// Strip-wise crossover: strip `k` of the child comes from `a` with
/// probability `fa / (fa + fb)` and from `b` otherwise.
pub fn crossover<S: Scalar, R: Rng + ?Sized>(
    a: &StripMask,
    b: &StripMask,
    fa: S,
    fb: S,
    rng: &mut R,
) -> Result<StripMask> {
    if a.strip_count() != b.strip_count() {
        return Err(Error::Dimension(format!(
            "cannot cross masks with {} and {} strips",
            a.strip_count(),
            b.strip_count()
        )));
    }
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            actual: b.shape(),
        });
    }
    let (fa, fb) = (fa.as_f64(), fb.as_f64());
    let p_a = if fa + fb > 0.0 { fa / (fa + fb) } else { 0.5 };
    let strips = a
        .strips()
        .iter()
        .zip(b.strips())
        .map(|(&sa, &sb)| if rng.random::<f64>() < p_a { sa } else { sb })
        .collect();
    StripMask::new(strips, a.d_features(), a.t_steps())
}

/// Samples a strip uniformly: feature, start and length independently, with
/// the length truncated at the horizon.
pub fn sample_strip<R: Rng + ?Sized>(
    rng: &mut R,
    d_features: usize,
    t_steps: usize,
    len_min: usize,
    len_max: usize,
) -> Strip {
    let feature = rng.random_range(0..d_features);
    let start = rng.random_range(0..t_steps);
    let length = rng.random_range(len_min..=len_max);
    Strip::clamped(feature, start, length, t_steps)
}

pub fn random_mask<R: Rng + ?Sized>(
    cfg: &OptimizerConfig,
    d_features: usize,
    t_steps: usize,
    rng: &mut R,
) -> Result<StripMask> {
    let strips = (0..cfg.strip_count)
        .map(|_| sample_strip(rng, d_features, t_steps, cfg.strip_len_min, cfg.strip_len_max))
        .collect();
    StripMask::new(strips, d_features, t_steps)
}

/// Replaces one uniformly chosen strip by a fresh random strip.
pub fn mutate<R: Rng + ?Sized>(
    mask: &StripMask,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<StripMask> {
    let k = rng.random_range(0..mask.strip_count());
    let fresh = sample_strip(
        rng,
        mask.d_features(),
        mask.t_steps(),
        cfg.strip_len_min,
        cfg.strip_len_max,
    );
    mask.with_strip(k, fresh)
}

/// Shifts one uniformly chosen strip by `±U[1, max_translation]` steps,
/// clamped so the strip stays inside the horizon.
pub fn translate<R: Rng + ?Sized>(
    mask: &StripMask,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<StripMask> {
    let k = rng.random_range(0..mask.strip_count());
    let shift = rng.random_range(1..=cfg.translation_limit(mask.t_steps()));
    let forward = rng.random_bool(0.5);
    let s = mask.strips()[k];
    mask.with_strip(k, shift_strip(s, shift, forward, mask.t_steps()))
}

pub(crate) fn shift_strip(s: Strip, shift: usize, forward: bool, t_steps: usize) -> Strip {
    let last_start = t_steps - s.length;
    let start = if forward {
        (s.start + shift).min(last_start)
    } else {
        s.start.saturating_sub(shift)
    };
    Strip { start, ..s }
}

const PHASE_INIT: u64 = 0;
const PHASE_EVOLVE: u64 = 1;

/// Independent random stream for one cell in one generation.
pub fn cell_rng(seed: u64, phase: u64, generation: usize, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((phase << 62) | ((generation as u64 & 0x3fff_ffff) << 32) | cell as u64);
    rng
}

/// Samples and evaluates the initial grid.
pub fn init_population<S, M>(
    cfg: &OptimizerConfig,
    evaluator: &FitnessEvaluator<'_, S, M>,
) -> Result<CellGrid<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    let (d_features, t_steps) = evaluator.input().shape();
    cfg.validate(t_steps)?;
    let n_cells = cfg.grid_rows * cfg.grid_cols;
    let masks: Vec<StripMask> = (0..n_cells)
        .into_par_iter()
        .map(|k| {
            let mut rng = cell_rng(cfg.seed, PHASE_INIT, 0, k);
            random_mask(cfg, d_features, t_steps, &mut rng)
        })
        .collect::<Result<_>>()?;
    let refs: Vec<MaskRef<'_, S>> = masks.iter().map(MaskRef::from).collect();
    let fitness = evaluator.evaluate_batch(&refs)?;
    Ok(CellGrid {
        rows: cfg.grid_rows,
        cols: cfg.grid_cols,
        cells: masks
            .into_iter()
            .zip(fitness)
            .map(|(mask, fitness)| Cell { mask, fitness })
            .collect(),
        generation: 0,
    })
}

fn offspring<S: Scalar>(grid: &CellGrid<S>, cfg: &OptimizerConfig, k: usize) -> Result<StripMask> {
    let mut rng = cell_rng(cfg.seed, PHASE_EVOLVE, grid.generation, k);
    let cell = &grid.cells[k];
    let r = rng.random::<f64>();
    let (pc, pm, pt) = (cfg.p_crossover, cfg.p_mutation, cfg.p_translation);
    if r <= pc {
        let nbrs = neighbors(grid.rows, grid.cols, k / grid.cols, k % grid.cols, cfg.neighborhood);
        let fits: Vec<S> = nbrs.iter().map(|&(i, j)| grid.cell(i, j).fitness).collect();
        match select_mate(cell.fitness, &fits, &mut rng) {
            Some(pick) => {
                let mate = grid.cell(nbrs[pick].0, nbrs[pick].1);
                crossover(&cell.mask, &mate.mask, cell.fitness, mate.fitness, &mut rng)
            }
            None => Ok(cell.mask.clone()),
        }
    } else if r <= pc + pm {
        mutate(&cell.mask, cfg, &mut rng)
    } else if r <= pc + pm + pt {
        translate(&cell.mask, cfg, &mut rng)
    } else {
        Ok(cell.mask.clone())
    }
}

/// Produces and evaluates generation `g + 1` from generation `g`.
pub fn step<S, M>(
    grid: &CellGrid<S>,
    cfg: &OptimizerConfig,
    evaluator: &FitnessEvaluator<'_, S, M>,
) -> Result<CellGrid<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    let masks: Vec<StripMask> = (0..grid.cells.len())
        .into_par_iter()
        .map(|k| offspring(grid, cfg, k))
        .collect::<Result<_>>()?;
    let refs: Vec<MaskRef<'_, S>> = masks.iter().map(MaskRef::from).collect();
    let fitness = evaluator.evaluate_batch(&refs)?;
    Ok(CellGrid {
        rows: grid.rows,
        cols: grid.cols,
        cells: masks
            .into_iter()
            .zip(fitness)
            .map(|(mask, fitness)| Cell { mask, fitness })
            .collect(),
        generation: grid.generation + 1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<S> {
    /// Best mask seen in any generation.
    pub best_mask: StripMask,
    pub best_fitness: S,
    /// Best-so-far fitness after initialization and after each generation.
    pub history: Vec<S>,
    /// Model calls, including the reference prediction.
    pub evaluations: usize,
}

/// Runs the search with a fresh evaluator.
pub fn run<S, M>(
    model: &M,
    x: &TimeSeries<S>,
    cfg: &OptimizerConfig,
    spec: &PerturbationSpec,
) -> Result<RunResult<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    cfg.validate(x.t_steps())?;
    let evaluator = FitnessEvaluator::new(model, x, *spec)?;
    run_with(&evaluator, cfg)
}

/// Runs the search using an existing evaluator (and its cache).
pub fn run_with<S, M>(
    evaluator: &FitnessEvaluator<'_, S, M>,
    cfg: &OptimizerConfig,
) -> Result<RunResult<S>>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    let mut history: Vec<S> = Vec::with_capacity(cfg.generations + 1);
    let fail = |source: Error, history: &[S]| Error::Run {
        source: Box::new(source),
        history: history.iter().map(|v| v.as_f64()).collect(),
    };

    let mut grid = init_population(cfg, evaluator).map_err(|e| fail(e, &history))?;
    let mut best = grid.best().clone();
    history.push(best.fitness);

    for _ in 0..cfg.generations {
        grid = step(&grid, cfg, evaluator).map_err(|e| fail(e, &history))?;
        let champion = grid.best();
        if champion.fitness > best.fitness {
            best = champion.clone();
        }
        history.push(best.fitness);
    }

    Ok(RunResult {
        best_mask: best.mask,
        best_fitness: best.fitness,
        history,
        evaluations: evaluator.evaluations(),
    })
}
