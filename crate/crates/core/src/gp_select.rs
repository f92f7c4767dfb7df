//! GP-MBTL: pick the source whose predicted performance, minus the predicted
//! transfer loss, most improves on what the trained policies already achieve.
//!
//! Source performance `J(x, x)` is modeled by a Gaussian process over grid
//! coordinates. The transfer loss from `x` to `y` is linear in the signed
//! difference features and its slopes are re-learned from every revealed row.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{diff_features, ObservedHistory};
use crate::error::{invalid, Result};
use crate::gp::{GpHyperparameters, GpModel};
use crate::grid::TaskGrid;
use crate::linreg::ols;
use crate::orchestrate::Selector;

pub const DEFAULT_BETA: f64 = 4.0;
pub const DEFAULT_GAP_SLOPE: f64 = 0.01;

/// What the acquisition compares a candidate's predicted transfer against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionMode {
    /// Best observed performance on each target.
    #[default]
    Observed,
    /// Best modeled performance `max μ(x') - gap(x', y)` over trained `x'`.
    Modeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpMbtlConfig {
    /// Exploration coefficient; the acquisition uses `sqrt(beta) * σ`.
    pub beta: f64,
    /// Slope of the L1 gap model used before any regression succeeds.
    pub initial_gap_slope: f64,
    pub gp: GpHyperparameters,
    pub acquisition: AcquisitionMode,
    /// Re-learn gap slopes from revealed rows each round.
    pub learn_slopes: bool,
}

impl Default for GpMbtlConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            initial_gap_slope: DEFAULT_GAP_SLOPE,
            gp: GpHyperparameters::default(),
            acquisition: AcquisitionMode::Observed,
            learn_slopes: true,
        }
    }
}

impl GpMbtlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta must be finite and nonnegative"));
        }
        if !(self.initial_gap_slope >= 0.0 && self.initial_gap_slope.is_finite()) {
            return Err(invalid("initial gap slope must be finite and nonnegative"));
        }
        self.gp.validate()
    }
}

/// Linear model of the performance lost by transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapModel {
    /// `D` negative-part slopes followed by `D` positive-part slopes.
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub learned: bool,
    pub initial_slope: f64,
    pub residual_norm: f64,
}

impl GapModel {
    pub fn initial(ndim: usize, slope: f64) -> Self {
        Self {
            theta: vec![0.0; 2 * ndim],
            intercept: 0.0,
            learned: false,
            initial_slope: slope,
            residual_norm: f64::NAN,
        }
    }

    pub fn learned(theta_left: &[f64], theta_right: &[f64]) -> Self {
        Self {
            theta: theta_left.iter().chain(theta_right).copied().collect(),
            intercept: 0.0,
            learned: true,
            initial_slope: DEFAULT_GAP_SLOPE,
            residual_norm: 0.0,
        }
    }

    pub fn ndim(&self) -> usize {
        self.theta.len() / 2
    }

    pub fn theta_left(&self) -> &[f64] {
        &self.theta[..self.ndim()]
    }

    pub fn theta_right(&self) -> &[f64] {
        &self.theta[self.ndim()..]
    }
}

/// Predicted loss when transferring from `x` to `y` (grid coordinates). Zero at
/// `y = x`; may be negative once slopes are learned.
pub fn estimated_gap(gap: &GapModel, x: &[f64], y: &[f64]) -> f64 {
    if !gap.learned {
        let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
        return gap.initial_slope * l1;
    }
    let d = x.len();
    let mut acc = 0.0;
    for k in 0..d {
        let v = x[k] - y[k];
        acc += gap.theta[k] * v.min(0.0) + gap.theta[d + k] * v.max(0.0);
    }
    -acc
}

/// Regresses every observed `J(x_κ, y_n)` on `diff(x_κ, y_n)` with an
/// intercept. A rank-deficient design keeps the initial L1 model.
pub fn learn_slopes(h: &ObservedHistory, initial_slope: f64) -> GapModel {
    let grid = h.grid();
    let d = grid.ndim();
    let p = 2 * d;
    let n = grid.len();
    let coords = grid.coord_table();
    let mut design = vec![0.0; h.len() * n * p];
    let mut target = Vec::with_capacity(h.len() * n);
    for (kappa, (&src, row)) in h.selected().iter().zip(h.rows()).enumerate() {
        let x = &coords[src * d..(src + 1) * d];
        for j in 0..n {
            let base = (kappa * n + j) * p;
            diff_features(x, &coords[j * d..(j + 1) * d], &mut design[base..base + p]);
        }
        target.extend_from_slice(row);
    }
    match ols(&design, p, &target) {
        Some(fit) => GapModel {
            theta: fit.coef,
            intercept: fit.intercept,
            learned: true,
            initial_slope,
            residual_norm: fit.residual_norm,
        },
        None => GapModel::initial(d, initial_slope),
    }
}

/// Mean over targets of the clipped predicted improvement of training `x`.
pub fn acquisition(
    x: &[f64],
    model: &GpModel,
    gap: &GapModel,
    best_so_far: &[f64],
    target_coords: &[f64],
    beta: f64,
) -> f64 {
    let (mu, sd) = model.posterior(x);
    acquisition_from(mu + beta.sqrt() * sd, x, gap, best_so_far, target_coords)
}

/// Acquisition given the optimistic source estimate `ucb = μ + sqrt(β) σ`.
pub fn acquisition_from(
    ucb: f64,
    x: &[f64],
    gap: &GapModel,
    best_so_far: &[f64],
    target_coords: &[f64],
) -> f64 {
    let d = x.len();
    let n = best_so_far.len();
    let mut total = 0.0;
    for j in 0..n {
        let y = &target_coords[j * d..(j + 1) * d];
        total += (ucb - estimated_gap(gap, x, y) - best_so_far[j]).max(0.0);
    }
    total / n as f64
}

/// Everything computed for one GP-MBTL decision.
#[derive(Debug, Clone)]
pub struct GpDecision {
    pub task: usize,
    pub gap: GapModel,
    /// Acquisition value per task; `None` for selected tasks.
    pub scores: Vec<Option<f64>>,
}

/// Next task: the grid median first, then the acquisition argmax over
/// unselected tasks (ties to the lowest index).
pub fn select_next(h: &ObservedHistory, config: &GpMbtlConfig) -> Result<GpDecision> {
    config.validate()?;
    let grid: &TaskGrid = h.grid();
    let n = grid.len();
    let d = grid.ndim();
    if h.len() >= n {
        return Err(invalid("every task is already selected"));
    }
    if h.is_empty() {
        return Ok(GpDecision {
            task: grid.median_task(),
            gap: GapModel::initial(d, config.initial_gap_slope),
            scores: vec![None; n],
        });
    }
    let coords = grid.coord_table();
    let at = |t: usize| coords[t * d..(t + 1) * d].to_vec();
    let model = GpModel::fit(
        h.selected().iter().map(|&t| at(t)).collect(),
        h.diagonal(),
        config.gp,
    )?;
    let gap = if config.learn_slopes {
        learn_slopes(h, config.initial_gap_slope)
    } else {
        GapModel::initial(d, config.initial_gap_slope)
    };
    let best = match config.acquisition {
        AcquisitionMode::Observed => h.best_so_far().expect("history is non-empty"),
        AcquisitionMode::Modeled => {
            let means: Vec<(usize, f64)> = h
                .selected()
                .iter()
                .map(|&t| (t, model.posterior(&at(t)).0))
                .collect();
            (0..n)
                .map(|j| {
                    means
                        .iter()
                        .map(|&(t, mu)| mu - estimated_gap(&gap, &at(t), &at(j)))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        }
    };
    let root_beta = config.beta.sqrt();
    let scores: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|t| {
            if h.is_selected(t) {
                return None;
            }
            let x = &coords[t * d..(t + 1) * d];
            let (mu, sd) = model.posterior(x);
            Some(acquisition_from(mu + root_beta * sd, x, &gap, &best, &coords))
        })
        .collect();
    let mut task = None;
    let mut top = f64::NEG_INFINITY;
    for (t, s) in scores.iter().enumerate() {
        if let Some(v) = *s {
            if v > top {
                top = v;
                task = Some(t);
            }
        }
    }
    Ok(GpDecision {
        task: task.expect("an unselected task exists"),
        gap,
        scores,
    })
}

#[derive(Debug, Clone)]
pub struct GpMbtlSelector {
    config: GpMbtlConfig,
    last_gap: Option<GapModel>,
}

impl GpMbtlSelector {
    pub fn new(config: GpMbtlConfig) -> Self {
        Self {
            config,
            last_gap: None,
        }
    }

    pub fn last_gap(&self) -> Option<&GapModel> {
        self.last_gap.as_ref()
    }
}

impl Selector for GpMbtlSelector {
    fn name(&self) -> &str {
        "gp"
    }

    fn select(&mut self, history: &ObservedHistory) -> Result<usize> {
        let decision = select_next(history, &self.config)?;
        self.last_gap = Some(decision.gap);
        Ok(decision.task)
    }

    fn reset(&mut self) {
        self.last_gap = None;
    }
}
