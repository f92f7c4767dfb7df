//! M-MBTL: greedy source selection as sequential K-medians.
//!
//! Under the Mountain structure the greedy objective reduces to choosing the
//! next centroid that minimizes the mean distance from every target to its
//! nearest centroid. Each round runs a Lloyd-style refinement (nearest
//! centroid assignment, then a per-dimension median re-center) from `M`
//! starting points with the previous centroids held fixed, and keeps the best.
//!
//! Centroids are medians of grid coordinates, so they always sit on a grid
//! task and are represented by task index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::ObservedHistory;
use crate::error::{invalid, Error, Result};
use crate::grid::{DistanceWeights, TaskGrid};
use crate::orchestrate::Selector;
use crate::rng::SeededRng;

pub const DEFAULT_SLOPE: f64 = 0.01;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

/// Losses closer than this are ties, broken by the lowest candidate index.
pub const LOSS_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmbtlConfig {
    /// Per-dimension L1 slopes; `None` means 0.01 in every dimension.
    pub weights: Option<DistanceWeights>,
    /// Number of starting points M; `None` means every task.
    pub num_samples: Option<usize>,
    pub max_iterations: usize,
    pub seed: u64,
    /// Reuse cached candidate results across rounds when they stay valid.
    pub fast_update: bool,
}

impl Default for MmbtlConfig {
    fn default() -> Self {
        Self {
            weights: None,
            num_samples: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            fast_update: true,
        }
    }
}

impl MmbtlConfig {
    pub fn resolved_weights(&self, grid: &TaskGrid) -> Result<DistanceWeights> {
        match &self.weights {
            Some(w) if w.len() != grid.ndim() => Err(invalid(format!(
                "{} distance weights for a {}-dimensional grid",
                w.len(),
                grid.ndim()
            ))),
            Some(w) => Ok(w.clone()),
            None => DistanceWeights::uniform(grid.ndim(), DEFAULT_SLOPE),
        }
    }

    pub fn resolved_samples(&self, n: usize) -> Result<usize> {
        match self.num_samples {
            Some(m) if m == 0 || m > n => {
                Err(invalid(format!("number of samples {m} must be in 1..={n}")))
            }
            Some(m) => Ok(m),
            None => Ok(n),
        }
    }
}

/// Grid geometry shared by every clustering routine.
#[derive(Debug, Clone)]
pub struct ClusterSpace {
    n: usize,
    d: usize,
    dims: Vec<usize>,
    /// Integer grid coordinates, row-major `N x D`.
    idx: Vec<usize>,
    coords: Vec<f64>,
    weights: DistanceWeights,
}

impl ClusterSpace {
    pub fn new(grid: &TaskGrid, weights: DistanceWeights) -> Result<Self> {
        if weights.len() != grid.ndim() {
            return Err(invalid("distance weights do not match grid dimension"));
        }
        let coords = grid.coord_table();
        Ok(Self {
            n: grid.len(),
            d: grid.ndim(),
            dims: grid.dims().to_vec(),
            idx: coords.iter().map(|&c| c as usize).collect(),
            coords,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.weights.distance(
            &self.coords[a * self.d..(a + 1) * self.d],
            &self.coords[b * self.d..(b + 1) * self.d],
        )
    }

    /// Task at the per-dimension lower median of the tasks in `members`.
    fn median_of(&self, members: &[usize]) -> usize {
        let m = members.len();
        let rank = (m - 1) / 2;
        let mut task = 0;
        for k in 0..self.d {
            let mut hist = vec![0usize; self.dims[k]];
            for &t in members {
                hist[self.idx[t * self.d + k]] += 1;
            }
            let mut seen = 0;
            let mut level = 0;
            for (l, &c) in hist.iter().enumerate() {
                seen += c;
                if seen > rank {
                    level = l;
                    break;
                }
            }
            task = task * self.dims[k] + level;
        }
        task
    }

    /// Per-target distance to the nearest of `centroids`; infinite when empty.
    pub fn nearest(&self, centroids: &[usize]) -> Vec<f64> {
        (0..self.n)
            .map(|t| {
                centroids
                    .iter()
                    .map(|&c| self.dist(c, t))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// Mean over targets of the distance to the nearest centroid.
pub fn clustering_loss(
    centroids: &[usize],
    grid: &TaskGrid,
    weights: &DistanceWeights,
) -> Result<f64> {
    if centroids.is_empty() {
        return Err(invalid("clustering loss needs at least one centroid"));
    }
    for &c in centroids {
        grid.check_task(c)?;
    }
    let space = ClusterSpace::new(grid, weights.clone())?;
    Ok(space.nearest(centroids).iter().sum::<f64>() / space.n as f64)
}

/// Outcome of refining one starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub centroid: usize,
    /// Total loss with the refined centroid added to the fixed ones.
    pub loss: f64,
    pub iterations: usize,
    /// Targets the moving centroid claimed at any iteration.
    pub claimed: Vec<bool>,
}

/// Reference refinement: every iteration recomputes the distance from every
/// target to every centroid.
///
/// A target is assigned to its nearest centroid; equidistant targets go to the
/// earliest fixed centroid, so the moving centroid only claims targets it is
/// strictly closest to.
pub fn update(
    initial: usize,
    fixed: &[usize],
    space: &ClusterSpace,
    max_iterations: usize,
) -> Refinement {
    let n = space.n;
    let mut x = initial;
    let mut claimed = vec![false; n];
    let mut iterations = 0;
    let mut members = Vec::with_capacity(n);
    while iterations < max_iterations.max(1) {
        iterations += 1;
        members.clear();
        for t in 0..n {
            let mut best = f64::INFINITY;
            for &c in fixed {
                best = best.min(space.dist(c, t));
            }
            if space.dist(x, t) < best {
                members.push(t);
                claimed[t] = true;
            }
        }
        if members.is_empty() {
            break;
        }
        let next = space.median_of(&members);
        if next == x {
            break;
        }
        x = next;
    }
    let mut total = 0.0;
    for t in 0..n {
        let mut best = space.dist(x, t);
        for &c in fixed {
            best = best.min(space.dist(c, t));
        }
        total += best;
    }
    Refinement {
        centroid: x,
        loss: total / n as f64,
        iterations,
        claimed,
    }
}

/// Refinement against precomputed nearest-fixed distances: only the moving
/// centroid's distances are evaluated. Identical results to [`update`].
pub fn fast_update(
    initial: usize,
    nearest_fixed: &[f64],
    space: &ClusterSpace,
    max_iterations: usize,
) -> Refinement {
    let n = space.n;
    let mut x = initial;
    let mut claimed = vec![false; n];
    let mut iterations = 0;
    let mut members = Vec::with_capacity(n);
    let mut own = vec![0.0; n];
    while iterations < max_iterations.max(1) {
        iterations += 1;
        members.clear();
        for t in 0..n {
            own[t] = space.dist(x, t);
            if own[t] < nearest_fixed[t] {
                members.push(t);
                claimed[t] = true;
            }
        }
        if members.is_empty() {
            break;
        }
        let next = space.median_of(&members);
        if next == x {
            break;
        }
        x = next;
        for t in 0..n {
            own[t] = space.dist(x, t);
        }
    }
    let total: f64 = (0..n).map(|t| own[t].min(nearest_fixed[t])).sum();
    Refinement {
        centroid: x,
        loss: total / n as f64,
        iterations,
        claimed,
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    initial: usize,
    cached: Option<Refinement>,
}

/// Sequential clustering state carried across rounds.
#[derive(Debug, Clone)]
pub struct ClusterState {
    space: ClusterSpace,
    max_iterations: usize,
    fast: bool,
    fixed: Vec<usize>,
    nearest_fixed: Vec<f64>,
    candidates: Vec<Candidate>,
    last_delta: f64,
    last_loss: Option<f64>,
    cache_hits: usize,
}

impl ClusterState {
    pub fn new(grid: &TaskGrid, config: &MmbtlConfig) -> Result<Self> {
        let space = ClusterSpace::new(grid, config.resolved_weights(grid)?)?;
        let n = space.n;
        let m = config.resolved_samples(n)?;
        let initials: Vec<usize> = if m == n {
            (0..n).collect()
        } else {
            let mut rng = SeededRng::new(config.seed);
            rand::seq::index::sample(&mut rng, n, m).into_vec()
        };
        Ok(Self {
            nearest_fixed: vec![f64::INFINITY; n],
            candidates: initials
                .into_iter()
                .map(|initial| Candidate {
                    initial,
                    cached: None,
                })
                .collect(),
            space,
            max_iterations: config.max_iterations,
            fast: config.fast_update,
            fixed: Vec::new(),
            last_delta: 0.0,
            last_loss: None,
            cache_hits: 0,
        })
    }

    pub fn space(&self) -> &ClusterSpace {
        &self.space
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    /// Starting points, in candidate order.
    pub fn initials(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.initial).collect()
    }

    /// Loss reduction caused by the centroids added in the last sync.
    pub fn last_delta(&self) -> f64 {
        self.last_delta
    }

    /// Clustering loss of the most recent pick.
    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    /// Candidates answered from cache so far.
    pub fn cache_hits(&self) -> usize {
        self.cache_hits
    }

    fn fixed_loss(&self) -> f64 {
        self.nearest_fixed.iter().sum::<f64>() / self.space.n as f64
    }

    /// Brings the fixed centroid set in line with `selected`.
    ///
    /// Added centroids steal the targets they are strictly closer to. A cached
    /// candidate whose refinement never claimed a stolen target would follow
    /// the same trajectory again, so its loss just drops by the fixed-loss
    /// reduction; any other cached result is discarded.
    pub fn sync(&mut self, selected: &[usize]) -> Result<()> {
        for &t in selected {
            if t >= self.space.n {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    bound: self.space.n,
                });
            }
        }
        if selected.len() < self.fixed.len() || selected[..self.fixed.len()] != self.fixed[..] {
            self.fixed.clear();
            self.nearest_fixed = vec![f64::INFINITY; self.space.n];
            self.candidates.iter_mut().for_each(|c| c.cached = None);
            self.last_delta = 0.0;
        }
        let added = &selected[self.fixed.len()..];
        if added.is_empty() {
            return Ok(());
        }
        let had_fixed = !self.fixed.is_empty();
        let before = self.fixed_loss();
        let mut stolen = vec![false; self.space.n];
        for t in 0..self.space.n {
            for &c in added {
                let dist = self.space.dist(c, t);
                if dist < self.nearest_fixed[t] {
                    self.nearest_fixed[t] = dist;
                    stolen[t] = true;
                }
            }
        }
        self.fixed.extend_from_slice(added);
        let delta = if had_fixed { before - self.fixed_loss() } else { 0.0 };
        self.last_delta = delta;
        for cand in &mut self.candidates {
            let keep = had_fixed
                && self.fast
                && cand
                    .cached
                    .as_ref()
                    .is_some_and(|r| !r.claimed.iter().zip(&stolen).any(|(a, b)| *a && *b));
            match (&mut cand.cached, keep) {
                (Some(r), true) => r.loss -= delta,
                (cached, _) => *cached = None,
            }
        }
        Ok(())
    }

    /// Refined result for candidate `m` under the current fixed set.
    pub fn get_performance(&self, m: usize) -> (Refinement, bool) {
        let cand = &self.candidates[m];
        if let Some(r) = &cand.cached {
            return (r.clone(), true);
        }
        let r = if self.fast {
            fast_update(cand.initial, &self.nearest_fixed, &self.space, self.max_iterations)
        } else {
            update(cand.initial, &self.fixed, &self.space, self.max_iterations)
        };
        (r, false)
    }

    /// Picks the next centroid given the already selected tasks.
    pub fn select_next(&mut self, selected: &[usize]) -> Result<usize> {
        self.sync(selected)?;
        let n = self.space.n;
        if self.fixed.len() >= n {
            return Err(invalid("every task is already selected"));
        }
        let results: Vec<(Refinement, bool)> = (0..self.candidates.len())
            .into_par_iter()
            .map(|m| self.get_performance(m))
            .collect();
        let mut taken = vec![false; n];
        self.fixed.iter().for_each(|&t| taken[t] = true);
        let mut best: Option<(usize, f64)> = None;
        for (r, _) in &results {
            if taken[r.centroid] {
                continue;
            }
            if best.is_none_or(|(_, l)| r.loss < l - LOSS_TIE_TOL) {
                best = Some((r.centroid, r.loss));
            }
        }
        for (cand, (r, hit)) in self.candidates.iter_mut().zip(results) {
            self.cache_hits += usize::from(hit);
            cand.cached = Some(r);
        }
        if let Some((task, loss)) = best {
            self.last_loss = Some(loss);
            return Ok(task);
        }
        // Every refined candidate landed on a selected task: brute force.
        let mut fallback: Option<(usize, f64)> = None;
        for t in (0..n).filter(|&t| !taken[t]) {
            let loss: f64 = (0..n)
                .map(|y| self.space.dist(t, y).min(self.nearest_fixed[y]))
                .sum::<f64>()
                / n as f64;
            if fallback.is_none_or(|(_, l)| loss < l - LOSS_TIE_TOL) {
                fallback = Some((t, loss));
            }
        }
        let (task, loss) = fallback.expect("an unselected task exists");
        self.last_loss = Some(loss);
        Ok(task)
    }
}

/// M-MBTL as a selector. Uses only the selected task list, never the rows.
#[derive(Debug, Clone)]
pub struct MmbtlSelector {
    config: MmbtlConfig,
    state: Option<ClusterState>,
}

impl MmbtlSelector {
    pub fn new(config: MmbtlConfig) -> Self {
        Self {
            config,
            state: None,
        }
    }

    pub fn state(&self) -> Option<&ClusterState> {
        self.state.as_ref()
    }
}

impl Selector for MmbtlSelector {
    fn name(&self) -> &str {
        "m"
    }

    fn select(&mut self, history: &ObservedHistory) -> Result<usize> {
        let grid = history.grid();
        let stale = self
            .state
            .as_ref()
            .is_none_or(|s| s.space.n != grid.len() || s.space.dims != grid.dims());
        if stale {
            self.state = Some(ClusterState::new(grid, &self.config)?);
        }
        self.state
            .as_mut()
            .expect("state initialized")
            .select_next(history.selected())
    }

    fn reset(&mut self) {
        self.state = None;
    }
}
