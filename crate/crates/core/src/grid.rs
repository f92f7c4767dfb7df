//! Discretized context space and the weighted L1 metric.
//!
//! Tasks are indexed row-major with the last context dimension varying
//! fastest. Distances and regression features are computed in grid-index
//! coordinates (the 0-based position of each context value in its list),
//! which keeps slope hyperparameters on the same scale for any benchmark.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGrid {
    dims: Vec<usize>,
    contexts: Vec<Vec<f64>>,
}

impl TaskGrid {
    /// Builds a grid from one strictly increasing context list per dimension.
    pub fn new(contexts: Vec<Vec<f64>>) -> Result<Self> {
        if contexts.is_empty() {
            return Err(invalid("task grid needs at least one dimension"));
        }
        for (d, values) in contexts.iter().enumerate() {
            if values.is_empty() {
                return Err(invalid(format!("context list {d} is empty")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("context list {d} has non-finite values")));
            }
            if values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(format!("context list {d} is not strictly increasing")));
            }
        }
        let dims = contexts.iter().map(Vec::len).collect();
        Ok(Self { dims, contexts })
    }

    /// Grid whose dimension `d` has contexts `1, 2, ..., dims[d]`.
    pub fn integer(dims: &[usize]) -> Result<Self> {
        Self::new(
            dims.iter()
                .map(|&n| (1..=n).map(|v| v as f64).collect())
                .collect(),
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn contexts(&self) -> &[Vec<f64>] {
        &self.contexts
    }

    /// Number of context dimensions D.
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of tasks N.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task_index(&self, multi_index: &[usize]) -> Result<usize> {
        if multi_index.len() != self.ndim() {
            return Err(invalid(format!(
                "multi-index has {} entries, grid has {} dimensions",
                multi_index.len(),
                self.ndim()
            )));
        }
        let mut flat = 0;
        for (&i, &n) in multi_index.iter().zip(&self.dims) {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, bound: n });
            }
            flat = flat * n + i;
        }
        Ok(flat)
    }

    pub fn task_multi_index(&self, task: usize) -> Result<Vec<usize>> {
        self.check_task(task)?;
        let mut out = vec![0; self.ndim()];
        let mut rest = task;
        for d in (0..self.ndim()).rev() {
            out[d] = rest % self.dims[d];
            rest /= self.dims[d];
        }
        Ok(out)
    }

    /// Grid-index coordinates of `task` as reals.
    pub fn grid_coords(&self, task: usize) -> Result<Vec<f64>> {
        Ok(self
            .task_multi_index(task)?
            .into_iter()
            .map(|i| i as f64)
            .collect())
    }

    /// Raw context vector of `task`.
    pub fn context(&self, task: usize) -> Result<Vec<f64>> {
        Ok(self
            .task_multi_index(task)?
            .into_iter()
            .enumerate()
            .map(|(d, i)| self.contexts[d][i])
            .collect())
    }

    /// Row-major `N x D` table of grid-index coordinates.
    pub fn coord_table(&self) -> Vec<f64> {
        let d = self.ndim();
        let mut table = vec![0.0; self.len() * d];
        for task in 0..self.len() {
            let mut rest = task;
            for k in (0..d).rev() {
                table[task * d + k] = (rest % self.dims[k]) as f64;
                rest /= self.dims[k];
            }
        }
        table
    }

    /// Row-major `N x D` table of raw context values.
    pub fn context_table(&self) -> Vec<f64> {
        let d = self.ndim();
        let coords = self.coord_table();
        coords
            .iter()
            .enumerate()
            .map(|(i, &c)| self.contexts[i % d][c as usize])
            .collect()
    }

    /// Task at the per-dimension lower-median index.
    pub fn median_task(&self) -> usize {
        let mid: Vec<usize> = self.dims.iter().map(|&n| (n - 1) / 2).collect();
        self.task_index(&mid).expect("median index is in range")
    }

    /// Task whose grid-index coordinates equal `coords` after rounding.
    pub fn task_at_coords(&self, coords: &[f64]) -> Result<usize> {
        let idx: Vec<usize> = coords
            .iter()
            .map(|&c| {
                if c < -0.5 {
                    usize::MAX
                } else {
                    c.round() as usize
                }
            })
            .collect();
        self.task_index(&idx)
    }

    pub(crate) fn check_task(&self, task: usize) -> Result<()> {
        if task >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: task,
                bound: self.len(),
            });
        }
        Ok(())
    }
}

/// Per-dimension slopes of the weighted L1 metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceWeights {
    w: Vec<f64>,
}

impl DistanceWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(invalid("distance weights are empty"));
        }
        if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(invalid("distance weights must be finite and nonnegative"));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(invalid("at least one distance weight must be positive"));
        }
        Ok(Self { w })
    }

    pub fn uniform(ndim: usize, slope: f64) -> Result<Self> {
        Self::new(vec![slope; ndim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Unchecked distance for hot loops; lengths must match.
    #[inline]
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.w.len());
        debug_assert_eq!(b.len(), self.w.len());
        let mut acc = 0.0;
        for k in 0..self.w.len() {
            acc += self.w[k] * (a[k] - b[k]).abs();
        }
        acc
    }

    /// Scales every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.w.iter().map(|x| x * factor).collect())
    }
}

/// Weighted L1 distance `sum_d w_d |a_d - b_d|`.
pub fn l1_distance(a: &[f64], b: &[f64], w: &DistanceWeights) -> Result<f64> {
    if a.len() != b.len() || a.len() != w.len() {
        return Err(invalid(format!(
            "length mismatch: a={}, b={}, w={}",
            a.len(),
            b.len(),
            w.len()
        )));
    }
    Ok(w.distance(a, b))
}
