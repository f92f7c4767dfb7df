//! Transfer-matrix storage, normalization and the JSON file format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::TaskGrid;

pub const SCHEMA_VERSION: u32 = 1;

const NORMALIZED_TOL: f64 = 1e-12;

/// `W` dense `N x N` trials over one task grid. Row = source, column = target.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    name: String,
    grid: TaskGrid,
    trials: Vec<Vec<f64>>,
    normalized: bool,
}

impl TransferMatrix {
    /// Each trial is a flat row-major `N * N` vector.
    pub fn new(
        name: impl Into<String>,
        grid: TaskGrid,
        trials: Vec<Vec<f64>>,
        normalized: bool,
    ) -> Result<Self> {
        let n = grid.len();
        if trials.is_empty() {
            return Err(invalid("transfer matrix needs at least one trial"));
        }
        for (w, t) in trials.iter().enumerate() {
            if t.len() != n * n {
                return Err(Error::Format(format!(
                    "trial {w} has {} entries, expected {n}x{n}",
                    t.len()
                )));
            }
            if let Some(pos) = t.iter().position(|v| !v.is_finite()) {
                return Err(Error::Format(format!(
                    "trial {w} entry ({}, {}) is not finite",
                    pos / n,
                    pos % n
                )));
            }
        }
        let m = Self {
            name: name.into(),
            grid,
            trials,
            normalized,
        };
        if normalized {
            let (lo, hi) = m.value_range();
            // Resampled or sliced normalized data need not reach both ends.
            if lo < -NORMALIZED_TOL || hi > 1.0 + NORMALIZED_TOL {
                return Err(Error::Format(format!(
                    "matrix flagged normalized but spans [{lo}, {hi}], outside [0, 1]"
                )));
            }
        }
        Ok(m)
    }

    /// Builds from nested `trials[w][i][j]`.
    pub fn from_nested(
        name: impl Into<String>,
        grid: TaskGrid,
        trials: Vec<Vec<Vec<f64>>>,
        normalized: bool,
    ) -> Result<Self> {
        let n = grid.len();
        let mut flat = Vec::with_capacity(trials.len());
        for (w, t) in trials.into_iter().enumerate() {
            if t.len() != n {
                return Err(Error::Format(format!(
                    "trial {w} has {} rows, expected {n}",
                    t.len()
                )));
            }
            let mut buf = Vec::with_capacity(n * n);
            for (i, row) in t.into_iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Format(format!(
                        "trial {w} row {i} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                buf.extend(row);
            }
            flat.push(buf);
        }
        Self::new(name, grid, flat, normalized)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn grid(&self) -> &TaskGrid {
        &self.grid
    }

    /// Number of tasks N.
    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn num_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trials(&self) -> &[Vec<f64>] {
        &self.trials
    }

    /// Flat row-major view of trial `w`.
    pub fn trial(&self, w: usize) -> &[f64] {
        &self.trials[w]
    }

    pub fn row(&self, w: usize, source: usize) -> &[f64] {
        let n = self.size();
        &self.trials[w][source * n..(source + 1) * n]
    }

    pub fn get(&self, w: usize, source: usize, target: usize) -> f64 {
        self.trials[w][source * self.size() + target]
    }

    /// Global (min, max) over every trial.
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in &self.trials {
            for &v in t {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Entrywise mean over trials.
    pub fn mean_trial(&self) -> Vec<f64> {
        let n2 = self.size() * self.size();
        let mut out = vec![0.0; n2];
        for t in &self.trials {
            for (o, v) in out.iter_mut().zip(t) {
                *o += v;
            }
        }
        let w = self.trials.len() as f64;
        out.iter_mut().for_each(|o| *o /= w);
        out
    }

    /// New matrix holding only trial `w`.
    pub fn single_trial(&self, w: usize) -> Result<Self> {
        if w >= self.num_trials() {
            return Err(Error::IndexOutOfRange {
                index: w,
                bound: self.num_trials(),
            });
        }
        Ok(Self {
            name: self.name.clone(),
            grid: self.grid.clone(),
            trials: vec![self.trials[w].clone()],
            normalized: false,
        })
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Self::from_reader(BufReader::new(file)).map_err(|e| match e {
            Error::Json(j) => Error::Format(format!("{}: {j}", path.display())),
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let file: MatrixFile = serde_json::from_reader(reader)?;
        file.into_matrix()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.to_writer(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn to_writer(&self, writer: impl Write) -> Result<()> {
        serde_json::to_writer(writer, &MatrixFile::from_matrix(self))?;
        Ok(())
    }
}

/// Rescales every entry by the global min and max over all trials.
pub fn min_max_normalize(matrix: &TransferMatrix) -> Result<TransferMatrix> {
    let (lo, hi) = matrix.value_range();
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::Degenerate(format!(
            "constant transfer matrix (all entries {lo})"
        )));
    }
    let trials = matrix
        .trials
        .iter()
        .map(|t| t.iter().map(|&v| (v - lo) / span).collect())
        .collect();
    Ok(TransferMatrix {
        name: matrix.name.clone(),
        grid: matrix.grid.clone(),
        trials,
        normalized: true,
    })
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    schema_version: u32,
    name: String,
    dims: Vec<usize>,
    contexts: Vec<Vec<f64>>,
    normalized: bool,
    trials: Vec<Vec<Vec<f64>>>,
}

impl MatrixFile {
    fn from_matrix(m: &TransferMatrix) -> Self {
        let n = m.size();
        Self {
            schema_version: SCHEMA_VERSION,
            name: m.name.clone(),
            dims: m.grid.dims().to_vec(),
            contexts: m.grid.contexts().to_vec(),
            normalized: m.normalized,
            trials: m
                .trials
                .iter()
                .map(|t| t.chunks(n).map(<[f64]>::to_vec).collect())
                .collect(),
        }
    }

    fn into_matrix(self) -> Result<TransferMatrix> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.dims.len() != self.contexts.len() {
            return Err(Error::Format(format!(
                "dims has {} entries but contexts has {}",
                self.dims.len(),
                self.contexts.len()
            )));
        }
        for (d, (&size, ctx)) in self.dims.iter().zip(&self.contexts).enumerate() {
            if size != ctx.len() {
                return Err(Error::Format(format!(
                    "dims[{d}] = {size} but contexts[{d}] has {} values",
                    ctx.len()
                )));
            }
        }
        let grid = TaskGrid::new(self.contexts).map_err(|e| Error::Format(e.to_string()))?;
        TransferMatrix::from_nested(self.name, grid, self.trials, self.normalized)
    }
}
