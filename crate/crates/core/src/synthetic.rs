//! Synthetic transfer matrices `J = f(x) + g(y) + h(x, y) + C + noise`.
//!
//! `f` and `g` are linear in the raw context vector; `h` is piecewise linear
//! in the signed difference `x - y`:
//! `h = -(h_right . [x - y]_+ + h_left . [x - y]_-)`.
//! A distance-metric `h` has `h_left = -h_right`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::TaskGrid;
use crate::matrix::TransferMatrix;
use crate::rng::SeededRng;

pub const DEFAULT_OFFSET: f64 = 500.0;
pub const DEFAULT_SIGMA: f64 = 5.0;
pub const DEFAULT_TRIALS: usize = 3;

/// Context levels per dimension used by the 3D presets.
pub const LEVELS_3D: usize = 8;
/// Default levels for the 5D presets; 8 levels would need a 32768 x 32768 matrix.
pub const LEVELS_5D: usize = 4;
/// Default levels for the 7D presets; 8 levels would need a 2^21 x 2^21 matrix.
pub const LEVELS_7D: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub grid: TaskGrid,
    /// `None` is the constant-zero policy quality.
    pub f_weights: Option<Vec<f64>>,
    /// `None` is the constant-zero task difficulty.
    pub g_weights: Option<Vec<f64>>,
    pub h_left: Vec<f64>,
    pub h_right: Vec<f64>,
    pub offset: f64,
    pub noise_sigma: f64,
    pub trials: usize,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Distance-metric configuration `h = -slope * |x - y|` on an integer grid.
    pub fn mountain(dims: &[usize], slope: f64) -> Result<Self> {
        let d = dims.len();
        Ok(Self {
            grid: TaskGrid::integer(dims)?,
            f_weights: None,
            g_weights: None,
            h_left: vec![-slope; d],
            h_right: vec![slope; d],
            offset: DEFAULT_OFFSET,
            noise_sigma: 0.0,
            trials: 1,
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.grid.ndim();
        let check = |name: &str, v: &[f64]| -> Result<()> {
            if v.len() != d {
                return Err(invalid(format!(
                    "{name} has length {}, grid has {d} dimensions",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        if let Some(f) = &self.f_weights {
            check("f_weights", f)?;
        }
        if let Some(g) = &self.g_weights {
            check("g_weights", g)?;
        }
        check("h_left", &self.h_left)?;
        check("h_right", &self.h_right)?;
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(invalid("noise sigma must be finite and nonnegative"));
        }
        if !self.offset.is_finite() {
            return Err(invalid("offset must be finite"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        Ok(())
    }

    /// True when `h` is a weighted L1 distance with positive weights and `f` is constant.
    pub fn is_mountain(&self) -> bool {
        self.f_weights.is_none()
            && self
                .h_left
                .iter()
                .zip(&self.h_right)
                .all(|(l, r)| *r > 0.0 && *l == -*r)
    }

    /// Noise-free entry for raw contexts `x` (source) and `y` (target).
    pub fn mean_entry(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut v = self.offset;
        if let Some(f) = &self.f_weights {
            v += dot(f, x);
        }
        if let Some(g) = &self.g_weights {
            v += dot(g, y);
        }
        for k in 0..x.len() {
            let diff = x[k] - y[k];
            v -= self.h_right[k] * diff.max(0.0) + self.h_left[k] * diff.min(0.0);
        }
        v
    }

    /// Noise-free `N x N` matrix, row-major.
    pub fn mean_matrix(&self) -> Vec<f64> {
        let n = self.grid.len();
        let d = self.grid.ndim();
        let ctx = self.grid.context_table();
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let x = &ctx[i * d..(i + 1) * d];
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.mean_entry(x, &ctx[j * d..(j + 1) * d]);
            }
        });
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Draws every trial. Trial `w` adds noise from sub-stream `w` of the seed, in
/// row-major order, so parallel and sequential generation agree.
pub fn generate(config: &SyntheticConfig) -> Result<TransferMatrix> {
    config.validate()?;
    let base = config.mean_matrix();
    let sigma = config.noise_sigma;
    let trials: Vec<Vec<f64>> = (0..config.trials)
        .into_par_iter()
        .map(|w| {
            let mut t = base.clone();
            if sigma > 0.0 {
                let mut rng = SeededRng::stream(config.seed, w as u64);
                for e in t.iter_mut() {
                    *e += sigma * rng.standard_normal();
                }
            }
            t
        })
        .collect();
    TransferMatrix::new("synthetic", config.grid.clone(), trials, false)
}

fn parse_sigma(tok: &str) -> Option<f64> {
    let v: f64 = tok.strip_prefix("sigma")?.parse().ok()?;
    (v.is_finite() && v >= 0.0).then_some(v)
}

fn parse_levels(tok: &str) -> Option<usize> {
    let v: usize = tok.strip_prefix("levels")?.parse().ok()?;
    (v >= 1).then_some(v)
}

/// Resolves a preset identifier into a configuration.
///
/// Identifiers:
/// - `3d/{const-f|lin-f}/{none-g|lin-g}/{l1|nondist}`
/// - `5d/{const-f|lin-f}/{none-g|lin-g}/{l1|nondist1|nondist2}`, with the
///   short forms `5d/l1`, `5d/nondist1`, `5d/nondist2` meaning constant f and g
/// - `7d/{none-g|lin-g}/{l1|nondist}`
///
/// Any identifier may end with `/sigma<value>` (default 5) and
/// `/levels<n>` to override the number of contexts per dimension.
pub fn preset(name: &str) -> Result<SyntheticConfig> {
    let unknown = || invalid(format!("unknown preset '{name}'"));
    let mut parts: Vec<&str> = name.split('/').collect();
    let mut sigma = DEFAULT_SIGMA;
    let mut levels = None;
    while let Some(last) = parts.last() {
        if let Some(s) = parse_sigma(last) {
            sigma = s;
        } else if let Some(l) = parse_levels(last) {
            levels = Some(l);
        } else {
            break;
        }
        parts.pop();
    }
    let (dim, f_lin, g_lin, h_left): (usize, bool, bool, Vec<f64>) = match parts.as_slice() {
        ["3d", f, g, h] => {
            let h_left = match *h {
                "l1" => vec![-3.0; 3],
                "nondist" => vec![1.0, 1.0, -3.0],
                _ => return Err(unknown()),
            };
            (3, parse_f(f).ok_or_else(unknown)?, parse_g(g).ok_or_else(unknown)?, h_left)
        }
        ["5d", rest @ ..] => {
            let (f, g, h) = match rest {
                [h] => ("const-f", "none-g", *h),
                [f, g, h] => (*f, *g, *h),
                _ => return Err(unknown()),
            };
            let h_left = match h {
                "l1" => vec![-3.0; 5],
                "nondist1" => vec![1.0, 1.0, 1.0, -3.0, -3.0],
                "nondist2" => vec![1.0, 1.0, 1.0, 1.0, -3.0],
                _ => return Err(unknown()),
            };
            (5, parse_f(f).ok_or_else(unknown)?, parse_g(g).ok_or_else(unknown)?, h_left)
        }
        ["7d", g, h] => {
            let h_left = match *h {
                "l1" => vec![-3.0; 7],
                "nondist" => vec![1.0, 1.0, 1.0, 1.0, 1.0, -3.0, -3.0],
                _ => return Err(unknown()),
            };
            (7, false, parse_g(g).ok_or_else(unknown)?, h_left)
        }
        _ => return Err(unknown()),
    };
    let (f_w, g_w, default_levels) = match dim {
        3 => (4.0, 3.0, LEVELS_3D),
        5 => (2.0, 2.0, LEVELS_5D),
        _ => (0.0, 2.0, LEVELS_7D),
    };
    let levels = levels.unwrap_or(default_levels);
    Ok(SyntheticConfig {
        grid: TaskGrid::integer(&vec![levels; dim])?,
        f_weights: f_lin.then(|| vec![f_w; dim]),
        g_weights: g_lin.then(|| vec![g_w; dim]),
        h_left,
        h_right: vec![3.0; dim],
        offset: DEFAULT_OFFSET,
        noise_sigma: sigma,
        trials: DEFAULT_TRIALS,
        seed: 0,
    })
}

fn parse_f(tok: &str) -> Option<bool> {
    match tok {
        "const-f" => Some(false),
        "lin-f" => Some(true),
        _ => None,
    }
}

fn parse_g(tok: &str) -> Option<bool> {
    match tok {
        "none-g" => Some(false),
        "lin-g" => Some(true),
        _ => None,
    }
}

/// Canonical preset identifiers without noise or level suffixes.
pub fn preset_names() -> Vec<String> {
    let mut out = Vec::new();
    for f in ["const-f", "lin-f"] {
        for g in ["none-g", "lin-g"] {
            for h in ["l1", "nondist"] {
                out.push(format!("3d/{f}/{g}/{h}"));
            }
        }
    }
    for f in ["const-f", "lin-f"] {
        for g in ["none-g", "lin-g"] {
            for h in ["l1", "nondist1", "nondist2"] {
                out.push(format!("5d/{f}/{g}/{h}"));
            }
        }
    }
    for g in ["none-g", "lin-g"] {
        for h in ["l1", "nondist"] {
            out.push(format!("7d/{g}/{h}"));
        }
    }
    out
}
