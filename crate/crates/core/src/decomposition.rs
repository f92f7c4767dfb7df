//! Additive split of one transfer-matrix trial into
//! `J(x, y) = C + f(x) + g(y) + h(x, y)`.
//!
//! `C` is the grand mean, `g` the centered column means (task difficulty),
//! `f` the diagonal minus `g` and `C` (policy quality) and `h` the remainder
//! (task dissimilarity), which vanishes on the diagonal. `f` is not centered.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub c: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Row-major `N x N`.
    pub h: Vec<f64>,
}

impl Decomposition {
    pub fn size(&self) -> usize {
        self.f.len()
    }

    pub fn h_at(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.size() + j]
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.f[i] + self.g[j] + self.h[i * n + j] + self.c;
            }
        }
        out
    }

    /// Writes rows `component,i,j,value`; `j` is empty for `f` and `i` for `g`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["component", "i", "j", "value"])?;
        w.write_record(["C", "", "", &self.c.to_string()])?;
        for (i, v) in self.f.iter().enumerate() {
            w.write_record(["f", &i.to_string(), "", &v.to_string()])?;
        }
        for (j, v) in self.g.iter().enumerate() {
            w.write_record(["g", "", &j.to_string(), &v.to_string()])?;
        }
        let n = self.size();
        for (k, v) in self.h.iter().enumerate() {
            w.write_record(["h", &(k / n).to_string(), &(k % n).to_string(), &v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Decomposes a flat row-major square matrix.
pub fn decompose(matrix: &[f64]) -> Result<Decomposition> {
    let n = (matrix.len() as f64).sqrt().round() as usize;
    if n == 0 || n * n != matrix.len() {
        return Err(invalid(format!(
            "decomposition needs a non-empty square matrix, got {} entries",
            matrix.len()
        )));
    }
    let mut col_mean = vec![0.0; n];
    for row in matrix.chunks(n) {
        for (m, v) in col_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    col_mean.iter_mut().for_each(|m| *m /= n as f64);
    let c = col_mean.iter().sum::<f64>() / n as f64;
    let g: Vec<f64> = col_mean.iter().map(|m| m - c).collect();
    let f: Vec<f64> = (0..n).map(|i| matrix[i * n + i] - g[i] - c).collect();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = if i == j {
                0.0
            } else {
                matrix[i * n + j] - f[i] - g[j] - c
            };
        }
    }
    Ok(Decomposition { c, f, g, h })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSummary {
    pub std_f: f64,
    pub std_g: f64,
    pub std_h: f64,
    /// Standard deviation of each row of `h`.
    pub row_std_h: Vec<f64>,
    /// `marginal_f[d][l]`: mean of `f` over tasks whose dimension `d` is at level `l`.
    pub marginal_f: Vec<Vec<f64>>,
    pub marginal_g: Vec<Vec<f64>>,
    /// Mean of `h(x, y)` grouped by the signed grid offset `x_d - y_d`, from
    /// `-(dims[d]-1)` to `dims[d]-1`.
    pub marginal_h: Vec<Vec<f64>>,
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Summary statistics for plotting; `dims` is the task-grid shape.
pub fn component_summary(d: &Decomposition, dims: &[usize]) -> Result<ComponentSummary> {
    let n = d.size();
    if dims.iter().product::<usize>() != n {
        return Err(invalid("grid shape does not match decomposition size"));
    }
    let multi = |mut t: usize| {
        let mut m = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            m[k] = t % dims[k];
            t /= dims[k];
        }
        m
    };
    let idx: Vec<Vec<usize>> = (0..n).map(multi).collect();
    let marginal = |v: &[f64]| -> Vec<Vec<f64>> {
        dims.iter()
            .enumerate()
            .map(|(k, &size)| {
                let mut sum = vec![0.0; size];
                let mut cnt = vec![0usize; size];
                for (t, m) in idx.iter().enumerate() {
                    sum[m[k]] += v[t];
                    cnt[m[k]] += 1;
                }
                sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect()
            })
            .collect()
    };
    let mut marginal_h = Vec::with_capacity(dims.len());
    for (k, &size) in dims.iter().enumerate() {
        let mut sum = vec![0.0; 2 * size - 1];
        let mut cnt = vec![0usize; 2 * size - 1];
        for i in 0..n {
            for j in 0..n {
                let off = idx[i][k] + size - 1 - idx[j][k];
                sum[off] += d.h[i * n + j];
                cnt[off] += 1;
            }
        }
        marginal_h.push(sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect());
    }
    Ok(ComponentSummary {
        std_f: std_dev(&d.f),
        std_g: std_dev(&d.g),
        std_h: std_dev(&d.h),
        row_std_h: d.h.chunks(n).map(std_dev).collect(),
        marginal_f: marginal(&d.f),
        marginal_g: marginal(&d.g),
        marginal_h,
    })
}
