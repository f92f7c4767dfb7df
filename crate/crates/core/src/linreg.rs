//! Small dense ordinary least squares with an intercept.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues of the centered Gram matrix below this fraction of the largest
/// mark the design as rank-deficient.
pub const RANK_TOL: f64 = 1e-10;

const REFINE_PASSES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
}

/// Fits `y ~ intercept + X coef` where `x` is row-major with `p` columns.
///
/// Features and target are centered first, so the intercept never enters the
/// normal equations. Returns `None` for a rank-deficient design or when there
/// are fewer than `p + 1` observations.
pub fn ols(x: &[f64], p: usize, y: &[f64]) -> Option<OlsFit> {
    if y.len() < p + 1 {
        return None;
    }
    let (fit, rank) = solve(x, p, y)?;
    (rank == p).then_some(fit)
}

/// Minimum-norm least-squares solution; directions of the centered Gram
/// matrix with negligible eigenvalues get zero weight. Returns the fit and the
/// numerical rank, or `None` when there are no observations.
pub fn ols_min_norm(x: &[f64], p: usize, y: &[f64]) -> Option<(OlsFit, usize)> {
    solve(x, p, y)
}

fn solve(x: &[f64], p: usize, y: &[f64]) -> Option<(OlsFit, usize)> {
    let n = y.len();
    assert_eq!(x.len(), n * p, "design has wrong size");
    if n == 0 {
        return None;
    }
    let mut x_mean = vec![0.0; p];
    let mut y_mean = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        for k in 0..p {
            x_mean[k] += x[i * p + k];
        }
        y_mean += yi;
    }
    x_mean.iter_mut().for_each(|m| *m /= n as f64);
    y_mean /= n as f64;

    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut centered = vec![0.0; p];
    for (i, &yi) in y.iter().enumerate() {
        for k in 0..p {
            centered[k] = x[i * p + k] - x_mean[k];
        }
        let yc = yi - y_mean;
        for a in 0..p {
            rhs[a] += centered[a] * yc;
            for b in a..p {
                gram[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let mut rank = 0;
    let mut coef = vec![0.0; p];
    let mut ss = 0.0;
    if p == 0 {
        ss = y.iter().map(|yi| (yi - y_mean).powi(2)).sum();
    } else {
        let eig = SymmetricEigen::new(gram);
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<bool> = eig
            .eigenvalues
            .iter()
            .map(|&l| max > 0.0 && l > RANK_TOL * max)
            .collect();
        rank = keep.iter().filter(|&&k| k).count();
        let apply = |rhs: DVector<f64>| -> Vec<f64> {
            let proj = eig.eigenvectors.transpose() * rhs;
            let scaled = DVector::from_iterator(
                p,
                proj.iter()
                    .zip(eig.eigenvalues.iter())
                    .zip(&keep)
                    .map(|((b, &l), &k)| if k { b / l } else { 0.0 }),
            );
            (&eig.eigenvectors * scaled).iter().copied().collect()
        };
        coef = apply(rhs);
        // Normal equations square the condition number, and long sums leave
        // the means slightly off; refinement passes against the residual
        // recover both the slopes and the offset.
        for pass in 0..=REFINE_PASSES {
            let mut correction = DVector::<f64>::zeros(p);
            let mut shift = 0.0;
            ss = 0.0;
            for (i, &yi) in y.iter().enumerate() {
                let mut r = yi - y_mean;
                for k in 0..p {
                    centered[k] = x[i * p + k] - x_mean[k];
                    r -= coef[k] * centered[k];
                }
                ss += r * r;
                shift += r;
                for k in 0..p {
                    correction[k] += centered[k] * r;
                }
            }
            if pass == REFINE_PASSES {
                break;
            }
            for (c, d) in coef.iter_mut().zip(apply(correction)) {
                *c += d;
            }
            y_mean += shift / n as f64;
        }
    }
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    Some((
        OlsFit {
            coef,
            intercept,
            residual_norm: ss.sqrt(),
        },
        rank,
    ))
}
