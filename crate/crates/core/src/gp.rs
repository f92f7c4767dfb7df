//! Exact Gaussian-process regression with a squared-exponential kernel and a
//! constant prior mean equal to the mean of the training targets.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const INITIAL_JITTER: f64 = 1e-8;
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
}

impl Default for GpHyperparameters {
    fn default() -> Self {
        Self {
            signal_variance: 1.0,
            length_scale: 1.0,
            noise_variance: 1e-4,
        }
    }
}

impl GpHyperparameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(invalid("GP signal variance must be positive"));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(invalid("GP length scale must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(invalid("GP noise variance must be nonnegative"));
        }
        Ok(())
    }

    #[inline]
    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        self.signal_variance * (-sq / (2.0 * self.length_scale * self.length_scale)).exp()
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    hyper: GpHyperparameters,
    prior_mean: f64,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Factorizes the Gram matrix, escalating the diagonal jitter tenfold from
    /// 1e-8 up to 1e-4 until it is positive definite.
    pub fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, hyper: GpHyperparameters) -> Result<Self> {
        hyper.validate()?;
        let n = inputs.len();
        if n == 0 || n != targets.len() {
            return Err(invalid(format!(
                "GP needs matching non-empty inputs and targets ({n} vs {})",
                targets.len()
            )));
        }
        let d = inputs[0].len();
        if inputs.iter().any(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
            return Err(invalid("GP inputs must be finite and of equal dimension"));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(invalid("GP targets must be finite"));
        }
        let prior_mean = targets.iter().sum::<f64>() / n as f64;
        let gram = DMatrix::from_fn(n, n, |i, j| hyper.kernel(&inputs[i], &inputs[j]));
        let mut jitter = INITIAL_JITTER;
        let chol = loop {
            let mut k = gram.clone();
            for i in 0..n {
                k[(i, i)] += hyper.noise_variance + jitter;
            }
            if let Some(c) = k.cholesky() {
                break c;
            }
            if jitter >= MAX_JITTER {
                return Err(Error::Numerical(format!(
                    "GP Gram matrix not positive definite with jitter {jitter}"
                )));
            }
            jitter = (jitter * 10.0).min(MAX_JITTER);
        };
        let resid = DVector::from_iterator(n, targets.iter().map(|t| t - prior_mean));
        let alpha = chol.solve(&resid);
        Ok(Self {
            inputs,
            targets,
            hyper,
            prior_mean,
            jitter,
            chol,
            alpha,
        })
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    /// Jitter that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyper
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Diagonal entry of the regularized Gram matrix.
    pub fn gram_diagonal(&self) -> f64 {
        self.hyper.signal_variance + self.hyper.noise_variance + self.jitter
    }

    /// Posterior mean and standard deviation of the latent function.
    pub fn posterior(&self, query: &[f64]) -> (f64, f64) {
        let n = self.len();
        let kstar = DVector::from_iterator(n, self.inputs.iter().map(|x| self.hyper.kernel(x, query)));
        let mean = self.prior_mean + kstar.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor is invertible");
        let var = (self.hyper.signal_variance - v.norm_squared()).max(0.0);
        (mean, var.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn hp(noise: f64) -> GpHyperparameters {
        GpHyperparameters {
            noise_variance: noise,
            ..GpHyperparameters::default()
        }
    }

    #[test]
    fn single_observation() {
        let m = GpModel::fit(vec![vec![2.0]], vec![0.7], hp(1e-8)).unwrap();
        let (mu, sd) = m.posterior(&[2.0]);
        assert!((mu - 0.7).abs() < 1e-6);
        assert!(sd < 1e-3);
        assert!((m.gram_diagonal() - (1.0 + 1e-8 + 1e-8)).abs() < 1e-20);
    }

    #[test]
    fn interpolates_with_small_noise() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i % 5) as f64]).collect();
        let ts: Vec<f64> = (0..6).map(|i| (i as f64 * 0.37).sin()).collect();
        let m = GpModel::fit(xs.clone(), ts.clone(), hp(1e-8)).unwrap();
        for (x, t) in xs.iter().zip(&ts) {
            let (mu, sd) = m.posterior(x);
            assert!((mu - t).abs() < 1e-6);
            assert!(sd < 1e-3);
        }
    }

    #[test]
    fn duplicated_inputs_fit() {
        let m = GpModel::fit(vec![vec![1.0], vec![1.0]], vec![0.0, 1.0], hp(1e-4)).unwrap();
        let (mu, _) = m.posterior(&[1.0]);
        assert!((mu - 0.5).abs() < 1e-6);
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let m = GpModel::fit(vec![vec![0.0], vec![1.0]], vec![0.2, 0.8], hp(1e-4)).unwrap();
        let (mu, sd) = m.posterior(&[1e3]);
        assert!((mu - 0.5).abs() < 1e-12);
        assert!((sd * sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_closed_form() {
        let noise = 1e-4;
        let m = GpModel::fit(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0], hp(noise)).unwrap();
        let q = 0.25;
        let a = 1.0 + noise + INITIAL_JITTER;
        let b = (-0.5f64).exp();
        let det = a * a - b * b;
        let (k0, k1) = ((-q * q / 2.0f64).exp(), (-(1.0 - q) * (1.0 - q) / 2.0f64).exp());
        // K^{-1} = [[a, -b], [-b, a]] / det applied to centered targets [-0.5, 0.5].
        let alpha = [(-0.5 * a - 0.5 * b) / det, (0.5 * b + 0.5 * a) / det];
        let mu = 0.5 + k0 * alpha[0] + k1 * alpha[1];
        let quad = (a * k0 * k0 - 2.0 * b * k0 * k1 + a * k1 * k1) / det;
        let (gmu, gsd) = m.posterior(&[q]);
        assert!((gmu - mu).abs() < 1e-12);
        assert!((gsd * gsd - (1.0 - quad)).abs() < 1e-12);
        // Symmetric pair with equal targets gives the common value.
        let m = GpModel::fit(vec![vec![-1.0], vec![1.0]], vec![0.4, 0.4], hp(noise)).unwrap();
        assert!((m.posterior(&[0.0]).0 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GpModel::fit(vec![], vec![], hp(1e-4)).is_err());
        assert!(GpModel::fit(vec![vec![0.0]], vec![0.0, 1.0], hp(1e-4)).is_err());
        let bad = GpHyperparameters {
            length_scale: 0.0,
            ..GpHyperparameters::default()
        };
        assert!(GpModel::fit(vec![vec![0.0]], vec![0.0], bad).is_err());
    }

    proptest! {
        #[test]
        fn variance_bounded_and_permutation_invariant(seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let n = 1 + rng.below(8);
            let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.uniform() * 6.0, rng.uniform() * 6.0]).collect();
            let ts: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let m = GpModel::fit(xs.clone(), ts.clone(), hp(1e-4)).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            order.reverse();
            let m2 = GpModel::fit(order.iter().map(|&i| xs[i].clone()).collect(),
                                  order.iter().map(|&i| ts[i]).collect(), hp(1e-4)).unwrap();
            for _ in 0..20 {
                let q = [rng.uniform() * 8.0 - 1.0, rng.uniform() * 8.0 - 1.0];
                let (mu, sd) = m.posterior(&q);
                let (mu2, sd2) = m2.posterior(&q);
                prop_assert!(sd * sd <= 1.0 + 1e-9);
                prop_assert!((mu - mu2).abs() < 1e-10);
                prop_assert!((sd - sd2).abs() < 1e-10);
            }
        }

        #[test]
        fn more_data_never_increases_variance(seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let n = 1 + rng.below(6);
            let xs: Vec<Vec<f64>> = (0..=n).map(|_| vec![rng.uniform() * 5.0]).collect();
            let ts: Vec<f64> = (0..=n).map(|_| rng.uniform()).collect();
            let small = GpModel::fit(xs[..n].to_vec(), ts[..n].to_vec(), hp(1e-4)).unwrap();
            let big = GpModel::fit(xs.clone(), ts.clone(), hp(1e-4)).unwrap();
            for _ in 0..20 {
                let q = [rng.uniform() * 7.0 - 1.0];
                // Dense re-solve of the larger model's variance as a cross-check.
                let k = DMatrix::from_fn(n + 1, n + 1, |i, j| {
                    big.hyper.kernel(&xs[i], &xs[j]) + if i == j { 1e-4 + big.jitter } else { 0.0 }
                });
                let ks = DVector::from_iterator(n + 1, xs.iter().map(|x| big.hyper.kernel(x, &q)));
                let inv = k.try_inverse().unwrap();
                let dense_var = 1.0 - (ks.transpose() * inv * &ks)[(0, 0)];
                let (_, sb) = big.posterior(&q);
                let (_, ss) = small.posterior(&q);
                prop_assert!((sb * sb - dense_var.max(0.0)).abs() < 1e-8);
                prop_assert!(sb * sb <= ss * ss + 1e-9);
            }
        }
    }
}
