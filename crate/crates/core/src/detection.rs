//! Online detection of the Mountain structure from observed rows.
//!
//! Two tests run on the relative performance `J̄`, the observed rows minus
//! their per-target mean:
//! - small variance: the spread of `J̄` at the trained tasks themselves is
//!   smaller than the average spread of each row, i.e. policy quality varies
//!   less than task dissimilarity;
//! - slope: a piecewise-linear fit of `J̄` on the signed context difference
//!   decreases away from the source on both sides in a majority of dimensions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::decomposition::std_dev;
use crate::error::{invalid, Error, Result};
use crate::grid::TaskGrid;
use crate::linreg::ols_min_norm;

/// The information a selector receives: the tasks trained so far and the
/// revealed performance rows of their policies.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedHistory {
    grid: TaskGrid,
    selected: Vec<usize>,
    rows: Vec<Vec<f64>>,
    taken: Vec<bool>,
}

impl ObservedHistory {
    pub fn empty(grid: TaskGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            selected: Vec::new(),
            rows: Vec::new(),
            taken: vec![false; n],
        }
    }

    pub fn new(grid: TaskGrid, selected: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if selected.len() != rows.len() {
            return Err(invalid(format!(
                "{} selected tasks but {} rows",
                selected.len(),
                rows.len()
            )));
        }
        let mut h = Self::empty(grid);
        for (t, r) in selected.into_iter().zip(rows) {
            h.push(t, r)?;
        }
        Ok(h)
    }

    /// Records a newly trained task and its revealed row.
    pub fn push(&mut self, task: usize, row: Vec<f64>) -> Result<()> {
        self.grid.check_task(task)?;
        if self.taken[task] {
            return Err(Error::ContractViolation(format!("task {task} selected twice")));
        }
        if row.len() != self.grid.len() {
            return Err(invalid(format!(
                "row has {} entries, expected {}",
                row.len(),
                self.grid.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observed row has non-finite values"));
        }
        self.taken[task] = true;
        self.selected.push(task);
        self.rows.push(row);
        Ok(())
    }

    pub fn grid(&self) -> &TaskGrid {
        &self.grid
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Number of trained tasks k.
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn is_selected(&self, task: usize) -> bool {
        self.taken.get(task).copied().unwrap_or(false)
    }

    /// Per-target maximum over observed rows; `None` before any observation.
    pub fn best_so_far(&self) -> Option<Vec<f64>> {
        let first = self.rows.first()?;
        let mut best = first.clone();
        for row in &self.rows[1..] {
            for (b, v) in best.iter_mut().zip(row) {
                *b = b.max(*v);
            }
        }
        Some(best)
    }

    /// Observed training performance `J(x_κ, x_κ)` of each trained task.
    pub fn diagonal(&self) -> Vec<f64> {
        self.selected
            .iter()
            .zip(&self.rows)
            .map(|(&t, r)| r[t])
            .collect()
    }

    /// History truncated to its first `k` entries.
    pub fn prefix(&self, k: usize) -> Self {
        let mut h = Self::empty(self.grid.clone());
        for (&t, r) in self.selected.iter().zip(&self.rows).take(k) {
            h.taken[t] = true;
            h.selected.push(t);
            h.rows.push(r.clone());
        }
        h
    }
}

/// `J̄[κ][n]`: each observed row minus the per-target mean over observed rows.
pub fn relative_performance(h: &ObservedHistory) -> Vec<Vec<f64>> {
    let k = h.len();
    if k == 0 {
        return Vec::new();
    }
    let n = h.grid.len();
    let mut mean = vec![0.0; n];
    for row in &h.rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);
    h.rows
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallVarianceTerms {
    /// Spread of `J̄` at the trained tasks.
    pub lhs: f64,
    /// Mean over trained tasks of the spread of `J̄` across targets.
    pub rhs: f64,
}

impl SmallVarianceTerms {
    pub fn holds(&self) -> bool {
        self.lhs < self.rhs
    }
}

/// Both sides of the small variance comparison (population deviations).
pub fn small_variance_terms(h: &ObservedHistory) -> Result<SmallVarianceTerms> {
    if h.len() < 2 {
        return Err(Error::InsufficientData(
            "small variance criterion needs at least two trained tasks".into(),
        ));
    }
    let rel = relative_performance(h);
    let diag: Vec<f64> = h.selected.iter().zip(&rel).map(|(&t, r)| r[t]).collect();
    let rhs = rel.iter().map(|r| std_dev(r)).sum::<f64>() / rel.len() as f64;
    Ok(SmallVarianceTerms {
        lhs: std_dev(&diag),
        rhs,
    })
}

pub fn small_variance_criterion(h: &ObservedHistory) -> Result<bool> {
    small_variance_terms(h).map(|t| t.holds())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Coefficients of the negative-part features `[x - y]_-`.
    pub theta_left: Vec<f64>,
    /// Coefficients of the positive-part features `[x - y]_+`.
    pub theta_right: Vec<f64>,
    pub intercept: f64,
    /// The regression was well posed.
    pub ok: bool,
    /// Dimension `d` had both of its slopes identified by the observations.
    pub identified: Vec<bool>,
    pub residual_norm: f64,
    /// Numerical rank of the centered design.
    pub rank: usize,
}

impl SlopeFit {
    /// A fit with given slopes, every dimension identified.
    pub fn from_slopes(theta_left: Vec<f64>, theta_right: Vec<f64>) -> Result<Self> {
        if theta_left.len() != theta_right.len() || theta_left.is_empty() {
            return Err(invalid("slope vectors must be non-empty and of equal length"));
        }
        let d = theta_left.len();
        Ok(Self {
            theta_left,
            theta_right,
            intercept: 0.0,
            ok: true,
            identified: vec![true; d],
            residual_norm: 0.0,
            rank: 2 * d,
        })
    }

    fn failed(d: usize) -> Self {
        Self {
            theta_left: vec![0.0; d],
            theta_right: vec![0.0; d],
            intercept: 0.0,
            ok: false,
            identified: vec![false; d],
            residual_norm: f64::NAN,
            rank: 0,
        }
    }
}

/// Signed-difference features `[[x - y]_-, [x - y]_+]` in grid-index
/// coordinates, written into `out` (length `2D`).
#[inline]
pub fn diff_features(x: &[f64], y: &[f64], out: &mut [f64]) {
    let d = x.len();
    for k in 0..d {
        let v = x[k] - y[k];
        out[k] = v.min(0.0);
        out[d + k] = v.max(0.0);
    }
}

const IDENTIFIED_TOL: f64 = 1e-9;

/// Least-squares fit of `J̄` on the signed-difference features.
///
/// `J̄` has the per-target mean removed, so the features are centered per
/// target in the same way: the fit is the within-target regression, which
/// recovers the slopes of `h` exactly on noise-free data whatever the task
/// difficulty. A feature that is identical for every trained source (the
/// sources share that coordinate) carries no information and is dropped; its
/// dimension is then reported as not identified.
///
/// With at most `D` sources the centered design is always rank-deficient: the
/// sum of a dimension's two features is the source coordinate itself, so a
/// policy quality linear in the context cannot be told apart from a shift of
/// both slopes. The minimum-norm solution is used then, which attributes
/// nothing to that unobservable direction.
pub fn fit_slopes(h: &ObservedHistory) -> SlopeFit {
    let d = h.grid.ndim();
    let p = 2 * d;
    let k = h.len();
    if k < 2 {
        return SlopeFit::failed(d);
    }
    let n = h.grid.len();
    let coords = h.grid.coord_table();
    let rel = relative_performance(h);

    // feats[(κ * n + j) * p + q], centered over κ for each (j, q).
    let mut feats = vec![0.0; k * n * p];
    for (kappa, &src) in h.selected.iter().enumerate() {
        let x = &coords[src * d..(src + 1) * d];
        for j in 0..n {
            let base = (kappa * n + j) * p;
            diff_features(x, &coords[j * d..(j + 1) * d], &mut feats[base..base + p]);
        }
    }
    let mut mean = vec![0.0; n * p];
    for kappa in 0..k {
        for (m, v) in mean.iter_mut().zip(&feats[kappa * n * p..(kappa + 1) * n * p]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);
    let mut ss = vec![0.0; p];
    for kappa in 0..k {
        for (idx, v) in feats[kappa * n * p..(kappa + 1) * n * p].iter_mut().enumerate() {
            *v -= mean[idx];
            ss[idx % p] += *v * *v;
        }
    }
    let keep: Vec<usize> = (0..p).filter(|&q| ss[q] > IDENTIFIED_TOL).collect();
    if keep.is_empty() {
        return SlopeFit::failed(d);
    }
    let pk = keep.len();
    let mut design = Vec::with_capacity(k * n * pk);
    for row in feats.chunks(p) {
        design.extend(keep.iter().map(|&q| row[q]));
    }
    let target: Vec<f64> = rel.into_iter().flatten().collect();
    let Some((fit, rank)) = ols_min_norm(&design, pk, &target) else {
        return SlopeFit::failed(d);
    };
    if rank == 0 {
        return SlopeFit::failed(d);
    }
    let mut theta = vec![0.0; p];
    for (c, &q) in fit.coef.iter().zip(&keep) {
        theta[q] = *c;
    }
    let identified = (0..d)
        .map(|q| ss[q] > IDENTIFIED_TOL && ss[d + q] > IDENTIFIED_TOL)
        .collect();
    SlopeFit {
        theta_left: theta[..d].to_vec(),
        theta_right: theta[d..].to_vec(),
        intercept: fit.intercept,
        ok: true,
        identified,
        residual_norm: fit.residual_norm,
        rank,
    }
}

/// How a dimension's pair of slopes is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeConvention {
    /// Performance strictly decreases away from the source on both sides:
    /// `θ_L > 0` and `θ_R < 0`.
    #[default]
    Decreasing,
    /// Literal sign agreement `sgn(θ_L) = sgn(θ_R)`, kept for comparison.
    SignEquality,
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// True when more than half of the identified dimensions are consistent.
pub fn slope_criterion(fit: &SlopeFit, convention: SlopeConvention) -> Result<bool> {
    if !fit.ok {
        return Err(Error::InsufficientData("slope regression is not well posed".into()));
    }
    let mut evaluated = 0usize;
    let mut consistent = 0usize;
    for q in 0..fit.theta_left.len() {
        if !fit.identified[q] {
            continue;
        }
        evaluated += 1;
        let (l, r) = (fit.theta_left[q], fit.theta_right[q]);
        let good = match convention {
            SlopeConvention::Decreasing => l > 0.0 && r < 0.0,
            SlopeConvention::SignEquality => sign(l) == sign(r),
        };
        consistent += usize::from(good);
    }
    if evaluated == 0 {
        return Err(Error::InsufficientData("no slope dimension is identified".into()));
    }
    Ok(2 * consistent > evaluated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    #[serde(rename = "MOUNTAIN")]
    Mountain,
    #[serde(rename = "NONE")]
    None,
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::Mountain => "MOUNTAIN",
            Structure::None => "NONE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub convention: SlopeConvention,
}

/// Every intermediate quantity of one detection call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub k: usize,
    pub small_variance: Option<SmallVarianceTerms>,
    pub small_variance_holds: Option<bool>,
    pub slopes: SlopeFit,
    pub slope_holds: Option<bool>,
    pub structure: Structure,
}

pub fn detect_report(h: &ObservedHistory, config: &DetectionConfig) -> DetectionReport {
    let terms = small_variance_terms(h).ok();
    let slopes = fit_slopes(h);
    let slope_holds = slope_criterion(&slopes, config.convention).ok();
    let sv_holds = terms.map(|t| t.holds());
    let structure = if sv_holds == Some(true) && slope_holds == Some(true) {
        Structure::Mountain
    } else {
        Structure::None
    };
    DetectionReport {
        k: h.len(),
        small_variance: terms,
        small_variance_holds: sv_holds,
        slopes,
        slope_holds,
        structure,
    }
}

/// `Mountain` only when both criteria hold; insufficient data gives `None`.
pub fn detect(h: &ObservedHistory, config: &DetectionConfig) -> Structure {
    if h.len() < 2 {
        return Structure::None;
    }
    match small_variance_criterion(h) {
        Ok(true) => {}
        _ => return Structure::None,
    }
    match slope_criterion(&fit_slopes(h), config.convention) {
        Ok(true) => Structure::Mountain,
        _ => Structure::None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, preset, SyntheticConfig};
    use crate::TransferMatrix;
    use proptest::prelude::*;

    fn history_from(m: &TransferMatrix, sel: &[usize]) -> ObservedHistory {
        ObservedHistory::new(
            m.grid().clone(),
            sel.to_vec(),
            sel.iter().map(|&t| m.row(0, t).to_vec()).collect(),
        )
        .unwrap()
    }

    fn line(n: usize, rows: Vec<(usize, Vec<f64>)>) -> ObservedHistory {
        let (sel, rows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        ObservedHistory::new(TaskGrid::integer(&[n]).unwrap(), sel, rows).unwrap()
    }

    #[test]
    fn relative_examples() {
        let h = line(3, vec![(0, vec![1.0, 2.0, 3.0])]);
        assert_eq!(relative_performance(&h), vec![vec![0.0; 3]]);
        let h = line(3, vec![(0, vec![1.0, 2.0, 3.0]), (2, vec![3.0, 2.0, 1.0])]);
        assert_eq!(
            relative_performance(&h),
            vec![vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, -1.0]]
        );
    }

    #[test]
    fn history_rejects_duplicates() {
        let mut h = line(3, vec![(1, vec![0.0; 3])]);
        assert!(matches!(
            h.push(1, vec![0.0; 3]),
            Err(Error::ContractViolation(_))
        ));
        assert!(h.push(3, vec![0.0; 3]).is_err());
        assert!(h.push(2, vec![0.0; 2]).is_err());
    }

    #[test]
    fn small_variance_examples() {
        let m = generate(&SyntheticConfig::mountain(&[8], 3.0).unwrap()).unwrap();
        assert!(small_variance_criterion(&history_from(&m, &[2, 5])).unwrap());
        assert!(matches!(
            small_variance_criterion(&history_from(&m, &[2])),
            Err(Error::InsufficientData(_))
        ));
        // J̄ rows are [-1,-1] and [1,1]: zero spread per row, diagonal spread 1.
        let h = line(2, vec![(0, vec![1.0, 1.0]), (1, vec![3.0, 3.0])]);
        let t = small_variance_terms(&h).unwrap();
        assert_eq!(t.rhs, 0.0);
        assert!(t.lhs > 0.0);
        assert!(!t.holds());
    }

    #[test]
    fn small_variance_false_for_linear_policy_quality() {
        let cfg = preset("3d/lin-f/none-g/l1/sigma0").unwrap();
        let m = generate(&cfg).unwrap();
        let mut rng = crate::rng::SeededRng::new(3);
        for _ in 0..20 {
            let mut sel = Vec::new();
            while sel.len() < 5 {
                let t = rng.below(512);
                if !sel.contains(&t) {
                    sel.push(t);
                }
            }
            let h = history_from(&m, &sel);
            // Scalar recomputation of both sides.
            let mut rel = vec![vec![0.0; 512]; 5];
            for j in 0..512 {
                let mean: f64 = sel.iter().map(|&s| m.get(0, s, j)).sum::<f64>() / 5.0;
                for (r, &s) in sel.iter().enumerate() {
                    rel[r][j] = m.get(0, s, j) - mean;
                }
            }
            let diag: Vec<f64> = sel.iter().enumerate().map(|(r, &s)| rel[r][s]).collect();
            let rhs: f64 = rel.iter().map(|r| std_dev(r)).sum::<f64>() / 5.0;
            let t = small_variance_terms(&h).unwrap();
            assert!((t.lhs - std_dev(&diag)).abs() < 1e-9);
            assert!((t.rhs - rhs).abs() < 1e-9);
            assert_eq!(t.holds(), std_dev(&diag) < rhs);
        }
    }

    #[test]
    fn fit_recovers_one_dimensional_slopes() {
        let m = generate(&SyntheticConfig::mountain(&[8], 3.0).unwrap()).unwrap();
        let fit = fit_slopes(&history_from(&m, &[2, 5]));
        assert!(fit.ok);
        assert!((fit.theta_left[0] - 3.0).abs() < 1e-9);
        assert!((fit.theta_right[0] + 3.0).abs() < 1e-9);
        assert!(fit.residual_norm < 1e-8);

        let mut cfg = SyntheticConfig::mountain(&[8], 3.0).unwrap();
        cfg.h_left = vec![1.0];
        let m = generate(&cfg).unwrap();
        let fit = fit_slopes(&history_from(&m, &[2, 5]));
        assert!((fit.theta_left[0] + 1.0).abs() < 1e-9);
        assert!((fit.theta_right[0] + 3.0).abs() < 1e-9);
        assert!(fit.residual_norm < 1e-8);
    }

    #[test]
    fn fit_of_flat_rows_is_zero() {
        let h = line(4, vec![(0, vec![2.0; 4]), (3, vec![2.0; 4])]);
        let fit = fit_slopes(&h);
        assert!(fit.ok);
        assert!(fit.theta_left[0].abs() < 1e-12 && fit.theta_right[0].abs() < 1e-12);
    }

    #[test]
    fn nondistance_preset_fit_and_criterion() {
        let cfg = preset("3d/const-f/none-g/nondist/sigma0").unwrap();
        let m = generate(&cfg).unwrap();
        let fit = fit_slopes(&history_from(&m, &[0, 219, 511, 100, 300, 37]));
        assert_eq!(fit.rank, 6);
        let want_l = [-1.0, -1.0, 3.0];
        for q in 0..3 {
            assert!((fit.theta_left[q] - want_l[q]).abs() < 1e-9);
            assert!((fit.theta_right[q] + 3.0).abs() < 1e-9);
        }
        assert!(!slope_criterion(&fit, SlopeConvention::Decreasing).unwrap());
    }

    #[test]
    fn criterion_examples() {
        let c = SlopeConvention::Decreasing;
        let f = SlopeFit::from_slopes(vec![3.0; 3], vec![-3.0; 3]).unwrap();
        assert!(slope_criterion(&f, c).unwrap());
        let f = SlopeFit::from_slopes(vec![-1.0, -1.0, 3.0], vec![-3.0; 3]).unwrap();
        assert!(!slope_criterion(&f, c).unwrap());
        let f = SlopeFit::from_slopes(vec![-3.0], vec![3.0]).unwrap();
        assert!(!slope_criterion(&f, c).unwrap());
        let f = SlopeFit::from_slopes(vec![0.0], vec![-3.0]).unwrap();
        assert!(!slope_criterion(&f, c).unwrap());
        // The literal convention judges the first example the other way.
        let f = SlopeFit::from_slopes(vec![3.0; 3], vec![-3.0; 3]).unwrap();
        assert!(!slope_criterion(&f, SlopeConvention::SignEquality).unwrap());
        assert!(slope_criterion(&SlopeFit::failed(3), c).is_err());
    }

    #[test]
    fn detect_examples() {
        let cfg = DetectionConfig::default();
        let m = generate(&preset("3d/const-f/none-g/l1/sigma0").unwrap()).unwrap();
        assert_eq!(detect(&history_from(&m, &[219]), &cfg), Structure::None);
        assert_eq!(detect(&history_from(&m, &[]), &cfg), Structure::None);
        assert_eq!(detect(&history_from(&m, &[219, 0]), &cfg), Structure::Mountain);
        assert_eq!(
            detect(&history_from(&m, &[219, 0, 511, 77]), &cfg),
            Structure::Mountain
        );
        let m = generate(&preset("3d/const-f/none-g/nondist/sigma0").unwrap()).unwrap();
        assert_eq!(detect(&history_from(&m, &[219, 0, 511]), &cfg), Structure::None);
        let r = detect_report(&history_from(&m, &[219, 0, 511]), &cfg);
        assert_eq!(r.structure, Structure::None);
        assert_eq!(r.slope_holds, Some(false));
    }

    #[test]
    fn exhaustive_one_dimensional_mountain() {
        let cfg = DetectionConfig::default();
        let m = generate(&SyntheticConfig::mountain(&[8], 3.0).unwrap()).unwrap();
        let mut count = 0;
        for a in 0..8 {
            for b in 0..8 {
                if b == a {
                    continue;
                }
                assert_eq!(detect(&history_from(&m, &[a, b]), &cfg), Structure::Mountain);
                for c in 0..8 {
                    if c == a || c == b {
                        continue;
                    }
                    assert_eq!(detect(&history_from(&m, &[a, b, c]), &cfg), Structure::Mountain);
                    for e in 0..8 {
                        if [a, b, c].contains(&e) {
                            continue;
                        }
                        let h = history_from(&m, &[a, b, c, e]);
                        assert_eq!(detect(&h, &cfg), Structure::Mountain);
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 8 * 7 * 6 * 5);
    }

    proptest! {
        #[test]
        fn relative_columns_are_centered(seed in any::<u64>(), k in 1usize..6) {
            let mut rng = crate::rng::SeededRng::new(seed);
            let grid = TaskGrid::integer(&[3, 3]).unwrap();
            let sel: Vec<usize> = (0..k).collect();
            let rows = (0..k).map(|_| (0..9).map(|_| rng.uniform() * 100.0).collect()).collect();
            let h = ObservedHistory::new(grid, sel, rows).unwrap();
            let rel = relative_performance(&h);
            for j in 0..9 {
                let s: f64 = rel.iter().map(|r| r[j]).sum();
                prop_assert!(s.abs() < 1e-12 * 100.0 * k as f64);
            }
        }

        #[test]
        fn detect_is_affine_invariant(seed in any::<u64>(), shift in -50.0f64..50.0,
                                      scale in 0.1f64..10.0, nondist in any::<bool>()) {
            let name = if nondist { "3d/const-f/none-g/nondist/sigma5/levels4" }
                       else { "3d/const-f/none-g/l1/sigma5/levels4" };
            let mut c = preset(name).unwrap();
            c.seed = seed;
            c.trials = 1;
            let m = generate(&c).unwrap();
            let mut rng = crate::rng::SeededRng::new(seed ^ 7);
            let mut sel = Vec::new();
            while sel.len() < 4 {
                let t = rng.below(64);
                if !sel.contains(&t) { sel.push(t); }
            }
            let h = history_from(&m, &sel);
            let rows2 = h.rows().iter()
                .map(|r| r.iter().map(|v| v * scale + shift).collect()).collect();
            let h2 = ObservedHistory::new(h.grid().clone(), sel.clone(), rows2).unwrap();
            let cfg = DetectionConfig::default();
            prop_assert_eq!(detect(&h, &cfg), detect(&h2, &cfg));
        }
    }
}
