//! The selection loop, the selector contract, structure-switching
//! composition, the random baseline and the two privileged oracles.

use std::sync::Arc;

use serde::Serialize;

use crate::cluster::{MmbtlConfig, MmbtlSelector};
use crate::detection::{detect, DetectionConfig, ObservedHistory, Structure};
use crate::error::{invalid, Error, Result};
use crate::gp_select::{GpMbtlConfig, GpMbtlSelector};
use crate::matrix::TransferMatrix;
use crate::rng::SeededRng;

/// A source-task selection policy.
///
/// Ordinary selectors see nothing but the history handed to them. Oracles
/// hold the full matrix themselves and must report `privileged`.
pub trait Selector: Send {
    fn name(&self) -> &str;

    fn privileged(&self) -> bool {
        false
    }

    /// Proposes an unselected task.
    fn select(&mut self, history: &ObservedHistory) -> Result<usize>;

    /// Sub-algorithm used by the most recent `select`, for composite selectors.
    fn last_branch(&self) -> Option<String> {
        None
    }

    /// Clears state carried between rounds so a new run can start.
    fn reset(&mut self) {}
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectorRun {
    pub method: String,
    pub selected: Vec<usize>,
    /// Mean over targets of the best revealed performance after each round.
    pub trace: Vec<f64>,
    pub branches: Vec<Option<String>>,
}

impl SelectorRun {
    pub fn final_performance(&self) -> f64 {
        *self.trace.last().expect("a run has at least one round")
    }
}

/// Runs `rounds` rounds on trial `trial`, revealing one row per round.
pub fn run_selector(
    matrix: &TransferMatrix,
    trial: usize,
    selector: &mut dyn Selector,
    rounds: usize,
) -> Result<SelectorRun> {
    let n = matrix.size();
    if rounds == 0 || rounds > n {
        return Err(invalid(format!("rounds must be in 1..={n}, got {rounds}")));
    }
    if trial >= matrix.num_trials() {
        return Err(Error::IndexOutOfRange {
            index: trial,
            bound: matrix.num_trials(),
        });
    }
    selector.reset();
    let mut history = ObservedHistory::empty(matrix.grid().clone());
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut trace = Vec::with_capacity(rounds);
    let mut branches = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let task = selector.select(&history)?;
        if task >= n {
            return Err(Error::ContractViolation(format!(
                "{} proposed task {task} outside 0..{n}",
                selector.name()
            )));
        }
        if history.is_selected(task) {
            return Err(Error::ContractViolation(format!(
                "{} proposed already selected task {task}",
                selector.name()
            )));
        }
        let row = matrix.row(trial, task);
        for (b, v) in best.iter_mut().zip(row) {
            *b = b.max(*v);
        }
        history.push(task, row.to_vec())?;
        trace.push(best.iter().sum::<f64>() / n as f64);
        branches.push(selector.last_branch());
    }
    Ok(SelectorRun {
        method: selector.name().to_string(),
        selected: history.selected().to_vec(),
        trace,
        branches,
    })
}

/// Uniformly random unselected task.
#[derive(Debug, Clone)]
pub struct RandomSelector {
    seed: u64,
    rng: SeededRng,
}

impl RandomSelector {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: SeededRng::new(seed),
        }
    }

    /// Seed of repeat `repeat` on matrix `matrix`: `(matrix + 1) * (repeat + 1)`.
    pub fn repeat_seed(matrix: usize, repeat: usize) -> u64 {
        ((matrix as u64) + 1) * ((repeat as u64) + 1)
    }
}

impl Selector for RandomSelector {
    fn name(&self) -> &str {
        "random"
    }

    fn select(&mut self, history: &ObservedHistory) -> Result<usize> {
        let n = history.grid().len();
        let free: Vec<usize> = (0..n).filter(|&t| !history.is_selected(t)).collect();
        if free.is_empty() {
            return Err(invalid("every task is already selected"));
        }
        Ok(free[self.rng.below(free.len())])
    }

    fn reset(&mut self) {
        self.rng = SeededRng::new(self.seed);
    }
}

/// Greedy task maximizing the trial-averaged mean best performance over the
/// given trials. Ties go to the lowest index.
fn greedy_pick(matrix: &TransferMatrix, trials: &[usize], best: &[Vec<f64>], taken: &[bool]) -> usize {
    let n = matrix.size();
    let mut choice = None;
    let mut top = f64::NEG_INFINITY;
    for x in (0..n).filter(|&x| !taken[x]) {
        let mut value = 0.0;
        for (b, &w) in best.iter().zip(trials) {
            let row = matrix.row(w, x);
            let mut s = 0.0;
            for (bv, rv) in b.iter().zip(row) {
                s += bv.max(*rv);
            }
            value += s;
        }
        if value > top {
            top = value;
            choice = Some(x);
        }
    }
    choice.expect("an unselected task exists")
}

/// Greedy oracle over a fixed set of trials with full matrix access.
#[derive(Debug, Clone)]
pub struct OracleSelector {
    name: String,
    matrix: Arc<TransferMatrix>,
    trials: Vec<usize>,
    best: Vec<Vec<f64>>,
    seen: usize,
}

impl OracleSelector {
    /// One common sequence maximizing the objective averaged over all trials.
    pub fn myopic(matrix: Arc<TransferMatrix>) -> Self {
        let trials = (0..matrix.num_trials()).collect();
        Self::build("myopic-oracle", matrix, trials)
    }

    /// Greedy sequence for trial `w` alone.
    pub fn sequential(matrix: Arc<TransferMatrix>, w: usize) -> Result<Self> {
        if w >= matrix.num_trials() {
            return Err(Error::IndexOutOfRange {
                index: w,
                bound: matrix.num_trials(),
            });
        }
        Ok(Self::build("sequential-oracle", matrix, vec![w]))
    }

    fn build(name: &str, matrix: Arc<TransferMatrix>, trials: Vec<usize>) -> Self {
        let n = matrix.size();
        Self {
            name: name.to_string(),
            best: vec![vec![f64::NEG_INFINITY; n]; trials.len()],
            matrix,
            trials,
            seen: 0,
        }
    }

    /// The first `rounds` picks, computed without a run.
    pub fn sequence(&mut self, rounds: usize) -> Result<Vec<usize>> {
        self.reset();
        let mut h = ObservedHistory::empty(self.matrix.grid().clone());
        for _ in 0..rounds {
            let t = self.select(&h)?;
            // Rows are irrelevant to the oracle; only the selection list is read.
            h.push(t, vec![0.0; self.matrix.size()])?;
        }
        Ok(h.selected().to_vec())
    }
}

impl Selector for OracleSelector {
    fn name(&self) -> &str {
        &self.name
    }

    fn privileged(&self) -> bool {
        true
    }

    fn select(&mut self, history: &ObservedHistory) -> Result<usize> {
        let sel = history.selected();
        if sel.len() < self.seen {
            self.reset();
        }
        for &t in &sel[self.seen..] {
            for (b, &w) in self.best.iter_mut().zip(&self.trials) {
                for (bv, rv) in b.iter_mut().zip(self.matrix.row(w, t)) {
                    *bv = bv.max(*rv);
                }
            }
        }
        self.seen = sel.len();
        let n = self.matrix.size();
        if sel.len() >= n {
            return Err(invalid("every task is already selected"));
        }
        let mut taken = vec![false; n];
        sel.iter().for_each(|&t| taken[t] = true);
        Ok(greedy_pick(&self.matrix, &self.trials, &self.best, &taken))
    }

    fn reset(&mut self) {
        let n = self.matrix.size();
        self.best = vec![vec![f64::NEG_INFINITY; n]; self.trials.len()];
        self.seen = 0;
    }
}

/// Maps an observed history to a structure label.
pub trait StructureDetector: Send {
    fn detect(&self, history: &ObservedHistory) -> Result<String>;
}

/// The Mountain detector: labels `MOUNTAIN` or `NONE`.
#[derive(Debug, Clone, Default)]
pub struct MountainDetector {
    pub config: DetectionConfig,
}

impl StructureDetector for MountainDetector {
    fn detect(&self, history: &ObservedHistory) -> Result<String> {
        Ok(detect(history, &self.config).to_string())
    }
}

/// Detector returning one label regardless of the history.
#[derive(Debug, Clone)]
pub struct ConstantDetector(pub String);

impl StructureDetector for ConstantDetector {
    fn detect(&self, _history: &ObservedHistory) -> Result<String> {
        Ok(self.0.clone())
    }
}

/// Structure-detection composition: each round, detect the structure and run
/// the algorithm registered for it.
pub struct SdMbtl {
    name: String,
    detector: Box<dyn StructureDetector>,
    algorithms: Vec<(String, Box<dyn Selector>)>,
    last: Option<String>,
}

impl SdMbtl {
    /// `structures[i]` is handled by `algorithms[i]`.
    pub fn new(
        name: impl Into<String>,
        structures: Vec<String>,
        detector: Box<dyn StructureDetector>,
        algorithms: Vec<Box<dyn Selector>>,
    ) -> Result<Self> {
        if structures.len() != algorithms.len() || structures.is_empty() {
            return Err(Error::Configuration(format!(
                "{} structures but {} algorithms",
                structures.len(),
                algorithms.len()
            )));
        }
        for (i, s) in structures.iter().enumerate() {
            if structures[..i].contains(s) {
                return Err(Error::Configuration(format!("structure {s} listed twice")));
            }
        }
        Ok(Self {
            name: name.into(),
            detector,
            algorithms: structures.into_iter().zip(algorithms).collect(),
            last: None,
        })
    }
}

impl Selector for SdMbtl {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, history: &ObservedHistory) -> Result<usize> {
        let label = self.detector.detect(history)?;
        let (_, alg) = self
            .algorithms
            .iter_mut()
            .find(|(s, _)| *s == label)
            .ok_or_else(|| {
                Error::Configuration(format!("no algorithm registered for structure {label}"))
            })?;
        let task = alg.select(history)?;
        self.last = Some(alg.name().to_string());
        Ok(task)
    }

    fn last_branch(&self) -> Option<String> {
        self.last.clone()
    }

    fn reset(&mut self) {
        self.last = None;
        for (_, a) in &mut self.algorithms {
            a.reset();
        }
    }
}

/// M/GP-MBTL as an instance of the generic composition.
pub fn mgp_composite(
    mmbtl: MmbtlConfig,
    gp: GpMbtlConfig,
    detection: DetectionConfig,
) -> Result<SdMbtl> {
    SdMbtl::new(
        "mgp",
        vec![Structure::Mountain.to_string(), Structure::None.to_string()],
        Box::new(MountainDetector { config: detection }),
        vec![
            Box::new(MmbtlSelector::new(mmbtl)),
            Box::new(GpMbtlSelector::new(gp)),
        ],
    )
}

/// M/GP-MBTL written out directly: M-MBTL when the history shows the Mountain
/// structure, GP-MBTL otherwise.
#[derive(Debug, Clone)]
pub struct MgpSelector {
    detection: DetectionConfig,
    m: MmbtlSelector,
    gp: GpMbtlSelector,
    last: Option<Structure>,
}

impl MgpSelector {
    pub fn new(mmbtl: MmbtlConfig, gp: GpMbtlConfig, detection: DetectionConfig) -> Self {
        Self {
            detection,
            m: MmbtlSelector::new(mmbtl),
            gp: GpMbtlSelector::new(gp),
            last: None,
        }
    }

    pub fn last_structure(&self) -> Option<Structure> {
        self.last
    }
}

impl Selector for MgpSelector {
    fn name(&self) -> &str {
        "mgp"
    }

    fn select(&mut self, history: &ObservedHistory) -> Result<usize> {
        let s = detect(history, &self.detection);
        self.last = Some(s);
        match s {
            Structure::Mountain => self.m.select(history),
            Structure::None => self.gp.select(history),
        }
    }

    fn last_branch(&self) -> Option<String> {
        self.last.map(|s| match s {
            Structure::Mountain => "m".to_string(),
            Structure::None => "gp".to_string(),
        })
    }

    fn reset(&mut self) {
        self.last = None;
        self.m.reset();
        self.gp.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TaskGrid;
    use crate::synthetic::{generate, preset};

    fn hand() -> TransferMatrix {
        TransferMatrix::new(
            "hand",
            TaskGrid::integer(&[3]).unwrap(),
            vec![vec![10.0, 9.0, 8.0, 9.0, 10.0, 9.0, 8.0, 9.0, 10.0]],
            false,
        )
        .unwrap()
    }

    /// Trial A favors task 0 and trial B favors task 2; the middle task is the
    /// best compromise.
    fn two_trials() -> TransferMatrix {
        let a = vec![10.0, 10.0, 10.0, 8.0, 8.0, 8.0, 0.0, 0.0, 0.0];
        let b = vec![0.0, 0.0, 0.0, 8.0, 8.0, 8.0, 10.0, 10.0, 10.0];
        TransferMatrix::new("pair", TaskGrid::integer(&[3]).unwrap(), vec![a, b], false).unwrap()
    }

    struct Fixed(Vec<usize>, usize);

    impl Selector for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn select(&mut self, _h: &ObservedHistory) -> Result<usize> {
            self.1 += 1;
            Ok(self.0[self.1 - 1])
        }
        fn reset(&mut self) {
            self.1 = 0;
        }
    }

    #[test]
    fn full_coverage_and_duplicates() {
        let m = hand();
        let run = run_selector(&m, 0, &mut Fixed(vec![2, 0, 1], 0), 3).unwrap();
        assert_eq!(run.final_performance(), 10.0);
        assert!(run.trace.windows(2).all(|w| w[1] >= w[0]));
        let err = run_selector(&m, 0, &mut Fixed(vec![1, 1], 0), 2).unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)));
        assert!(run_selector(&m, 0, &mut Fixed(vec![0], 0), 4).is_err());
        assert!(run_selector(&m, 0, &mut Fixed(vec![7], 0), 1).is_err());
    }

    #[test]
    fn greedy_first_pick() {
        let m = Arc::new(hand());
        // Brute force over the three first picks.
        let vals: Vec<f64> = (0..3).map(|x| (0..3).map(|y| m.get(0, x, y)).sum::<f64>() / 3.0).collect();
        assert_eq!(vals, vec![9.0, 28.0 / 3.0, 9.0]);
        let mut o = OracleSelector::myopic(m.clone());
        let run = run_selector(&m, 0, &mut o, 1).unwrap();
        assert_eq!(run.selected, vec![1]);
        assert!((run.trace[0] - 28.0 / 3.0).abs() < 1e-12);
        let mut s = OracleSelector::sequential(m.clone(), 0).unwrap();
        assert_eq!(s.sequence(3).unwrap(), o.sequence(3).unwrap());
        assert!(o.privileged());
    }

    #[test]
    fn myopic_versus_sequential() {
        let m = Arc::new(two_trials());
        assert_eq!(OracleSelector::myopic(m.clone()).sequence(1).unwrap(), vec![1]);
        assert_eq!(OracleSelector::sequential(m.clone(), 0).unwrap().sequence(1).unwrap(), vec![0]);
        assert_eq!(OracleSelector::sequential(m.clone(), 1).unwrap().sequence(1).unwrap(), vec![2]);
    }

    #[test]
    fn random_is_reproducible() {
        let m = generate(&preset("3d/const-f/none-g/l1/sigma0/levels3").unwrap()).unwrap();
        let mut a = RandomSelector::new(RandomSelector::repeat_seed(2, 4));
        let r1 = run_selector(&m, 0, &mut a, 10).unwrap();
        let r2 = run_selector(&m, 0, &mut a, 10).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(RandomSelector::repeat_seed(2, 4), 15);
        let one = TransferMatrix::new("one", TaskGrid::integer(&[1]).unwrap(), vec![vec![1.0]], false)
            .unwrap();
        let r = run_selector(&one, 0, &mut RandomSelector::new(5), 1).unwrap();
        assert_eq!(r.selected, vec![0]);
    }

    #[test]
    fn routing_on_noiseless_presets() {
        let m = generate(&preset("3d/const-f/none-g/l1/sigma0/levels5").unwrap()).unwrap();
        let mut sel = MgpSelector::new(
            MmbtlConfig::default(),
            GpMbtlConfig::default(),
            DetectionConfig::default(),
        );
        let run = run_selector(&m, 0, &mut sel, 8).unwrap();
        assert_eq!(run.branches[0].as_deref(), Some("gp"));
        assert_eq!(run.selected[0], m.grid().median_task());

        let nd = generate(&preset("3d/const-f/none-g/nondist/sigma0/levels5").unwrap()).unwrap();
        let run = run_selector(&nd, 0, &mut sel, 8).unwrap();
        assert!(run.branches.iter().all(|b| b.as_deref() == Some("gp")));
    }

    #[test]
    fn composite_matches_direct() {
        for (name, seed) in [("3d/const-f/none-g/l1/sigma5/levels4", 1), ("3d/lin-f/lin-g/nondist/sigma5/levels4", 2)] {
            let mut c = preset(name).unwrap();
            c.seed = seed;
            let m = crate::min_max_normalize(&generate(&c).unwrap()).unwrap();
            let mcfg = MmbtlConfig { num_samples: Some(16), seed, ..MmbtlConfig::default() };
            let mut direct = MgpSelector::new(mcfg.clone(), GpMbtlConfig::default(), DetectionConfig::default());
            let mut comp = mgp_composite(mcfg, GpMbtlConfig::default(), DetectionConfig::default()).unwrap();
            for w in 0..m.num_trials() {
                let a = run_selector(&m, w, &mut direct, 12).unwrap();
                let b = run_selector(&m, w, &mut comp, 12).unwrap();
                assert_eq!(a.selected, b.selected);
                assert_eq!(a.trace, b.trace);
                assert_eq!(a.branches, b.branches);
            }
        }
    }

    #[test]
    fn composite_configuration() {
        let only_gp = SdMbtl::new(
            "single",
            vec!["NONE".into()],
            Box::new(ConstantDetector("NONE".into())),
            vec![Box::new(GpMbtlSelector::new(GpMbtlConfig::default()))],
        )
        .unwrap();
        let m = generate(&preset("3d/const-f/none-g/nondist/sigma0/levels3").unwrap()).unwrap();
        let mut only_gp = only_gp;
        let a = run_selector(&m, 0, &mut only_gp, 5).unwrap();
        let b = run_selector(&m, 0, &mut GpMbtlSelector::new(GpMbtlConfig::default()), 5).unwrap();
        assert_eq!(a.selected, b.selected);

        let mut broken = SdMbtl::new(
            "broken",
            vec!["NONE".into()],
            Box::new(ConstantDetector("MOUNTAIN".into())),
            vec![Box::new(GpMbtlSelector::new(GpMbtlConfig::default()))],
        )
        .unwrap();
        assert!(matches!(
            run_selector(&m, 0, &mut broken, 1),
            Err(Error::Configuration(_))
        ));
        assert!(SdMbtl::new(
            "mismatch",
            vec!["A".into(), "B".into()],
            Box::new(ConstantDetector("A".into())),
            vec![Box::new(RandomSelector::new(0))],
        )
        .is_err());

        let mut always_m = SdMbtl::new(
            "m-only",
            vec!["MOUNTAIN".into()],
            Box::new(ConstantDetector("MOUNTAIN".into())),
            vec![Box::new(MmbtlSelector::new(MmbtlConfig::default()))],
        )
        .unwrap();
        let a = run_selector(&m, 0, &mut always_m, 5).unwrap();
        let b = run_selector(&m, 0, &mut MmbtlSelector::new(MmbtlConfig::default()), 5).unwrap();
        assert_eq!(a.selected, b.selected);
    }
}
