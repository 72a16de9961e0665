//! Error metrics, sample-size planning, the single-task baseline, and the
//! d-scaling sweep harness.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boosting::{self, BoostError, BoostRun, TaskEnsemble, WeakLearnerClass};
use crate::concepts::{
    build_multitask_instance, Concept, ConceptError, ConceptSpec, InputDistribution, SupportSpec,
};
use crate::data::{DataError, MultitaskDataset, ProblemDims, TaskDataset};
use crate::seed::{Purpose, SeedSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Concept(#[from] ConceptError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Anything that labels a hypercube point.
pub trait PointPredictor {
    fn predict_pm1(&self, x: &[i8]) -> Result<i8, EvalError>;
}

impl PointPredictor for TaskEnsemble {
    fn predict_pm1(&self, x: &[i8]) -> Result<i8, EvalError> {
        Ok(self.predict(x)?)
    }
}

impl PointPredictor for Concept {
    fn predict_pm1(&self, x: &[i8]) -> Result<i8, EvalError> {
        Ok(self.eval(x)?)
    }
}

impl<P: PointPredictor> PointPredictor for &P {
    fn predict_pm1(&self, x: &[i8]) -> Result<i8, EvalError> {
        (*self).predict_pm1(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Train,
    Holdout,
}

/// Per-task misclassification rates and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub per_task_error: Vec<f64>,
    pub avg_error: f64,
    pub kind: ErrorKind,
}

impl ErrorReport {
    fn from_per_task(per_task_error: Vec<f64>, kind: ErrorKind) -> Self {
        let avg_error = per_task_error.iter().sum::<f64>() / per_task_error.len() as f64;
        ErrorReport {
            per_task_error,
            avg_error,
            kind,
        }
    }
}

/// Per-task error of one predictor per task on an existing dataset.
pub fn evaluate_on_dataset<P: PointPredictor>(
    predictors: &[P],
    ds: &MultitaskDataset,
) -> Result<ErrorReport, EvalError> {
    if predictors.len() != ds.dims.n {
        return Err(EvalError::Invalid(format!(
            "expected {} predictors, got {}",
            ds.dims.n,
            predictors.len()
        )));
    }
    let mut per_task = Vec::with_capacity(ds.dims.n);
    for (pred, task) in predictors.iter().zip(&ds.tasks) {
        if task.examples.is_empty() {
            return Err(EvalError::Invalid(format!("task {} is empty", task.task_id)));
        }
        let mut wrong = 0usize;
        for ex in &task.examples {
            if pred.predict_pm1(&ex.x)? != ex.y {
                wrong += 1;
            }
        }
        per_task.push(wrong as f64 / task.examples.len() as f64);
    }
    Ok(ErrorReport::from_per_task(per_task, ErrorKind::Train))
}

/// Holdout error against fresh samples: draws n_test labeled points per task
/// from the generating (concept, distribution) pairs.
pub fn evaluate_generated<P: PointPredictor>(
    predictors: &[P],
    concepts: &[Concept],
    dists: &[InputDistribution],
    n_test: usize,
    seed: SeedSpec,
) -> Result<ErrorReport, EvalError> {
    let n = concepts.len();
    if predictors.len() != n {
        return Err(EvalError::Invalid(format!(
            "expected {n} predictors, got {}",
            predictors.len()
        )));
    }
    if dists.is_empty() || (dists.len() != 1 && dists.len() != n) {
        return Err(EvalError::Invalid(format!(
            "need 1 or {n} distributions, got {}",
            dists.len()
        )));
    }
    if n_test == 0 {
        return Err(EvalError::Invalid("n_test must be >= 1".into()));
    }
    let mut per_task = Vec::with_capacity(n);
    for (i, (pred, concept)) in predictors.iter().zip(concepts).enumerate() {
        let task_id = i + 1;
        let dist = &dists[i % dists.len()];
        let mut rng = seed.stream(task_id, Purpose::Holdout);
        let mut wrong = 0usize;
        for _ in 0..n_test {
            let x = dist.sample(&mut rng);
            let y = concept.eval(&x)?;
            if pred.predict_pm1(&x)? != y {
                wrong += 1;
            }
        }
        per_task.push(wrong as f64 / n_test as f64);
    }
    Ok(ErrorReport::from_per_task(per_task, ErrorKind::Holdout))
}

/// Inputs echoed into a [`SampleSizePlan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanInputs {
    pub k: usize,
    pub gamma: f64,
    pub eps: f64,
    pub delta: f64,
    pub d: usize,
}

/// Constants and conventions applied by the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConstants {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub log_convention: String,
}

/// Sample sizes derived from the learning-theory bounds, with the hidden
/// constants exposed as configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizePlan {
    pub m_per_task: usize,
    pub nm_total: usize,
    pub t: usize,
    pub inputs: PlanInputs,
    pub constants: PlanConstants,
}

/// m = ceil(C1 k^2 ln^2(1/eps) / (gamma^2 eps)),
/// nm = ceil(C2 (k^2 ln(d) ln(1/eps) / (gamma^2 eps) + ln(1/delta)/eps)),
/// t  = steps for loss target eps/4 at advantage floor gamma^2/k^2.
/// Natural logs throughout; nm is clamped up to at least m.
pub fn plan_sample_sizes(
    k: usize,
    gamma: f64,
    eps: f64,
    delta: f64,
    d: usize,
    c1: f64,
    c2: f64,
) -> Result<SampleSizePlan, EvalError> {
    if k == 0 || d == 0 {
        return Err(EvalError::Invalid(format!("k and d must be >= 1, got k={k} d={d}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(EvalError::Invalid(format!("gamma must lie in (0,1], got {gamma}")));
    }
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(EvalError::Invalid(format!(
            "eps and delta must lie in (0,1), got eps={eps} delta={delta}"
        )));
    }
    if c1 <= 0.0 || c2 <= 0.0 {
        return Err(EvalError::Invalid("constants must be positive".into()));
    }
    let k2 = (k * k) as f64;
    let g2 = gamma * gamma;
    let log_inv_eps = (1.0 / eps).ln();
    let m_raw = c1 * k2 * log_inv_eps * log_inv_eps / (g2 * eps);
    let nm_raw = c2 * (k2 * (d as f64).ln() * log_inv_eps / (g2 * eps) + (1.0 / delta).ln() / eps);
    let m_per_task = (m_raw.ceil() as usize).max(1);
    let nm_total = (nm_raw.ceil() as usize).max(m_per_task);
    let t = boosting::steps_for_target(eps / 4.0, g2 / k2)?;
    Ok(SampleSizePlan {
        m_per_task,
        nm_total,
        t,
        inputs: PlanInputs {
            k,
            gamma,
            eps,
            delta,
            d,
        },
        constants: PlanConstants {
            c1,
            c2,
            log_convention: "natural".to_string(),
        },
    })
}

/// Boost a single task in isolation (the n = 1 special case).
pub fn single_task_baseline(
    task: &TaskDataset,
    d: usize,
    k: usize,
    t: usize,
) -> Result<BoostRun, EvalError> {
    let m = task.examples.len();
    let one = MultitaskDataset::new(
        ProblemDims::new(d, k, 1, m)?,
        vec![TaskDataset {
            task_id: 1,
            examples: task.examples.clone(),
        }],
    )?;
    Ok(boosting::boost(&one, &WeakLearnerClass::projections(d), t)?)
}

/// How many boosting steps a sweep cell runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", untagged)]
pub enum StepSpec {
    /// From the loss-target formula at the cell's (k, gamma, epsilon).
    Auto(AutoTag),
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Default for StepSpec {
    fn default() -> Self {
        StepSpec::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub d: Vec<usize>,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepTraining {
    pub epsilon: f64,
    pub delta: f64,
    pub t: StepSpec,
}

impl Default for SweepTraining {
    fn default() -> Self {
        SweepTraining {
            epsilon: 0.05,
            delta: 0.01,
            t: StepSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConstants {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

impl Default for SweepConstants {
    fn default() -> Self {
        SweepConstants { c1: 1.0, c2: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepHoldout {
    pub n_test: usize,
}

impl Default for SweepHoldout {
    fn default() -> Self {
        SweepHoldout { n_test: 500 }
    }
}

/// Declarative sweep: a grid of (d, n, m, k) cells, run per seed with the
/// odd-majority concept family over a random shared V and uniform inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: SweepGrid,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub constants: SweepConstants,
    #[serde(default)]
    pub training: SweepTraining,
    #[serde(default)]
    pub holdout: SweepHoldout,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub gamma: f64,
    pub seed: u64,
    pub method: String,
    pub avg_error: Option<f64>,
    pub wall_ms: Option<f64>,
    pub t: usize,
    pub gamma_min: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,n,m,k,gamma,seed,method,avg_error,wall_ms,t,Gamma_min,status\n");
        for r in &self.rows {
            let opt = |v: &Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{:?},{},{},{},{},{},{},{}\n",
                r.d,
                r.n,
                r.m,
                r.k,
                r.gamma,
                r.seed,
                r.method,
                opt(&r.avg_error),
                opt(&r.wall_ms),
                r.t,
                opt(&r.gamma_min),
                r.status
            ));
        }
        out
    }
}

fn trace_gamma_min(run: &BoostRun) -> Option<f64> {
    run.trace
        .iter()
        .map(|rec| rec.gamma_s)
        .fold(None, |acc, g| Some(acc.map_or(g, |a: f64| a.min(g))))
}

struct CellOutcome {
    multitask: Result<(f64, f64, f64), EvalError>,
    baseline: Result<(f64, f64, f64), EvalError>,
    t: usize,
    gamma: f64,
}

fn run_cell(
    d: usize,
    n: usize,
    m: usize,
    k: usize,
    seed_value: u64,
    cfg: &SweepConfig,
) -> Result<CellOutcome, EvalError> {
    if k % 2 == 0 {
        return Err(EvalError::Invalid(format!(
            "grid k={k} must be odd for the majority family"
        )));
    }
    let gamma = 1.0 / (k as f64).sqrt();
    let t = match cfg.training.t {
        StepSpec::Fixed(t) => t,
        StepSpec::Auto(_) => {
            boosting::steps_for_target(cfg.training.epsilon, gamma * gamma / (k * k) as f64)?
        }
    };
    let seed = SeedSpec::new(seed_value);
    let dims = ProblemDims::new(d, k, n, m)?;
    let shared_v = crate::seed::subset(&mut seed.stream(0, Purpose::SharedSupport), d, k);
    let specs = vec![ConceptSpec::Majority {
        support: SupportSpec::Explicit(shared_v.clone()),
    }];
    let dists = vec![InputDistribution::uniform(d)];
    let (ds, concepts) = build_multitask_instance(&dims, &shared_v, &specs, &dists, seed)?;

    let multitask = (|| {
        let start = Instant::now();
        let run = boosting::boost(&ds, &WeakLearnerClass::projections(d), t)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let report =
            evaluate_generated(&run.ensembles, &concepts, &dists, cfg.holdout.n_test, seed)?;
        Ok((report.avg_error, wall_ms, trace_gamma_min(&run).unwrap_or(f64::NAN)))
    })();

    let baseline = (|| {
        let start = Instant::now();
        let runs: Vec<Result<BoostRun, EvalError>> = ds
            .tasks
            .par_iter()
            .map(|task| single_task_baseline(task, d, k, t))
            .collect();
        let mut ensembles = Vec::with_capacity(n);
        let mut g_min = f64::INFINITY;
        for run in runs {
            let run = run?;
            if let Some(g) = trace_gamma_min(&run) {
                g_min = g_min.min(g);
            }
            ensembles.push(run.ensembles.into_iter().next().expect("one ensemble"));
        }
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let report =
            evaluate_generated(&ensembles, &concepts, &dists, cfg.holdout.n_test, seed)?;
        Ok((report.avg_error, wall_ms, g_min))
    })();

    Ok(CellOutcome {
        multitask,
        baseline,
        t,
        gamma,
    })
}

/// Structural validation of a sweep config, for callers that want malformed
/// grids rejected before any cell runs.
pub fn validate_sweep_config(cfg: &SweepConfig) -> Result<(), EvalError> {
    for &v in cfg.grid.d.iter().chain(&cfg.grid.n).chain(&cfg.grid.m).chain(&cfg.grid.k) {
        if v == 0 {
            return Err(EvalError::Invalid("grid: entries must be >= 1".into()));
        }
    }
    for &k in &cfg.grid.k {
        if k % 2 == 0 {
            return Err(EvalError::Invalid(format!(
                "grid.k: {k} is even; the majority family needs odd k"
            )));
        }
        for &d in &cfg.grid.d {
            if k > d {
                return Err(EvalError::Invalid(format!("grid: k={k} exceeds d={d}")));
            }
        }
    }
    let has_cells = !cfg.grid.d.is_empty()
        && !cfg.grid.n.is_empty()
        && !cfg.grid.m.is_empty()
        && !cfg.grid.k.is_empty();
    if has_cells && cfg.seeds.is_empty() {
        return Err(EvalError::Invalid("seeds: must list at least one seed".into()));
    }
    if !(cfg.training.epsilon > 0.0 && cfg.training.epsilon < 1.0) {
        return Err(EvalError::Invalid(format!(
            "training.epsilon: must lie in (0,1), got {}",
            cfg.training.epsilon
        )));
    }
    if cfg.holdout.n_test == 0 {
        return Err(EvalError::Invalid("holdout.n_test: must be >= 1".into()));
    }
    Ok(())
}

/// Run every grid cell for every seed. Each (cell, seed) yields a multitask
/// row and a baseline row; failures become rows with status != ok and the
/// sweep continues. Rows appear in grid order (d, n, m, k, seed, method).
pub fn run_sweep(cfg: &SweepConfig) -> SweepTable {
    let mut rows = Vec::new();
    for &d in &cfg.grid.d {
        for &n in &cfg.grid.n {
            for &m in &cfg.grid.m {
                for &k in &cfg.grid.k {
                    for &seed in &cfg.seeds {
                        push_cell_rows(&mut rows, d, n, m, k, seed, cfg);
                    }
                }
            }
        }
    }
    SweepTable { rows }
}

fn push_cell_rows(
    rows: &mut Vec<SweepRow>,
    d: usize,
    n: usize,
    m: usize,
    k: usize,
    seed: u64,
    cfg: &SweepConfig,
) {
    let base_row = |method: &str| SweepRow {
        d,
        n,
        m,
        k,
        gamma: 1.0 / (k as f64).sqrt(),
        seed,
        method: method.to_string(),
        avg_error: None,
        wall_ms: None,
        t: 0,
        gamma_min: None,
        status: String::new(),
    };
    match run_cell(d, n, m, k, seed, cfg) {
        Err(e) => {
            for method in ["multitask", "baseline"] {
                let mut row = base_row(method);
                row.status = sanitize_status(&format!("error: {e}"));
                rows.push(row);
            }
        }
        Ok(outcome) => {
            for (method, result) in [
                ("multitask", &outcome.multitask),
                ("baseline", &outcome.baseline),
            ] {
                let mut row = base_row(method);
                row.t = outcome.t;
                row.gamma = outcome.gamma;
                match result {
                    Ok((avg_error, wall_ms, gamma_min)) => {
                        row.avg_error = Some(*avg_error);
                        row.wall_ms = Some(*wall_ms);
                        row.gamma_min = Some(*gamma_min);
                        row.status = "ok".to_string();
                    }
                    Err(e) => {
                        row.status = sanitize_status(&format!("error: {e}"));
                    }
                }
                rows.push(row);
            }
        }
    }
}

fn sanitize_status(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::HypercubeExample;

    fn constant_label_task(task_id: usize, d: usize, m: usize, wrong: usize) -> TaskDataset {
        // labels: `wrong` examples are -1 (empty ensemble predicts +1)
        TaskDataset {
            task_id,
            examples: (0..m)
                .map(|j| {
                    HypercubeExample::new(vec![1; d], if j < wrong { -1 } else { 1 }).unwrap()
                })
                .collect(),
        }
    }

    #[test]
    fn ground_truth_concept_has_zero_error() {
        let concept = Concept::Parity(crate::concepts::ParityConcept::new(6, vec![1, 3]).unwrap());
        let dists = vec![InputDistribution::uniform(6)];
        let report = evaluate_generated(
            &[concept.clone()],
            &[concept],
            &dists,
            500,
            SeedSpec::new(3),
        )
        .unwrap();
        assert_eq!(report.avg_error, 0.0);
        assert_eq!(report.kind, ErrorKind::Holdout);
    }

    #[test]
    fn constant_predictor_on_all_negative_labels() {
        let ds = MultitaskDataset::new(
            ProblemDims::new(3, 1, 1, 5).unwrap(),
            vec![constant_label_task(1, 3, 5, 5)],
        )
        .unwrap();
        let report = evaluate_on_dataset(&[TaskEnsemble::empty(3)], &ds).unwrap();
        assert_eq!(report.avg_error, 1.0);
    }

    #[test]
    fn avg_error_is_mean() {
        let ds = MultitaskDataset::new(
            ProblemDims::new(3, 1, 2, 10).unwrap(),
            vec![
                constant_label_task(1, 3, 10, 1),
                constant_label_task(2, 3, 10, 3),
            ],
        )
        .unwrap();
        let report =
            evaluate_on_dataset(&[TaskEnsemble::empty(3), TaskEnsemble::empty(3)], &ds).unwrap();
        assert_eq!(report.per_task_error, vec![0.1, 0.3]);
        assert!((report.avg_error - 0.2).abs() < 1e-15);
    }

    #[test]
    fn plan_frozen_arithmetic() {
        let plan =
            plan_sample_sizes(5, 1.0 / 5f64.sqrt(), 0.05, 0.01, 1024, 1.0, 1.0).unwrap();
        assert_eq!(plan.m_per_task, 22437);
        assert_eq!(plan.nm_total, 52005);
        assert_eq!(plan.t, 1443);
        assert_eq!(plan.constants.log_convention, "natural");
    }

    #[test]
    fn plan_monotonicity() {
        let base = plan_sample_sizes(5, 0.4, 0.05, 0.01, 1024, 1.0, 1.0).unwrap();
        let smaller_eps = plan_sample_sizes(5, 0.4, 0.01, 0.01, 1024, 1.0, 1.0).unwrap();
        assert!(smaller_eps.m_per_task >= base.m_per_task);
        let bigger_k = plan_sample_sizes(7, 0.4, 0.05, 0.01, 1024, 1.0, 1.0).unwrap();
        assert!(bigger_k.m_per_task >= base.m_per_task);
        let bigger_d = plan_sample_sizes(5, 0.4, 0.05, 0.01, 2048, 1.0, 1.0).unwrap();
        assert!(bigger_d.nm_total >= base.nm_total);
        assert_eq!(bigger_d.m_per_task, base.m_per_task);
    }

    #[test]
    fn baseline_equals_one_task_boost() {
        let task = TaskDataset {
            task_id: 4,
            examples: vec![
                HypercubeExample::new(vec![1, -1, 1], 1).unwrap(),
                HypercubeExample::new(vec![-1, 1, -1], -1).unwrap(),
                HypercubeExample::new(vec![1, 1, -1], 1).unwrap(),
            ],
        };
        let run = single_task_baseline(&task, 3, 1, 5).unwrap();
        let ds = MultitaskDataset::new(
            ProblemDims::new(3, 1, 1, 3).unwrap(),
            vec![TaskDataset {
                task_id: 1,
                examples: task.examples.clone(),
            }],
        )
        .unwrap();
        let direct = boosting::boost(&ds, &WeakLearnerClass::projections(3), 5).unwrap();
        assert_eq!(run.ensembles, direct.ensembles);
    }

    #[test]
    fn baseline_dictator_fits_in_one_round() {
        let concept = Concept::Halfspace(
            crate::concepts::SparseHalfspace::new(12, vec![4], vec![1.0]).unwrap(),
        );
        let dist = InputDistribution::uniform(12);
        let task =
            crate::concepts::sample_labeled_task(&concept, &dist, 10, 1, SeedSpec::new(40))
                .unwrap();
        let run = single_task_baseline(&task, 12, 1, 1).unwrap();
        assert_eq!(run.trace[0].train_error_after, 0.0);
    }

    #[test]
    fn train_evaluation_matches_trace() {
        let ds = MultitaskDataset::new(
            ProblemDims::new(4, 2, 2, 6).unwrap(),
            vec![
                TaskDataset {
                    task_id: 1,
                    examples: (0..6)
                        .map(|j| {
                            let x: Vec<i8> =
                                (0..4).map(|c| if (j + c) % 3 == 0 { 1 } else { -1 }).collect();
                            let y = x[1];
                            HypercubeExample::new(x, y).unwrap()
                        })
                        .collect(),
                },
                TaskDataset {
                    task_id: 2,
                    examples: (0..6)
                        .map(|j| {
                            let x: Vec<i8> =
                                (0..4).map(|c| if (j * c) % 5 < 2 { 1 } else { -1 }).collect();
                            let y = x[2];
                            HypercubeExample::new(x, y).unwrap()
                        })
                        .collect(),
                },
            ],
        )
        .unwrap();
        let run = boosting::boost(&ds, &WeakLearnerClass::projections(4), 7).unwrap();
        let report = evaluate_on_dataset(&run.ensembles, &ds).unwrap();
        // pooled trace error equals the task mean here because m is equal
        assert_eq!(report.avg_error, run.trace.last().unwrap().train_error_after);
    }

    fn tiny_sweep_config(seeds: Vec<u64>) -> SweepConfig {
        SweepConfig {
            grid: SweepGrid {
                d: vec![8],
                n: vec![2],
                m: vec![12],
                k: vec![3],
            },
            seeds,
            constants: SweepConstants::default(),
            training: SweepTraining {
                epsilon: 0.2,
                delta: 0.1,
                t: StepSpec::Fixed(15),
            },
            holdout: SweepHoldout { n_test: 50 },
            output: None,
        }
    }

    #[test]
    fn sweep_one_cell_two_rows_per_seed() {
        let table = run_sweep(&tiny_sweep_config(vec![1, 2]));
        assert_eq!(table.rows.len(), 4);
        assert_eq!(table.rows[0].method, "multitask");
        assert_eq!(table.rows[1].method, "baseline");
        assert!(table.rows.iter().all(|r| r.status == "ok"));
    }

    #[test]
    fn sweep_empty_grid_empty_table() {
        let mut cfg = tiny_sweep_config(vec![1]);
        cfg.grid.d.clear();
        let table = run_sweep(&cfg);
        assert!(table.rows.is_empty());
        assert_eq!(
            table.to_csv(),
            "d,n,m,k,gamma,seed,method,avg_error,wall_ms,t,Gamma_min,status\n"
        );
    }

    #[test]
    fn sweep_reproducible_modulo_wall_ms() {
        let cfg = tiny_sweep_config(vec![7]);
        let strip = |csv: String| -> String {
            csv.lines()
                .map(|line| {
                    let cols: Vec<&str> = line.split(',').collect();
                    cols.iter()
                        .enumerate()
                        .filter(|(i, _)| *i != 8)
                        .map(|(_, c)| *c)
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        let a = strip(run_sweep(&cfg).to_csv());
        let b = strip(run_sweep(&cfg).to_csv());
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_even_k_is_reported_not_fatal() {
        let mut cfg = tiny_sweep_config(vec![1]);
        cfg.grid.k = vec![2];
        let table = run_sweep(&cfg);
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows.iter().all(|r| r.status.starts_with("error:")));
    }
}
