//! Simultaneous boosting: reweight all tasks, pick the single weak learner
//! with the best weighted squared advantage across tasks, and give each task
//! its own step size. Weights live in log space so long runs cannot overflow
//! or underflow the double range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{MultitaskDataset, ProblemDims};

/// Relative smoothing applied to both sides of the step-size ratio, in units
/// of the task's total weight. Keeps alpha finite when a weak learner is
/// perfect on the reweighted sample.
pub const ALPHA_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("weak-learner class is empty")]
    EmptyClass,
    #[error("{0}")]
    Invalid(String),
}

/// A finite, index-enumerable family of {-1,+1}-valued weak learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeakLearnerClass {
    /// Single-feature projections x -> x_l for l in 0..d.
    Projections { d: usize },
}

impl WeakLearnerClass {
    pub fn projections(d: usize) -> Self {
        WeakLearnerClass::Projections { d }
    }

    pub fn len(&self) -> usize {
        match self {
            WeakLearnerClass::Projections { d } => *d,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eval(&self, index: usize, x: &[i8]) -> i8 {
        match self {
            WeakLearnerClass::Projections { .. } => x[index],
        }
    }
}

/// One boosting step of a task's ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTerm {
    pub index: usize,
    pub alpha: f64,
}

/// Per-task additive ensemble h(x) = sum_s alpha_s * x_{l_s}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEnsemble {
    pub d: usize,
    pub terms: Vec<EnsembleTerm>,
}

impl TaskEnsemble {
    pub fn empty(d: usize) -> Self {
        TaskEnsemble { d, terms: Vec::new() }
    }

    /// Raw score h(x), summed in term order.
    pub fn score(&self, x: &[i8]) -> Result<f64, BoostError> {
        if x.len() != self.d {
            return Err(BoostError::DimMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|t| t.alpha * f64::from(x[t.index]))
            .sum())
    }

    /// sign(h(x)) with sign(0) = +1.
    pub fn predict(&self, x: &[i8]) -> Result<i8, BoostError> {
        Ok(if self.score(x)? >= 0.0 { 1 } else { -1 })
    }
}

/// Diagnostics recorded after each boosting iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Index of the chosen weak learner.
    pub chosen_index: usize,
    /// Weighted normalized squared advantage of the chosen learner, in [0,1].
    pub gamma_s: f64,
    /// Per-task advantage of the chosen learner under the current weights.
    pub per_task_gamma: Vec<f64>,
    /// Exponential loss summed over all tasks and examples, after the update.
    pub exp_loss_after: f64,
    /// The same loss in log space (canonical; immune to underflow).
    pub log_exp_loss_after: f64,
    /// Pooled training error of sign(h) after the update.
    pub train_error_after: f64,
}

/// Output of a boosting run: one ensemble per task plus the full trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRun {
    pub dims: ProblemDims,
    pub class: WeakLearnerClass,
    pub t: usize,
    pub ensembles: Vec<TaskEnsemble>,
    pub trace: Vec<IterationRecord>,
}

impl BoostRun {
    /// Trace as CSV with full round-trip float precision.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,chosen_index,Gamma_s,exp_loss,train_error\n");
        for (s, rec) in self.trace.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?}\n",
                s + 1,
                rec.chosen_index,
                rec.gamma_s,
                rec.exp_loss_after,
                rec.train_error_after
            ));
        }
        out
    }
}

/// Log-space weights: log w_j = -y_j h(x_j) per example, plus per-task
/// log-totals computed by max-shifted summation.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    pub log_weights: Vec<Vec<f64>>,
    pub log_totals: Vec<f64>,
}

/// Normalize one task's log-weights: returns (p, log_total) where p sums to 1.
fn normalize_log_weights(log_w: &[f64]) -> (Vec<f64>, f64) {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let p: Vec<f64> = log_w
        .iter()
        .map(|&lw| {
            let u = (lw - max).exp();
            sum += u;
            u
        })
        .collect();
    let p = p.into_iter().map(|u| u / sum).collect();
    (p, max + sum.ln())
}

/// Current weights for the given ensembles on the given datasets.
pub fn compute_weights(
    ds: &MultitaskDataset,
    ensembles: &[TaskEnsemble],
) -> Result<WeightState, BoostError> {
    if ensembles.len() != ds.dims.n {
        return Err(BoostError::Invalid(format!(
            "expected {} ensembles, got {}",
            ds.dims.n,
            ensembles.len()
        )));
    }
    let mut log_weights = Vec::with_capacity(ds.dims.n);
    let mut log_totals = Vec::with_capacity(ds.dims.n);
    for (task, ens) in ds.tasks.iter().zip(ensembles) {
        let mut lws = Vec::with_capacity(task.examples.len());
        for ex in &task.examples {
            let h = ens.score(&ex.x)?;
            lws.push(-f64::from(ex.y) * h);
        }
        let (_, log_total) = normalize_log_weights(&lws);
        log_weights.push(lws);
        log_totals.push(log_total);
    }
    Ok(WeightState {
        log_weights,
        log_totals,
    })
}

// Above this working-set size the advantage kernel streams from DRAM, where
// the compact i8 layout beats the widened f64 copy; below it the f64 copy is
// faster. The i8 -> f64 widening is exact, so both layouts compute identical
// values and the switch never changes results.
const F64_KERNEL_MAX_BYTES: usize = 200_000_000;

// Per-task signed example matrix z[j*d + l] = y_j * x_{j,l}.
struct TaskKernel {
    m: usize,
    d: usize,
    z: Vec<i8>,
    zf: Option<Vec<f64>>,
    labels: Vec<i8>,
}

impl TaskKernel {
    fn new(task: &crate::data::TaskDataset, d: usize, widen: bool) -> Self {
        let m = task.examples.len();
        let mut z = Vec::with_capacity(m * d);
        let mut labels = Vec::with_capacity(m);
        for ex in &task.examples {
            let y = ex.y;
            z.extend(ex.x.iter().map(|&v| y * v));
            labels.push(ex.y);
        }
        let zf = widen.then(|| z.iter().map(|&v| f64::from(v)).collect());
        TaskKernel { m, d, z, zf, labels }
    }

    /// gamma[l] = sum_j p_j z_{j,l}, processing four examples per pass.
    fn advantages(&self, p: &[f64], gamma: &mut [f64]) {
        gamma.iter_mut().for_each(|g| *g = 0.0);
        match &self.zf {
            Some(zf) => advantages_quad(zf, p, self.d, gamma, |v| v),
            None => advantages_quad(&self.z, p, self.d, gamma, f64::from),
        }
    }
}

fn advantages_quad<T: Copy>(
    z: &[T],
    p: &[f64],
    d: usize,
    gamma: &mut [f64],
    widen: impl Fn(T) -> f64,
) {
    let mut rows = z.chunks_exact(4 * d);
    let mut coeffs = p.chunks_exact(4);
    for (quad, c) in (&mut rows).zip(&mut coeffs) {
        let (r0, rest) = quad.split_at(d);
        let (r1, rest) = rest.split_at(d);
        let (r2, r3) = rest.split_at(d);
        let (c0, c1, c2, c3) = (c[0], c[1], c[2], c[3]);
        for ((((g, &a), &b), &e), &f) in gamma.iter_mut().zip(r0).zip(r1).zip(r2).zip(r3) {
            *g += c0 * widen(a) + c1 * widen(b) + c2 * widen(e) + c3 * widen(f);
        }
    }
    for (row, &c) in rows.remainder().chunks_exact(d).zip(coeffs.remainder()) {
        for (g, &a) in gamma.iter_mut().zip(row) {
            *g += c * widen(a);
        }
    }
}

fn kernel_widens(dims: &ProblemDims) -> bool {
    dims.n
        .saturating_mul(dims.m)
        .saturating_mul(dims.d)
        .saturating_mul(8)
        <= F64_KERNEL_MAX_BYTES
}

fn alpha_from_split(p_eq: f64, p_ne: f64) -> f64 {
    0.5 * ((p_eq + ALPHA_SMOOTHING) / (p_ne + ALPHA_SMOOTHING)).ln()
}

/// Per-task step size for the chosen learner. `log_weights` are this task's
/// current log-weights; `agree[j]` is y_j * h*(x_j) in {-1,+1}.
pub fn compute_alpha(log_weights: &[f64], agree: &[i8]) -> f64 {
    let (p, _) = normalize_log_weights(log_weights);
    let mut p_eq = 0.0;
    let mut p_ne = 0.0;
    for (&pj, &a) in p.iter().zip(agree) {
        if a > 0 {
            p_eq += pj;
        } else {
            p_ne += pj;
        }
    }
    alpha_from_split(p_eq, p_ne)
}

/// Argmax of the weighted squared-advantage objective over the class.
/// Returns (chosen index, Gamma, per-task advantages of the chosen learner).
/// Ties break toward the smallest index.
pub fn select_weak_learner(
    ds: &MultitaskDataset,
    weights: &WeightState,
    class: &WeakLearnerClass,
) -> Result<(usize, f64, Vec<f64>), BoostError> {
    if class.is_empty() {
        return Err(BoostError::EmptyClass);
    }
    let WeakLearnerClass::Projections { d } = class;
    if *d != ds.dims.d {
        return Err(BoostError::DimMismatch {
            expected: ds.dims.d,
            got: *d,
        });
    }
    let widen = kernel_widens(&ds.dims);
    let kernels: Vec<TaskKernel> = ds
        .tasks
        .iter()
        .map(|task| TaskKernel::new(task, ds.dims.d, widen))
        .collect();
    let probs: Vec<Vec<f64>> = weights
        .log_weights
        .iter()
        .map(|lw| normalize_log_weights(lw).0)
        .collect();
    let mut gammas = vec![vec![0.0; ds.dims.d]; ds.dims.n];
    for ((kern, p), gamma) in kernels.iter().zip(&probs).zip(gammas.iter_mut()) {
        kern.advantages(p, gamma);
    }
    let (index, gamma_s) = argmax_objective(&weights.log_totals, &gammas, ds.dims.d);
    let per_task = gammas.iter().map(|g| g[index]).collect();
    Ok((index, gamma_s, per_task))
}

/// Shift-invariant objective argmax: obj[l] = sum_i W_i gamma_i(l)^2 with
/// W_i rescaled by the largest log-total. Returns (index, Gamma).
fn argmax_objective(log_totals: &[f64], gammas: &[Vec<f64>], d: usize) -> (usize, f64) {
    let max_lt = log_totals
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_totals.iter().map(|&lt| (lt - max_lt).exp()).collect();
    let denom: f64 = scaled.iter().sum();
    let mut obj = vec![0.0f64; d];
    for (w, gamma) in scaled.iter().zip(gammas) {
        for (o, &g) in obj.iter_mut().zip(gamma) {
            *o += w * g * g;
        }
    }
    let mut best = 0usize;
    for (l, &v) in obj.iter().enumerate() {
        if v > obj[best] {
            best = l;
        }
    }
    let gamma_s = (obj[best] / denom).clamp(0.0, 1.0);
    (best, gamma_s)
}

/// Number of boosting steps that drives the loss factor below eps/4 given a
/// per-step advantage floor: ceil((2/Gamma) ln(4/eps)).
pub fn steps_for_target(eps: f64, gamma_floor: f64) -> Result<usize, BoostError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(BoostError::Invalid(format!("eps must lie in (0,1), got {eps}")));
    }
    if !(gamma_floor > 0.0 && gamma_floor <= 1.0) {
        return Err(BoostError::Invalid(format!(
            "Gamma must lie in (0,1], got {gamma_floor}"
        )));
    }
    Ok(((2.0 / gamma_floor) * (4.0 / eps).ln()).ceil().max(1.0) as usize)
}

/// Run simultaneous boosting for t iterations and return the ensembles plus
/// the complete per-iteration trace. Deterministic, including tie-breaking.
pub fn boost(
    ds: &MultitaskDataset,
    class: &WeakLearnerClass,
    t: usize,
) -> Result<BoostRun, BoostError> {
    if t == 0 {
        return Err(BoostError::Invalid("t must be >= 1".into()));
    }
    if class.is_empty() {
        return Err(BoostError::EmptyClass);
    }
    let WeakLearnerClass::Projections { d } = class;
    if *d != ds.dims.d {
        return Err(BoostError::DimMismatch {
            expected: ds.dims.d,
            got: *d,
        });
    }
    let n = ds.dims.n;
    let d = ds.dims.d;
    let nm: usize = ds.tasks.iter().map(|task| task.examples.len()).sum();

    struct EngineTask {
        kernel: TaskKernel,
        margins: Vec<f64>,
        p: Vec<f64>,
        log_total: f64,
        terms: Vec<EnsembleTerm>,
        wrong: usize,
    }

    let widen = kernel_widens(&ds.dims);
    let mut tasks: Vec<EngineTask> = ds
        .tasks
        .par_iter()
        .map(|task| {
            let kernel = TaskKernel::new(task, d, widen);
            let m = kernel.m;
            EngineTask {
                kernel,
                margins: vec![0.0; m],
                p: vec![1.0 / m as f64; m],
                log_total: (m as f64).ln(),
                terms: Vec::with_capacity(t),
                wrong: 0,
            }
        })
        .collect();

    let mut gammas = vec![vec![0.0; d]; n];
    let mut trace: Vec<IterationRecord> = Vec::with_capacity(t);
    let mut prev_log_loss = (nm as f64).ln();

    for _s in 0..t {
        // advantages under the current weights
        tasks
            .par_iter()
            .zip(gammas.par_iter_mut())
            .for_each(|(task, gamma)| {
                task.kernel.advantages(&task.p, gamma);
            });

        let log_totals: Vec<f64> = tasks.iter().map(|task| task.log_total).collect();
        let (chosen, gamma_s) = argmax_objective(&log_totals, &gammas, d);
        let per_task_gamma: Vec<f64> = gammas.iter().map(|g| g[chosen]).collect();

        // per-task step, margin update, and weight refresh
        tasks.par_iter_mut().for_each(|task| {
            let m = task.kernel.m;
            let mut p_eq = 0.0;
            let mut p_ne = 0.0;
            for j in 0..m {
                let zj = task.kernel.z[j * d + chosen];
                if zj > 0 {
                    p_eq += task.p[j];
                } else {
                    p_ne += task.p[j];
                }
            }
            let alpha = alpha_from_split(p_eq, p_ne);
            task.terms.push(EnsembleTerm {
                index: chosen,
                alpha,
            });
            let mut wrong = 0usize;
            for j in 0..m {
                task.margins[j] += alpha * f64::from(task.kernel.z[j * d + chosen]);
                let mj = task.margins[j];
                if mj < 0.0 || (mj == 0.0 && task.kernel.labels[j] == -1) {
                    wrong += 1;
                }
            }
            task.wrong = wrong;
            // refresh normalized weights for the next round
            let max_lw = task
                .margins
                .iter()
                .map(|&mj| -mj)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..m {
                let u = (-task.margins[j] - max_lw).exp();
                task.p[j] = u;
                sum += u;
            }
            task.p.iter_mut().for_each(|pj| *pj /= sum);
            task.log_total = max_lw + sum.ln();
        });

        let new_totals: Vec<f64> = tasks.iter().map(|task| task.log_total).collect();
        let max_lt = new_totals
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let log_loss =
            max_lt + new_totals.iter().map(|&lt| (lt - max_lt).exp()).sum::<f64>().ln();
        let wrong_total: usize = tasks.iter().map(|task| task.wrong).sum();
        let train_error = wrong_total as f64 / nm as f64;

        debug_assert!(
            log_loss <= prev_log_loss + (1.0 - gamma_s / 2.0).ln() + 2e-9,
            "loss decay violated: {log_loss} vs {prev_log_loss} at Gamma={gamma_s}"
        );
        debug_assert!(train_error <= (log_loss - (nm as f64).ln()).exp() + 1e-15);
        prev_log_loss = log_loss;

        trace.push(IterationRecord {
            chosen_index: chosen,
            gamma_s,
            per_task_gamma,
            exp_loss_after: log_loss.exp(),
            log_exp_loss_after: log_loss,
            train_error_after: train_error,
        });
    }

    let ensembles = tasks
        .into_iter()
        .map(|task| TaskEnsemble {
            d,
            terms: task.terms,
        })
        .collect();
    Ok(BoostRun {
        dims: ds.dims,
        class: *class,
        t,
        ensembles,
        trace,
    })
}
