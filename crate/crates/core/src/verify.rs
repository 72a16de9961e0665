//! Runtime invariant suites: everything the library promises that can be
//! checked by direct computation, packaged so the CLI can run it on demand.
//! The boosting checks replay runs from scratch rather than trusting the
//! engine's incremental state.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boosting::{self, BoostRun, TaskEnsemble, WeakLearnerClass};
use crate::concepts::{
    self, gen_majority_halfspace, margin_of_weights, ConceptSpec, InputDistribution,
    RandomMarginOptions, SupportSpec,
};
use crate::data::{HypercubeExample, MultitaskDataset, ProblemDims, TaskDataset};
use crate::hardness::{self, EncodingParams};
use crate::seed::{self, Purpose, SeedSpec};

/// A replay violation, anchored to the 1-based boosting iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub iteration: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: u64,
    pub violations: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str, checks: u64, violations: Vec<String>) -> Self {
        SuiteReport {
            suite: suite.to_string(),
            passed: violations.is_empty(),
            checks,
            violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
    pub all_passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    LossDecay,
    Discriminator,
    Hiding,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "loss-decay" => Ok(Suite::LossDecay),
            "discriminator" => Ok(Suite::Discriminator),
            "hiding" => Ok(Suite::Hiding),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite {other:?}; expected loss-decay, discriminator, hiding, or all"
            )),
        }
    }
}

/// Run one suite (or all of them) with the given master seed.
pub fn run(suite: Suite, seed: u64) -> VerifyReport {
    let suites = match suite {
        Suite::LossDecay => vec![loss_decay_suite(seed)],
        Suite::Discriminator => vec![discriminator_suite(seed)],
        Suite::Hiding => vec![hiding_suite()],
        Suite::All => vec![
            loss_decay_suite(seed),
            discriminator_suite(seed),
            hiding_suite(),
            weak_floor_suite(seed),
            margins_suite(seed),
            roundtrip_suite(seed),
            reconstruction_suite(seed),
            ae_coverage_suite(seed),
        ],
    };
    let all_passed = suites.iter().all(|s| s.passed);
    VerifyReport { suites, all_passed }
}

// ---------------------------------------------------------------------------
// boosting replay

/// Recompute a run's losses, advantages, and argmaxes from the ensembles and
/// data alone, and check them against the recorded trace and the loss-decay
/// bound. Plain nested loops, no shared kernel with the engine.
pub fn replay_check(ds: &MultitaskDataset, run: &BoostRun) -> (u64, Vec<Violation>) {
    let mut checks = 0u64;
    let mut violations = Vec::new();
    let n = ds.dims.n;
    let d = ds.dims.d;
    let nm: usize = ds.tasks.iter().map(|task| task.examples.len()).sum();
    let mut report = |iteration: usize, detail: String| {
        violations.push(Violation { iteration, detail });
    };

    let prefix = |s: usize| -> Vec<TaskEnsemble> {
        run.ensembles
            .iter()
            .map(|ens| TaskEnsemble {
                d: ens.d,
                terms: ens.terms[..s].to_vec(),
            })
            .collect()
    };

    let mut prev_log_loss = (nm as f64).ln();
    for s in 0..run.t {
        let rec = &run.trace[s];
        let before = boosting::compute_weights(ds, &prefix(s)).expect("consistent shapes");

        // normalized weights per task, straightforwardly
        let probs: Vec<Vec<f64>> = before
            .log_weights
            .iter()
            .map(|lws| {
                let max = lws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let us: Vec<f64> = lws.iter().map(|&lw| (lw - max).exp()).collect();
                let sum: f64 = us.iter().sum();
                us.into_iter().map(|u| u / sum).collect()
            })
            .collect();
        let max_lt = before
            .log_totals
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = before.log_totals.iter().map(|&lt| (lt - max_lt).exp()).collect();
        let denom: f64 = scaled.iter().sum();

        let objective = |l: usize| -> (f64, Vec<f64>) {
            let mut total = 0.0;
            let mut gammas = Vec::with_capacity(n);
            for (i, task) in ds.tasks.iter().enumerate() {
                let mut g = 0.0;
                for (j, ex) in task.examples.iter().enumerate() {
                    g += probs[i][j] * f64::from(ex.y) * f64::from(ex.x[l]);
                }
                total += scaled[i] * g * g;
                gammas.push(g);
            }
            (total, gammas)
        };

        let mut best = 0usize;
        let mut best_obj = f64::NEG_INFINITY;
        for l in 0..d {
            let (obj, _) = objective(l);
            if obj > best_obj {
                best_obj = obj;
                best = l;
            }
        }
        checks += 1;
        if best != rec.chosen_index {
            report(
                s + 1,
                format!(
                    "chosen index {} is not the replayed argmax {}",
                    rec.chosen_index, best
                ),
            );
        }
        let (obj_at_chosen, gammas) = objective(rec.chosen_index);
        let gamma_hat = obj_at_chosen / denom;
        checks += 1;
        if (gamma_hat - rec.gamma_s).abs() > 1e-9 {
            report(
                s + 1,
                format!("recorded Gamma {} vs replayed {}", rec.gamma_s, gamma_hat),
            );
        }
        checks += 1;
        if gammas
            .iter()
            .zip(&rec.per_task_gamma)
            .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            report(s + 1, "per-task advantages disagree with replay".to_string());
        }

        // loss after the update, from scratch
        let after = boosting::compute_weights(ds, &prefix(s + 1)).expect("consistent shapes");
        let max_lt = after
            .log_totals
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let log_loss = max_lt
            + after
                .log_totals
                .iter()
                .map(|&lt| (lt - max_lt).exp())
                .sum::<f64>()
                .ln();
        checks += 1;
        if (log_loss - rec.log_exp_loss_after).abs() > 1e-9 {
            report(
                s + 1,
                format!(
                    "recorded log-loss {} vs replayed {}",
                    rec.log_exp_loss_after, log_loss
                ),
            );
        }
        // the decay bound itself, in log space
        checks += 1;
        if log_loss > prev_log_loss + (1.0 - rec.gamma_s / 2.0).ln() + 1e-9_f64.ln_1p() + 1e-12 {
            report(
                s + 1,
                format!(
                    "loss decay violated: log L_s = {log_loss}, bound = {}",
                    prev_log_loss + (1.0 - rec.gamma_s / 2.0).ln()
                ),
            );
        }
        prev_log_loss = log_loss;

        // training error from scratch, and the error-vs-loss bound
        let ens_after = prefix(s + 1);
        let mut wrong = 0usize;
        for (task, ens) in ds.tasks.iter().zip(&ens_after) {
            for ex in &task.examples {
                if ens.predict(&ex.x).expect("dims match") != ex.y {
                    wrong += 1;
                }
            }
        }
        let err = wrong as f64 / nm as f64;
        checks += 1;
        if err != rec.train_error_after {
            report(
                s + 1,
                format!(
                    "recorded train error {} vs replayed {}",
                    rec.train_error_after, err
                ),
            );
        }
        checks += 1;
        if err > (log_loss - (nm as f64).ln()).exp() + 1e-12 {
            report(s + 1, "training error exceeds exp-loss bound".to_string());
        }
    }

    // final error against the product bound
    let log_bound: f64 = run
        .trace
        .iter()
        .map(|rec| (1.0 - rec.gamma_s / 2.0).ln())
        .sum();
    let final_err = run.trace.last().map_or(0.0, |rec| rec.train_error_after);
    checks += 1;
    if final_err > 0.0 && final_err.ln() > log_bound + 1e-9 {
        report(
            run.t,
            format!(
                "final train error {final_err} exceeds the product bound exp({log_bound})"
            ),
        );
    }
    (checks, violations)
}

fn mixed_distributions(d: usize, n: usize, rng: &mut impl rand_core::RngCore) -> Vec<InputDistribution> {
    (0..n)
        .map(|i| match i % 3 {
            0 => InputDistribution::uniform(d),
            1 => {
                let p: Vec<f64> = (0..d).map(|_| 0.2 + 0.6 * seed::unit_f64(rng)).collect();
                InputDistribution::product_bias(p).expect("valid biases")
            }
            _ => {
                let support = 2 + seed::below(rng, 6);
                let points: Vec<Vec<i8>> = (0..support)
                    .map(|_| {
                        let mut x = vec![0i8; d];
                        seed::fill_signs(rng, &mut x);
                        x
                    })
                    .collect();
                let probs = vec![1.0 / support as f64; support];
                InputDistribution::finite_support(points, probs).expect("valid support")
            }
        })
        .collect()
}

fn boost_instance(seed_value: u64, idx: u64) -> (MultitaskDataset, Vec<concepts::Concept>, f64) {
    let spec = SeedSpec::new(seed_value ^ (idx.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    let (d, k, n, m) = (60usize, 5usize, 6usize, 30usize);
    let dims = ProblemDims::new(d, k, n, m).unwrap();
    let mut rng = spec.stream(0, Purpose::SharedSupport);
    let shared = seed::subset(&mut rng, d, k);
    let specs = vec![
        ConceptSpec::Majority {
            support: SupportSpec::RandomSubset { size: 3 },
        },
        ConceptSpec::RandomMargin {
            support: SupportSpec::RandomSubset { size: 3 },
            gamma_min: 0.3,
            max_abs_weight: 3,
        },
        ConceptSpec::Majority {
            support: SupportSpec::RandomSubset { size: 5 },
        },
    ];
    let dists = mixed_distributions(d, n, &mut rng);
    let (ds, concepts) =
        concepts::build_multitask_instance(&dims, &shared, &specs, &dists, spec).unwrap();
    let gamma_min = concepts
        .iter()
        .map(|c| match c {
            concepts::Concept::Halfspace(h) => h.margin(),
            concepts::Concept::Parity(_) => 1.0,
        })
        .fold(f64::INFINITY, f64::min);
    (ds, concepts, gamma_min)
}

fn loss_decay_suite(seed_value: u64) -> SuiteReport {
    let mut checks = 0u64;
    let mut violations = Vec::new();
    for idx in 0..6u64 {
        let (ds, _, _) = boost_instance(seed_value, idx);
        let run = boosting::boost(&ds, &WeakLearnerClass::projections(ds.dims.d), 40)
            .expect("boost runs");
        let (c, vs) = replay_check(&ds, &run);
        checks += c;
        for v in vs {
            violations.push(format!("instance {idx} iteration {}: {}", v.iteration, v.detail));
        }
    }
    SuiteReport::new("loss-decay", checks, violations)
}

fn discriminator_suite(seed_value: u64) -> SuiteReport {
    let spec = SeedSpec::new(seed_value);
    let mut rng = spec.stream(1, Purpose::Concept);
    let mut checks = 0u64;
    let mut violations = Vec::new();
    for trial in 0..400 {
        let d = 8 + seed::below(&mut rng, 25);
        let k = 1 + seed::below(&mut rng, 8);
        let k = k.min(d);
        // rejection-sample a valid (positive-margin) integer halfspace
        let (support, weights, margin) = loop {
            let support = seed::subset(&mut rng, d, k);
            let weights: Vec<f64> = (0..k)
                .map(|_| {
                    let mag = 1 + seed::below(&mut rng, 3) as u32;
                    f64::from(mag) * f64::from(seed::sign(&mut rng))
                })
                .collect();
            let margin = margin_of_weights(&weights).expect("guarded size");
            if margin > 0.0 {
                break (support, weights, margin);
            }
        };
        let h = concepts::SparseHalfspace::new(d, support, weights).expect("valid");
        let n_points = 1 + seed::below(&mut rng, 64);
        let points: Vec<Vec<i8>> = (0..n_points)
            .map(|_| {
                let mut x = vec![0i8; d];
                seed::fill_signs(&mut rng, &mut x);
                x
            })
            .collect();
        let mut best = 0.0f64;
        for l in 0..d {
            let mut corr = 0.0;
            for x in &points {
                corr += f64::from(h.eval(x).expect("dims")) * f64::from(x[l]);
            }
            best = best.max((corr / n_points as f64).abs());
        }
        let floor = margin / (h.support().len() as f64).sqrt();
        checks += 1;
        if best < floor - 1e-12 {
            violations.push(format!(
                "trial {trial}: best correlation {best} below floor {floor}"
            ));
        }
    }
    SuiteReport::new("discriminator", checks, violations)
}

fn weak_floor_suite(seed_value: u64) -> SuiteReport {
    let mut checks = 0u64;
    let mut violations = Vec::new();
    for idx in 0..12u64 {
        let (ds, _, gamma_min) = boost_instance(seed_value.wrapping_add(977), idx);
        let k = ds.dims.k;
        let floor = gamma_min * gamma_min / (k * k) as f64;
        let run = boosting::boost(&ds, &WeakLearnerClass::projections(ds.dims.d), 25)
            .expect("boost runs");
        for (s, rec) in run.trace.iter().enumerate() {
            checks += 1;
            if rec.gamma_s < floor - 1e-12 {
                violations.push(format!(
                    "instance {idx} iteration {}: Gamma {} below floor {floor}",
                    s + 1,
                    rec.gamma_s
                ));
            }
        }
    }
    SuiteReport::new("weak-floor", checks, violations)
}

/// Exhaustive hiding check: at d=4, k=1, t=2 every single share position has
/// an identical distribution over uniform randomness for every secret, as an
/// exact multiset. Also checks every pair of positions at t=3.
fn hiding_suite() -> SuiteReport {
    let mut checks = 0u64;
    let mut violations = Vec::new();
    let params = EncodingParams::new(4, 1).expect("valid params");
    let secrets: Vec<Vec<usize>> = vec![vec![], vec![0], vec![1], vec![2], vec![3]];

    let mut check_positions = |t: usize, positions: &[usize]| {
        let r_len = t * params.payload_len;
        let mut reference: Option<std::collections::BTreeMap<Vec<Vec<i8>>, usize>> = None;
        for v in &secrets {
            let mut counts = std::collections::BTreeMap::new();
            for bits in 0u32..(1 << r_len) {
                let r: Vec<i8> = (0..r_len)
                    .map(|i| if (bits >> i) & 1 == 1 { 1 } else { -1 })
                    .collect();
                let ss = hardness::share(v, &r, t, &params).expect("valid share");
                let view: Vec<Vec<i8>> = positions.iter().map(|&p| ss.shares[p].clone()).collect();
                *counts.entry(view).or_insert(0) += 1;
            }
            checks += 1;
            match &reference {
                None => reference = Some(counts),
                Some(ref_counts) => {
                    if &counts != ref_counts {
                        violations.push(format!(
                            "t={t} positions {positions:?}: distribution differs for secret {v:?}"
                        ));
                    }
                }
            }
        }
    };

    check_positions(2, &[0]);
    check_positions(2, &[1]);
    check_positions(3, &[0, 1]);
    check_positions(3, &[0, 2]);
    check_positions(3, &[1, 2]);
    SuiteReport::new("hiding", checks, violations)
}

fn margins_suite(seed_value: u64) -> SuiteReport {
    let spec = SeedSpec::new(seed_value);
    let mut rng = spec.stream(2, Purpose::Concept);
    let mut checks = 0u64;
    let mut violations = Vec::new();
    for k in (1..=15usize).step_by(2) {
        let support: Vec<usize> = (0..k).collect();
        let h = gen_majority_halfspace(16, k, &support).expect("odd k");
        checks += 1;
        if (h.margin() - 1.0 / (k as f64).sqrt()).abs() > 1e-12 {
            violations.push(format!("majority k={k} margin {}", h.margin()));
        }
    }
    for trial in 0..20 {
        let h = concepts::gen_random_margin_halfspace(
            24,
            4,
            0.1,
            &RandomMarginOptions::default(),
            &mut rng,
        )
        .expect("findable margin");
        checks += 1;
        if h.margin() != h.recompute_margin() {
            violations.push(format!("trial {trial}: stored margin differs from recompute"));
            continue;
        }
        let norm: f64 = h.weights().iter().map(|w| w * w).sum::<f64>().sqrt();
        let mut x = vec![0i8; 24];
        for _ in 0..200 {
            seed::fill_signs(&mut rng, &mut x);
            let dot: f64 = h
                .support()
                .iter()
                .zip(h.weights())
                .map(|(&i, &w)| w * f64::from(x[i]))
                .sum();
            checks += 1;
            if dot.abs() / norm < h.margin() - 1e-12 {
                violations.push(format!("trial {trial}: point beats the stored margin"));
            }
        }
    }
    SuiteReport::new("margins", checks, violations)
}

fn roundtrip_suite(seed_value: u64) -> SuiteReport {
    let spec = SeedSpec::new(seed_value);
    let mut rng = spec.stream(3, Purpose::Data);
    let mut checks = 0u64;
    let mut violations = Vec::new();
    let dir = std::env::temp_dir().join(format!("simulboost-verify-{seed_value}"));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return SuiteReport::new("roundtrip", 0, vec![format!("tempdir: {e}")]);
    }
    for trial in 0..40 {
        let d = 1 + seed::below(&mut rng, 6);
        let n = 1 + seed::below(&mut rng, 3);
        let m = 1 + seed::below(&mut rng, 4);
        let dims = ProblemDims::new(d, 1, n, m).expect("valid dims");
        let tasks: Vec<TaskDataset> = (1..=n)
            .map(|task_id| TaskDataset {
                task_id,
                examples: (0..m)
                    .map(|_| {
                        let mut x = vec![0i8; d];
                        seed::fill_signs(&mut rng, &mut x);
                        HypercubeExample::new(x, seed::sign(&mut rng)).expect("valid")
                    })
                    .collect(),
            })
            .collect();
        let ds = MultitaskDataset::new(dims, tasks).expect("valid dataset");
        let path = dir.join(format!("rt-{trial}.jsonl"));
        checks += 1;
        match crate::data::write_dataset(&path, &ds).and_then(|_| crate::data::read_dataset(&path)) {
            Ok(back) if back == ds => {}
            Ok(_) => violations.push(format!("trial {trial}: roundtrip changed the dataset")),
            Err(e) => violations.push(format!("trial {trial}: {e}")),
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    SuiteReport::new("roundtrip", checks, violations)
}

fn reconstruction_suite(seed_value: u64) -> SuiteReport {
    let spec = SeedSpec::new(seed_value);
    let mut rng = spec.stream(4, Purpose::ShareRandomness);
    let mut checks = 0u64;
    let mut violations = Vec::new();

    // exhaustive identity at d=4, k=1, t in {2,3}
    let params = EncodingParams::new(4, 1).expect("valid");
    for t in [2usize, 3] {
        let r_len = t * params.payload_len;
        for v in [vec![], vec![0], vec![1], vec![2], vec![3]] {
            for bits in 0u32..(1 << r_len) {
                let r: Vec<i8> = (0..r_len)
                    .map(|i| if (bits >> i) & 1 == 1 { 1 } else { -1 })
                    .collect();
                let ss = hardness::share(&v, &r, t, &params).expect("valid");
                checks += 1;
                if hardness::reconstruct(&ss.shares, &params).expect("valid") != v {
                    violations.push(format!("t={t} secret {v:?}: reconstruction mismatch"));
                }
            }
        }
    }

    // randomized identity across geometries
    for trial in 0..300 {
        let d = [4usize, 8, 16, 32][trial % 4];
        let k = 1 + trial % 3;
        let params = EncodingParams::new(d, k).expect("valid");
        let t = 2 + seed::below(&mut rng, 4);
        let size = seed::below(&mut rng, k + 1);
        let v = seed::subset(&mut rng, d, size);
        let mut r = vec![0i8; t * params.payload_len];
        seed::fill_signs(&mut rng, &mut r);
        let ss = hardness::share(&v, &r, t, &params).expect("valid");
        checks += 1;
        if hardness::reconstruct(&ss.shares, &params).expect("valid") != v {
            violations.push(format!("trial {trial}: reconstruction mismatch"));
        }
    }
    SuiteReport::new("reconstruction", checks, violations)
}

fn ae_coverage_suite(seed_value: u64) -> SuiteReport {
    let spec = SeedSpec::new(seed_value);
    let mut checks = 0u64;
    let mut violations = Vec::new();
    let params = EncodingParams::new(16, 2).expect("valid");
    let (t, eps, delta) = (5usize, 0.3, 0.2);
    let n_samples = hardness::ae_sample_size(&params, t, eps, delta);
    let trials = 30;
    let mut successes = 0usize;
    let dist = InputDistribution::uniform(16);
    for trial in 0..trials {
        let mut rng = spec.stream(trial, Purpose::Concept);
        let size = 1 + seed::below(&mut rng, 2);
        let v = seed::subset(&mut rng, 16, size);
        let mut r = vec![0i8; t * params.payload_len];
        seed::fill_signs(&mut rng, &mut r);
        let concept = hardness::HardConcept::new(v.clone(), r, t, params).expect("valid");
        let sample = hardness::sample_hard_task(
            &concept,
            &dist,
            eps,
            n_samples,
            trial + 1,
            SeedSpec::new(seed_value ^ 0xae),
        )
        .expect("sampling works");
        match hardness::ae_learn(&sample, &params, t) {
            Ok(parity) if parity.vars == v => successes += 1,
            Ok(_) => violations.push(format!("trial {trial}: recovered the wrong secret")),
            Err(hardness::HardnessError::AeIncomplete { .. }) => {}
            Err(e) => violations.push(format!("trial {trial}: {e}")),
        }
    }
    checks += trials as u64;
    let need = ((1.0 - 2.0 * delta) * trials as f64).ceil() as usize;
    if successes < need {
        violations.push(format!(
            "only {successes}/{trials} recoveries at the coverage sample size (need {need})"
        ));
    }
    SuiteReport::new("ae-coverage", checks, violations)
}
