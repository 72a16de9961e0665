//! Heavier boosting checks: the step-count guarantee on a full-size run, the
//! closed-form loss identity, and equivalence between the engine's
//! incremental state and the public one-shot operations.

use simulboost::boosting::{
    boost, compute_weights, select_weak_learner, steps_for_target, TaskEnsemble, WeakLearnerClass,
};
use simulboost::concepts::{build_multitask_instance, ConceptSpec, InputDistribution, SupportSpec};
use simulboost::data::{HypercubeExample, MultitaskDataset, ProblemDims, TaskDataset};
use simulboost::seed::{self, Purpose, SeedSpec};

// t chosen for the advantage floor gamma^2/k^2 drives the training error of
// 64 shared-support majority tasks below eps/4
#[test]
fn step_count_formula_fits_the_training_set() {
    let (d, k, n, m) = (64usize, 5usize, 64usize, 200usize);
    let eps = 0.05;
    let gamma = 1.0 / (k as f64).sqrt();
    let t = steps_for_target(eps, gamma * gamma / (k * k) as f64).unwrap();
    assert_eq!(t, 1096);
    let spec = SeedSpec::new(8);
    let dims = ProblemDims::new(d, k, n, m).unwrap();
    let shared = seed::subset(&mut spec.stream(0, Purpose::SharedSupport), d, k);
    let specs = vec![ConceptSpec::Majority {
        support: SupportSpec::Explicit(shared.clone()),
    }];
    let dists = vec![InputDistribution::uniform(d)];
    let (ds, _) = build_multitask_instance(&dims, &shared, &specs, &dists, spec).unwrap();
    let run = boost(&ds, &WeakLearnerClass::projections(d), t).unwrap();
    let final_err = run.trace.last().unwrap().train_error_after;
    assert!(final_err <= eps / 4.0, "final error {final_err}");
}

fn noisy_dataset(seed: u64, d: usize, n: usize, m: usize) -> MultitaskDataset {
    // random labels: weak learners stay imperfect, so W_neq > 0 throughout
    let spec = SeedSpec::new(seed);
    let tasks = (1..=n)
        .map(|task_id| {
            let mut rng = spec.stream(task_id, Purpose::Data);
            TaskDataset {
                task_id,
                examples: (0..m)
                    .map(|_| {
                        let mut x = vec![0i8; d];
                        seed::fill_signs(&mut rng, &mut x);
                        HypercubeExample::new(x, seed::sign(&mut rng)).unwrap()
                    })
                    .collect(),
            }
        })
        .collect();
    MultitaskDataset::new(ProblemDims::new(d, 1, n, m).unwrap(), tasks).unwrap()
}

// L_s = sum_i 2 sqrt(W_eq W_neq) when every task splits; the engine's
// recorded loss matches the closed form to 1e-9 relative
#[test]
fn loss_matches_closed_form_when_weak_learners_are_imperfect() {
    let ds = noisy_dataset(21, 10, 3, 40);
    let t = 25;
    let run = boost(&ds, &WeakLearnerClass::projections(10), t).unwrap();
    let mut ensembles: Vec<TaskEnsemble> =
        (0..ds.dims.n).map(|_| TaskEnsemble::empty(10)).collect();
    for (s, rec) in run.trace.iter().enumerate() {
        // weights entering iteration s+1
        let before = compute_weights(&ds, &ensembles).unwrap();
        let mut closed_form = 0.0;
        for (task, lws) in ds.tasks.iter().zip(&before.log_weights) {
            let mut w_eq = 0.0;
            let mut w_ne = 0.0;
            for (ex, &lw) in task.examples.iter().zip(lws) {
                let w = lw.exp();
                if ex.x[rec.chosen_index] == ex.y {
                    w_eq += w;
                } else {
                    w_ne += w;
                }
            }
            assert!(w_ne > 0.0, "iteration {}: a task split perfectly", s + 1);
            assert!(w_eq > 0.0);
            closed_form += 2.0 * (w_eq * w_ne).sqrt();
        }
        let rel = (run.trace[s].exp_loss_after - closed_form).abs() / closed_form;
        assert!(rel <= 1e-9, "iteration {}: relative error {rel}", s + 1);
        for (ens, run_ens) in ensembles.iter_mut().zip(&run.ensembles) {
            ens.terms.push(run_ens.terms[s]);
        }
    }
}

// the engine's per-iteration state agrees with the public compute_weights /
// select_weak_learner operations applied to ensemble prefixes
#[test]
fn engine_matches_public_operations() {
    let ds = noisy_dataset(33, 8, 2, 30);
    let class = WeakLearnerClass::projections(8);
    let run = boost(&ds, &class, 12).unwrap();
    let mut prefix: Vec<TaskEnsemble> =
        (0..ds.dims.n).map(|_| TaskEnsemble::empty(8)).collect();
    for (s, rec) in run.trace.iter().enumerate() {
        let weights = compute_weights(&ds, &prefix).unwrap();
        let (index, gamma_s, per_task) = select_weak_learner(&ds, &weights, &class).unwrap();
        assert_eq!(index, rec.chosen_index);
        assert!((gamma_s - rec.gamma_s).abs() <= 1e-12);
        for (a, b) in per_task.iter().zip(&rec.per_task_gamma) {
            assert!((a - b).abs() <= 1e-12);
        }
        for (ens, run_ens) in prefix.iter_mut().zip(&run.ensembles) {
            ens.terms.push(run_ens.terms[s]);
        }
    }
}
