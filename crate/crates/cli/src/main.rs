//! Command-line driver: dataset generation, training, sweeps, secret-sharing
//! demos, and invariant verification, with machine-readable outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use simulboost::boosting::{self, BoostRun, WeakLearnerClass};
use simulboost::concepts::Concept;
use simulboost::config::{ConceptFamily, ExperimentConfig};
use simulboost::data::{read_dataset, write_dataset};
use simulboost::evaluation::{
    self, evaluate_on_dataset, run_sweep, ErrorReport, StepSpec, SweepConfig,
};
use simulboost::hardness::{
    ae_learn, ae_sample_size, brute_force_multitask_learn, build_reduction_dataset,
    embedding_witness, hex_to_signs, majority_predict, reconstruct, sample_hard_task,
    signs_to_hex, verify_embedding, EncodingParams, HardConcept, HardnessError,
};
use simulboost::concepts::{InputDistribution, ParityConcept};
use simulboost::seed::{self, Purpose, SeedSpec};
use simulboost::verify::{self, Suite};

#[derive(Parser)]
#[command(
    name = "simulboost",
    version,
    about = "Multitask boosting for sparse margin halfspaces, plus secret-sharing hardness experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate datasets and ground-truth concept files from a config
    Gen(GenArgs),
    /// Train boosting ensembles on a dataset file
    Train(TrainArgs),
    /// Run a (d, n, m, k) grid sweep and emit a CSV table
    Sweep(SweepArgs),
    /// Secret-sharing operations and hardness demos
    Hardness {
        #[command(subcommand)]
        command: HardnessCmd,
    },
    /// Run invariant suites and report pass/fail
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory from the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only this seed instead of the config's seed list
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config (JSON); the training section drives t, epsilon, delta
    #[arg(long)]
    config: PathBuf,
    /// Dataset file (JSON lines) to train on
    #[arg(long)]
    dataset: PathBuf,
    /// Ground-truth concept file; enables margin-aware auto-t
    #[arg(long)]
    concepts: Option<PathBuf>,
    /// Train each task separately instead of simultaneously
    #[arg(long)]
    baseline: bool,
    /// Override the output directory from the config
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config (JSON): grid.*, seeds, constants, training, holdout
    #[arg(long)]
    config: PathBuf,
    /// CSV output path (default: config output, then sweep.csv)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HardnessCmd {
    /// Split a feature set into t shares
    Share(ShareArgs),
    /// Reconstruct a feature set from hex-encoded shares
    Reconstruct(ReconstructArgs),
    /// Monte-Carlo run of the attribute-efficient learner at its sample bound
    AeDemo(AeDemoArgs),
    /// End-to-end reduction: split, relabel, brute-force learn, majority-vote
    ReductionDemo(ReductionDemoArgs),
}

#[derive(Args)]
struct ShareArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    t: usize,
    /// Comma-separated feature indices (empty string for the empty set)
    #[arg(long, default_value = "")]
    v: String,
    /// Hex-encoded randomness of t * k * (log2 d + 1) bits; drawn from --seed if omitted
    #[arg(long)]
    r: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    /// Comma-separated hex-encoded shares
    #[arg(long)]
    shares: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AeDemoArgs {
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 21)]
    t: usize,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReductionDemoArgs {
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 60)]
    m: usize,
    #[arg(long, default_value_t = 10_000)]
    holdout: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of: loss-decay, discriminator, hiding, all
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Hardness { command } => match command {
            HardnessCmd::Share(args) => cmd_share(args),
            HardnessCmd::Reconstruct(args) => cmd_reconstruct(args),
            HardnessCmd::AeDemo(args) => cmd_ae_demo(args),
            HardnessCmd::ReductionDemo(args) => cmd_reduction_demo(args),
        },
        Command::Verify(args) => cmd_verify(args),
    }
}

fn load_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    ExperimentConfig::from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let cfg = load_experiment_config(&args.config)?;
    let out_root = args.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let seeds: Vec<u64> = match args.seed {
        Some(s) => vec![s],
        None => cfg.seeds.clone(),
    };
    for seed in seeds {
        let (ds, concepts) = cfg.build_instance(seed)?;
        let dir = out_root.join(format!("seed-{seed}"));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let ds_path = dir.join("dataset.jsonl");
        write_dataset(&ds_path, &ds)?;
        let concepts_path = dir.join("concepts.json");
        fs::write(&concepts_path, serde_json::to_string_pretty(&concepts)?)
            .with_context(|| format!("writing {}", concepts_path.display()))?;
        println!(
            "seed={seed} d={} k={} n={} m={} -> {}",
            ds.dims.d,
            ds.dims.k,
            ds.dims.n,
            ds.dims.m,
            dir.display()
        );
    }
    Ok(())
}

// Advantage floor for auto-t: the worst concept margin when known, else the
// family's guaranteed margin.
fn resolve_gamma(
    cfg: &ExperimentConfig,
    concepts: Option<&[Concept]>,
    k: usize,
) -> Result<f64> {
    if let Some(concepts) = concepts {
        let mut gamma = f64::INFINITY;
        for c in concepts {
            match c {
                Concept::Halfspace(h) => gamma = gamma.min(h.margin()),
                Concept::Parity(_) => {
                    bail!("auto t needs margin concepts; the concept file contains a parity")
                }
            }
        }
        if !gamma.is_finite() {
            bail!("concept file is empty");
        }
        return Ok(gamma);
    }
    match cfg.instance.family {
        ConceptFamily::Majority => Ok(1.0 / (k as f64).sqrt()),
        ConceptFamily::RandomMargin => Ok(cfg.instance.gamma_min.expect("validated")),
        ConceptFamily::Parity => {
            bail!("auto t requires a margin concept family; set training.t explicitly")
        }
    }
}

#[derive(Serialize)]
struct TrainSummary {
    mode: String,
    t: usize,
    final_train_error: f64,
    final_exp_loss: f64,
    avg_error: f64,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = load_experiment_config(&args.config)?;
    let ds = read_dataset(&args.dataset)?;
    let concepts: Option<Vec<Concept>> = match &args.concepts {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading concepts {}", path.display()))?;
            Some(serde_json::from_str(&text).with_context(|| "parsing concept file")?)
        }
        None => None,
    };
    let k = ds.dims.k;
    let t = match cfg.training.t {
        StepSpec::Fixed(t) => t,
        StepSpec::Auto(_) => {
            let gamma = resolve_gamma(&cfg, concepts.as_deref(), k)?;
            boosting::steps_for_target(cfg.training.epsilon, gamma * gamma / (k * k) as f64)?
        }
    };
    let out_dir = args.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let class = WeakLearnerClass::projections(ds.dims.d);
    let json_wanted = cfg.output.formats.iter().any(|f| f == "json");
    let csv_wanted = cfg.output.formats.iter().any(|f| f == "csv");

    let (runs, report): (Vec<BoostRun>, ErrorReport) = if args.baseline {
        let mut runs = Vec::with_capacity(ds.dims.n);
        for task in &ds.tasks {
            runs.push(evaluation::single_task_baseline(task, ds.dims.d, k, t)?);
        }
        let ensembles: Vec<_> = runs
            .iter()
            .map(|r| r.ensembles[0].clone())
            .collect();
        let report = evaluate_on_dataset(&ensembles, &ds)?;
        (runs, report)
    } else {
        let run = boosting::boost(&ds, &class, t)?;
        let report = evaluate_on_dataset(&run.ensembles, &ds)?;
        (vec![run], report)
    };

    let mode = if args.baseline { "baseline" } else { "multitask" };
    if json_wanted {
        let run_path = out_dir.join(if args.baseline {
            "baseline_runs.json"
        } else {
            "run.json"
        });
        let payload = if args.baseline {
            serde_json::to_string(&runs)?
        } else {
            serde_json::to_string(&runs[0])?
        };
        fs::write(&run_path, payload)
            .with_context(|| format!("writing {}", run_path.display()))?;
        let report_path = out_dir.join("error_report.json");
        fs::write(&report_path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", report_path.display()))?;
    }
    if csv_wanted {
        if args.baseline {
            for (i, run) in runs.iter().enumerate() {
                let path = out_dir.join(format!("trace-task-{}.csv", i + 1));
                fs::write(&path, run.trace_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        } else {
            let path = out_dir.join("trace.csv");
            fs::write(&path, runs[0].trace_csv())
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }

    // worst final record across runs (there is exactly one unless --baseline)
    let final_error = runs
        .iter()
        .filter_map(|r| r.trace.last().map(|rec| rec.train_error_after))
        .fold(0.0f64, f64::max);
    let final_loss: f64 = runs
        .iter()
        .filter_map(|r| r.trace.last().map(|rec| rec.exp_loss_after))
        .sum();
    let summary = TrainSummary {
        mode: mode.to_string(),
        t,
        final_train_error: final_error,
        final_exp_loss: final_loss,
        avg_error: report.avg_error,
    };
    println!(
        "mode={} t={} final_train_error={:?} avg_error={:?} -> {}",
        summary.mode, summary.t, summary.final_train_error, summary.avg_error,
        out_dir.display()
    );
    if json_wanted {
        let path = out_dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&summary)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let cfg: SweepConfig =
        serde_json::from_str(&text).map_err(|e| anyhow!("{}: {e}", args.config.display()))?;
    evaluation::validate_sweep_config(&cfg).map_err(|e| anyhow!("{}: {e}", args.config.display()))?;
    let table = run_sweep(&cfg);
    let out = args
        .out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("sweep.csv"));
    fs::write(&out, table.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    let failures = table.rows.iter().filter(|r| r.status != "ok").count();
    println!("wrote {} rows to {} ({failures} failed cells)", table.rows.len(), out.display());
    Ok(())
}

fn parse_index_list(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .with_context(|| format!("bad index {tok:?}"))
        })
        .collect()
}

fn cmd_share(args: ShareArgs) -> Result<()> {
    let params = EncodingParams::new(args.d, args.k)?;
    let v = parse_index_list(&args.v)?;
    let r_len = args.t * params.payload_len;
    let r = match &args.r {
        Some(hex) => hex_to_signs(hex, r_len)?,
        None => {
            let mut rng = SeedSpec::new(args.seed).stream(0, Purpose::ShareRandomness);
            let mut r = vec![0i8; r_len];
            seed::fill_signs(&mut rng, &mut r);
            r
        }
    };
    let ss = simulboost::hardness::share(&v, &r, args.t, &params)?;
    if args.json {
        #[derive(Serialize)]
        struct ShareOut {
            d: usize,
            k: usize,
            t: usize,
            payload_len: usize,
            v: Vec<usize>,
            r_hex: String,
            shares_hex: Vec<String>,
        }
        let out = ShareOut {
            d: args.d,
            k: args.k,
            t: args.t,
            payload_len: params.payload_len,
            v,
            r_hex: signs_to_hex(&r),
            shares_hex: ss.shares.iter().map(|s| signs_to_hex(s)).collect(),
        };
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("payload_len={} bits per share", params.payload_len);
        for (p, share) in ss.shares.iter().enumerate() {
            println!("share[{p}] = {}", signs_to_hex(share));
        }
    }
    Ok(())
}

fn cmd_reconstruct(args: ReconstructArgs) -> Result<()> {
    let params = EncodingParams::new(args.d, args.k)?;
    let shares: Vec<Vec<i8>> = args
        .shares
        .split(',')
        .map(|hex| hex_to_signs(hex.trim(), params.payload_len))
        .collect::<Result<_, HardnessError>>()?;
    let v = reconstruct(&shares, &params)?;
    if args.json {
        println!("{}", serde_json::json!({ "v": v }));
    } else {
        println!(
            "V = {{{}}}",
            v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
        );
    }
    Ok(())
}

fn cmd_ae_demo(args: AeDemoArgs) -> Result<()> {
    let params = EncodingParams::new(args.d, args.k)?;
    if args.t < 2 {
        bail!("t must be >= 2");
    }
    let n_samples = ae_sample_size(&params, args.t, args.eps, args.delta);
    let dist = InputDistribution::uniform(args.d);
    let mut successes = 0usize;
    for trial in 0..args.trials {
        let spec = SeedSpec::new(args.seed.wrapping_add(trial as u64));
        let mut rng = spec.stream(0, Purpose::Concept);
        let v = seed::subset(&mut rng, args.d, args.k);
        let mut r = vec![0i8; args.t * params.payload_len];
        seed::fill_signs(&mut rng, &mut r);
        let concept = HardConcept::new(v.clone(), r, args.t, params)?;
        let sample = sample_hard_task(&concept, &dist, args.eps, n_samples, 1, spec)?;
        if let Ok(parity) = ae_learn(&sample, &params, args.t) {
            if parity.vars == v {
                successes += 1;
            }
        }
    }
    let rate = successes as f64 / args.trials as f64;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "d": args.d, "k": args.k, "t": args.t,
                "eps": args.eps, "delta": args.delta,
                "n_samples": n_samples,
                "trials": args.trials,
                "successes": successes,
                "success_rate": rate,
            })
        );
    } else {
        println!(
            "N={n_samples} samples per trial; exact recovery {successes}/{} (rate {rate:?}, target >= {:?})",
            args.trials,
            1.0 - args.delta
        );
    }
    Ok(())
}

fn cmd_reduction_demo(args: ReductionDemoArgs) -> Result<()> {
    let params = EncodingParams::new(args.d, args.k)?;
    let dist = InputDistribution::uniform(args.d);
    #[derive(Serialize)]
    struct TrialOut {
        seed: u64,
        majority_error: f64,
        witnesses_ok: bool,
    }
    let mut trials = Vec::new();
    let mut passed = 0usize;
    for i in 0..args.trials {
        let trial_seed = args.seed.wrapping_add(i as u64);
        let spec = SeedSpec::new(trial_seed);
        let mut rng = spec.stream(0, Purpose::Concept);
        let v = seed::subset(&mut rng, args.d, args.k);
        let parity = ParityConcept::new(args.d, v.clone())?;
        let mut data_rng = spec.stream(0, Purpose::Data);
        let s: Vec<(Vec<i8>, i8)> = (0..args.n * args.m)
            .map(|_| {
                let x = dist.sample(&mut data_rng);
                let y = parity.eval(&x).expect("dims match");
                (x, y)
            })
            .collect();
        let red = build_reduction_dataset(&s, args.n, args.m, args.eps, &params, spec)?;
        let task_samples: Vec<_> = red.tasks.iter().map(|t| t.examples.clone()).collect();
        let hyps = brute_force_multitask_learn(&task_samples, &params, args.k)?;

        let mut witnesses_ok = true;
        for task in &red.tasks {
            let w = embedding_witness(task, &v, red.t, &params)?;
            if !verify_embedding(task, &w)? {
                witnesses_ok = false;
            }
        }

        let mut hold_rng = spec.stream(0, Purpose::Holdout);
        let mut wrong = 0usize;
        for _ in 0..args.holdout {
            let x = dist.sample(&mut hold_rng);
            if majority_predict(&hyps, &x, &params, args.m)? != parity.eval(&x)? {
                wrong += 1;
            }
        }
        let err = wrong as f64 / args.holdout as f64;
        if err <= args.eps && witnesses_ok {
            passed += 1;
        }
        if !args.json {
            println!("seed={trial_seed} majority_error={err:?} witnesses_ok={witnesses_ok}");
        }
        trials.push(TrialOut {
            seed: trial_seed,
            majority_error: err,
            witnesses_ok,
        });
    }
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "d": args.d, "k": args.k, "eps": args.eps,
                "n": args.n, "m": args.m, "holdout": args.holdout,
                "trials": trials,
                "passed": passed,
            })
        );
    } else {
        println!(
            "{passed}/{} trials reached majority error <= {:?} with valid witnesses",
            args.trials, args.eps
        );
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let suite: Suite = args.suite.parse().map_err(|e: String| anyhow!(e))?;
    let report = verify::run(suite, args.seed);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for s in &report.suites {
            if s.passed {
                println!("suite {}: PASS ({} checks)", s.suite, s.checks);
            } else {
                println!(
                    "suite {}: FAIL ({} checks, {} violations)",
                    s.suite,
                    s.checks,
                    s.violations.len()
                );
                for v in s.violations.iter().take(5) {
                    println!("  {v}");
                }
            }
        }
    }
    if !report.all_passed {
        bail!("verification failed");
    }
    Ok(())
}
