//! Declarative experiment configuration (JSON). Unknown keys are rejected;
//! each section is validated by the module that consumes it.

use serde::{Deserialize, Serialize};

use crate::concepts::{Concept, ConceptSpec, InputDistribution, SupportSpec};
use crate::data::{MultitaskDataset, ProblemDims};
use crate::evaluation::{EvalError, StepSpec};
use crate::seed::{self, Purpose, SeedSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptFamily {
    /// Odd majority vote with unit weights.
    Majority,
    /// Rejection-sampled small-integer weights with a margin floor.
    RandomMargin,
    /// Parity over a subset of the shared features.
    Parity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionConfig {
    Uniform,
    ProductBias { p: Vec<f64> },
}

impl Default for DistributionConfig {
    fn default() -> Self {
        DistributionConfig::Uniform
    }
}

/// Where the shared feature set V comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SharedVPolicy {
    /// The literal string "random": a fresh k-subset per seed.
    Named(String),
    /// Explicit feature indices.
    Explicit(Vec<usize>),
}

impl Default for SharedVPolicy {
    fn default() -> Self {
        SharedVPolicy::Named("random".to_string())
    }
}

/// How each task picks its variables inside V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSupportPolicy {
    /// Every task uses all of V.
    Full,
    /// Per-task uniformly random odd-size subset of V (majority family).
    RandomOdd,
    /// Per-task uniformly random non-empty subset of V.
    Random,
}

impl Default for TaskSupportPolicy {
    fn default() -> Self {
        TaskSupportPolicy::Full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub family: ConceptFamily,
    #[serde(default)]
    pub gamma_min: Option<f64>,
    #[serde(default = "default_max_abs_weight")]
    pub max_abs_weight: u32,
    #[serde(default)]
    pub distribution: DistributionConfig,
    #[serde(default)]
    pub shared_v: SharedVPolicy,
    #[serde(default)]
    pub task_support: TaskSupportPolicy,
}

fn default_max_abs_weight() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub t: StepSpec,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            t: StepSpec::default(),
            epsilon: 0.05,
            delta: 0.01,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".to_string(),
            formats: vec!["json".to_string(), "csv".to_string()],
        }
    }
}

/// One experiment: an instance recipe, training settings, output settings,
/// and the seeds to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| EvalError::Invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let inst = &self.instance;
        ProblemDims::new(inst.d, inst.k, inst.n, inst.m)
            .map_err(|e| EvalError::Invalid(format!("instance: {e}")))?;
        match inst.family {
            ConceptFamily::Majority => {
                if matches!(inst.task_support, TaskSupportPolicy::Full) && inst.k % 2 == 0 {
                    return Err(EvalError::Invalid(format!(
                        "instance.k: majority over the full shared set requires odd k, got {}",
                        inst.k
                    )));
                }
                if matches!(inst.task_support, TaskSupportPolicy::Random) {
                    return Err(EvalError::Invalid(
                        "instance.task_support: majority needs odd supports; use full or random_odd"
                            .to_string(),
                    ));
                }
            }
            ConceptFamily::RandomMargin => {
                let gamma = inst.gamma_min.ok_or_else(|| {
                    EvalError::Invalid(
                        "instance.gamma_min: required for the random_margin family".to_string(),
                    )
                })?;
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return Err(EvalError::Invalid(format!(
                        "instance.gamma_min: must lie in (0,1], got {gamma}"
                    )));
                }
            }
            ConceptFamily::Parity => {}
        }
        if let DistributionConfig::ProductBias { p } = &inst.distribution {
            if p.len() != inst.d {
                return Err(EvalError::Invalid(format!(
                    "instance.distribution.p: has {} entries, expected d={}",
                    p.len(),
                    inst.d
                )));
            }
        }
        if let SharedVPolicy::Named(name) = &inst.shared_v {
            if name != "random" {
                return Err(EvalError::Invalid(format!(
                    "instance.shared_v: unknown policy {name:?}; expected \"random\" or a list"
                )));
            }
        }
        if let SharedVPolicy::Explicit(v) = &inst.shared_v {
            if v.len() != inst.k {
                return Err(EvalError::Invalid(format!(
                    "instance.shared_v: has {} features, expected k={}",
                    v.len(),
                    inst.k
                )));
            }
        }
        if !(self.training.epsilon > 0.0 && self.training.epsilon < 1.0) {
            return Err(EvalError::Invalid(format!(
                "training.epsilon: must lie in (0,1), got {}",
                self.training.epsilon
            )));
        }
        if !(self.training.delta > 0.0 && self.training.delta < 1.0) {
            return Err(EvalError::Invalid(format!(
                "training.delta: must lie in (0,1), got {}",
                self.training.delta
            )));
        }
        if self.seeds.is_empty() {
            return Err(EvalError::Invalid("seeds: must list at least one seed".to_string()));
        }
        for fmt in &self.output.formats {
            if fmt != "json" && fmt != "csv" {
                return Err(EvalError::Invalid(format!(
                    "output.formats: unknown format {fmt:?}"
                )));
            }
        }
        Ok(())
    }

    /// Materialize the instance for one seed: the labeled multitask dataset
    /// plus the ground-truth concepts.
    pub fn build_instance(&self, seed: u64) -> Result<(MultitaskDataset, Vec<Concept>), EvalError> {
        let inst = &self.instance;
        let dims = ProblemDims::new(inst.d, inst.k, inst.n, inst.m)?;
        let spec = SeedSpec::new(seed);
        let shared_v = match &inst.shared_v {
            SharedVPolicy::Explicit(v) => v.clone(),
            SharedVPolicy::Named(_) => {
                seed::subset(&mut spec.stream(0, Purpose::SharedSupport), inst.d, inst.k)
            }
        };
        let support = |size: usize| match inst.task_support {
            TaskSupportPolicy::Full => SupportSpec::Explicit(shared_v.clone()),
            TaskSupportPolicy::RandomOdd | TaskSupportPolicy::Random => {
                SupportSpec::RandomSubset { size }
            }
        };
        let concept_specs: Vec<ConceptSpec> = match inst.family {
            ConceptFamily::Majority => match inst.task_support {
                TaskSupportPolicy::Full => vec![ConceptSpec::Majority {
                    support: SupportSpec::Explicit(shared_v.clone()),
                }],
                // cycle over the odd sizes up to k
                _ => (0..inst.n)
                    .map(|i| {
                        let odd_sizes: Vec<usize> = (1..=inst.k).step_by(2).collect();
                        ConceptSpec::Majority {
                            support: SupportSpec::RandomSubset {
                                size: odd_sizes[i % odd_sizes.len()],
                            },
                        }
                    })
                    .collect(),
            },
            ConceptFamily::RandomMargin => vec![ConceptSpec::RandomMargin {
                support: support(inst.k),
                gamma_min: inst.gamma_min.expect("validated"),
                max_abs_weight: inst.max_abs_weight,
            }],
            ConceptFamily::Parity => match inst.task_support {
                TaskSupportPolicy::Full => vec![ConceptSpec::Parity {
                    vars: SupportSpec::Explicit(shared_v.clone()),
                }],
                _ => (0..inst.n)
                    .map(|i| ConceptSpec::Parity {
                        vars: SupportSpec::RandomSubset { size: 1 + i % inst.k },
                    })
                    .collect(),
            },
        };
        let dist = match &inst.distribution {
            DistributionConfig::Uniform => InputDistribution::uniform(inst.d),
            DistributionConfig::ProductBias { p } => InputDistribution::product_bias(p.clone())?,
        };
        Ok(crate::concepts::build_multitask_instance(
            &dims,
            &shared_v,
            &concept_specs,
            &[dist],
            spec,
        )?)
    }
}
