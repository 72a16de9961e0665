//! Target concept classes (sparse margin halfspaces, parities), the exact
//! margin oracle, and input distributions for generating labeled datasets.

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, HypercubeExample, MultitaskDataset, ProblemDims, TaskDataset};
use crate::seed::{self, Purpose, SeedSpec};

/// Supports larger than this are refused by the margin oracle.
pub const MARGIN_ENUM_GUARD: usize = 30;

#[derive(Debug, Error)]
pub enum ConceptError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("support of size {0} exceeds the enumeration guard ({MARGIN_ENUM_GUARD})")]
    SupportTooLarge(usize),
    #[error("zero margin: some sign pattern puts theta.x on the boundary")]
    ZeroMargin,
    #[error("margin search gave up after {attempts} attempts; best margin found {best}")]
    MarginSearchExhausted { attempts: usize, best: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A sparse homogeneous halfspace sign(theta . x) with its exact margin
/// min_x |theta . x| / ||theta||_2, which is positive for every valid concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHalfspace", into = "RawHalfspace")]
pub struct SparseHalfspace {
    d: usize,
    support: Vec<usize>,
    weights: Vec<f64>,
    margin: f64,
}

#[derive(Serialize, Deserialize, Clone)]
struct RawHalfspace {
    d: usize,
    support: Vec<usize>,
    weights: Vec<f64>,
    margin: f64,
}

impl From<SparseHalfspace> for RawHalfspace {
    fn from(h: SparseHalfspace) -> Self {
        RawHalfspace {
            d: h.d,
            support: h.support,
            weights: h.weights,
            margin: h.margin,
        }
    }
}

impl TryFrom<RawHalfspace> for SparseHalfspace {
    type Error = ConceptError;

    fn try_from(raw: RawHalfspace) -> Result<Self, ConceptError> {
        let h = SparseHalfspace::new(raw.d, raw.support, raw.weights)?;
        if (h.margin - raw.margin).abs() > 1e-9 {
            return Err(ConceptError::Invalid(format!(
                "stored margin {} disagrees with recomputed margin {}",
                raw.margin, h.margin
            )));
        }
        Ok(h)
    }
}

impl SparseHalfspace {
    /// Build and validate a halfspace; the margin is computed exactly by the
    /// sign-pattern oracle and must be positive.
    pub fn new(d: usize, support: Vec<usize>, weights: Vec<f64>) -> Result<Self, ConceptError> {
        if d == 0 {
            return Err(ConceptError::Invalid("d must be >= 1".into()));
        }
        if support.len() != weights.len() {
            return Err(ConceptError::Invalid(format!(
                "support has {} entries but weights has {}",
                support.len(),
                weights.len()
            )));
        }
        if support.is_empty() {
            return Err(ConceptError::Invalid("support must be non-empty".into()));
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(weights).collect();
        pairs.sort_by_key(|&(i, _)| i);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ConceptError::Invalid("duplicate support index".into()));
        }
        if pairs.last().unwrap().0 >= d {
            return Err(ConceptError::Invalid(format!(
                "support index {} out of range for d={d}",
                pairs.last().unwrap().0
            )));
        }
        if pairs.iter().any(|&(_, w)| w == 0.0 || !w.is_finite()) {
            return Err(ConceptError::Invalid(
                "weights must be non-zero and finite on the support".into(),
            ));
        }
        let (support, weights): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
        let margin = margin_of_weights(&weights)?;
        if margin == 0.0 {
            return Err(ConceptError::ZeroMargin);
        }
        Ok(SparseHalfspace {
            d,
            support,
            weights,
            margin,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The exact margin computed at construction time.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Re-run the margin oracle; always equals [`Self::margin`].
    pub fn recompute_margin(&self) -> f64 {
        margin_of_weights(&self.weights).expect("support size validated at construction")
    }

    /// sign(theta . x); the margin guarantees theta . x != 0.
    pub fn eval(&self, x: &[i8]) -> Result<i8, ConceptError> {
        if x.len() != self.d {
            return Err(ConceptError::DimMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        let dot: f64 = self
            .support
            .iter()
            .zip(&self.weights)
            .map(|(&i, &w)| w * f64::from(x[i]))
            .sum();
        debug_assert!(dot != 0.0, "margin invariant violated");
        Ok(if dot >= 0.0 { 1 } else { -1 })
    }
}

/// Exact margin of a weight vector: min over sign patterns s in {-1,+1}^len
/// of |w . s| / ||w||_2. Zero means the vector is not a valid margin concept.
pub fn margin_of_weights(weights: &[f64]) -> Result<f64, ConceptError> {
    let s = weights.len();
    if s == 0 {
        return Err(ConceptError::Invalid("empty weight vector".into()));
    }
    if s > MARGIN_ENUM_GUARD {
        return Err(ConceptError::SupportTooLarge(s));
    }
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(ConceptError::Invalid("weights have zero or non-finite norm".into()));
    }
    let min_abs = if s <= 20 {
        min_abs_dot_direct(weights)
    } else {
        min_abs_dot_gray(weights)
    };
    Ok(min_abs / norm)
}

fn min_abs_dot_direct(weights: &[f64]) -> f64 {
    let s = weights.len();
    let mut min_abs = f64::INFINITY;
    for mask in 0u64..(1u64 << s) {
        let mut dot = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            dot += if (mask >> i) & 1 == 1 { w } else { -w };
        }
        min_abs = min_abs.min(dot.abs());
    }
    min_abs
}

// Gray-code walk for supports in 21..=30; refreshes the running dot
// periodically so rounding drift cannot accumulate over 2^s updates.
fn min_abs_dot_gray(weights: &[f64]) -> f64 {
    let s = weights.len();
    let mut signs = vec![-1.0f64; s];
    let mut dot: f64 = weights.iter().map(|w| -w).sum();
    let mut min_abs = dot.abs();
    let total = 1u64 << s;
    for step in 1..total {
        let flip = step.trailing_zeros() as usize;
        signs[flip] = -signs[flip];
        dot += 2.0 * signs[flip] * weights[flip];
        if step & 0xfff == 0 {
            dot = weights.iter().zip(&signs).map(|(w, sg)| w * sg).sum();
        }
        min_abs = min_abs.min(dot.abs());
    }
    min_abs
}

/// Majority vote over an odd set of features: unit weights, margin 1/sqrt(k).
pub fn gen_majority_halfspace(
    d: usize,
    k: usize,
    support: &[usize],
) -> Result<SparseHalfspace, ConceptError> {
    if k % 2 == 0 {
        return Err(ConceptError::Invalid(format!(
            "majority requires odd k, got {k} (even k has margin 0)"
        )));
    }
    if support.len() != k {
        return Err(ConceptError::Invalid(format!(
            "support has {} indices, expected k={k}",
            support.len()
        )));
    }
    SparseHalfspace::new(d, support.to_vec(), vec![1.0; k])
}

/// Knobs for [`gen_random_margin_halfspace`].
#[derive(Debug, Clone)]
pub struct RandomMarginOptions {
    /// Weight magnitudes are drawn uniformly from 1..=max_abs_weight.
    pub max_abs_weight: u32,
    /// Rejection-sampling attempt budget.
    pub attempts: usize,
    /// Fixed support; when None a fresh random k-subset is drawn per attempt.
    pub support: Option<Vec<usize>>,
}

impl Default for RandomMarginOptions {
    fn default() -> Self {
        RandomMarginOptions {
            max_abs_weight: 3,
            attempts: 10_000,
            support: None,
        }
    }
}

/// Rejection-sample small-integer-weight halfspaces until the exact margin
/// reaches gamma_min.
pub fn gen_random_margin_halfspace(
    d: usize,
    k: usize,
    gamma_min: f64,
    opts: &RandomMarginOptions,
    rng: &mut impl RngCore,
) -> Result<SparseHalfspace, ConceptError> {
    if k == 0 || k > d {
        return Err(ConceptError::Invalid(format!("need 1 <= k <= d, got k={k} d={d}")));
    }
    if !(gamma_min > 0.0 && gamma_min <= 1.0) {
        return Err(ConceptError::Invalid(format!(
            "gamma_min must lie in (0, 1], got {gamma_min}"
        )));
    }
    if let Some(sup) = &opts.support {
        if sup.len() != k {
            return Err(ConceptError::Invalid(format!(
                "fixed support has {} indices, expected k={k}",
                sup.len()
            )));
        }
    }
    if opts.max_abs_weight == 0 {
        return Err(ConceptError::Invalid("max_abs_weight must be >= 1".into()));
    }
    let mut best = 0.0f64;
    for _ in 0..opts.attempts {
        let support = match &opts.support {
            Some(sup) => sup.clone(),
            None => seed::subset(rng, d, k),
        };
        let weights: Vec<f64> = (0..k)
            .map(|_| {
                let mag = 1 + seed::below(rng, opts.max_abs_weight as usize) as u32;
                f64::from(mag) * f64::from(seed::sign(rng))
            })
            .collect();
        let margin = margin_of_weights(&weights)?;
        if margin >= gamma_min {
            return SparseHalfspace::new(d, support, weights);
        }
        best = best.max(margin);
    }
    Err(ConceptError::MarginSearchExhausted {
        attempts: opts.attempts,
        best,
    })
}

/// Parity over a subset of features: g_V(x) = prod_{i in V} x_i.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityConcept {
    pub d: usize,
    #[serde(rename = "V")]
    pub vars: Vec<usize>,
}

impl ParityConcept {
    pub fn new(d: usize, mut vars: Vec<usize>) -> Result<Self, ConceptError> {
        vars.sort_unstable();
        vars.dedup();
        if let Some(&max) = vars.last() {
            if max >= d {
                return Err(ConceptError::Invalid(format!(
                    "parity variable {max} out of range for d={d}"
                )));
            }
        }
        Ok(ParityConcept { d, vars })
    }

    /// Product of the selected coordinates; the empty product is +1.
    pub fn eval(&self, x: &[i8]) -> Result<i8, ConceptError> {
        if x.len() != self.d {
            return Err(ConceptError::DimMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        let mut prod = 1i8;
        for &i in &self.vars {
            prod *= x[i];
        }
        Ok(prod)
    }
}

/// A labeling concept: either a sparse margin halfspace or a parity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Concept {
    Halfspace(SparseHalfspace),
    Parity(ParityConcept),
}

impl Concept {
    pub fn dim(&self) -> usize {
        match self {
            Concept::Halfspace(h) => h.dim(),
            Concept::Parity(p) => p.d,
        }
    }

    /// The concept's relevant variables.
    pub fn relevant(&self) -> &[usize] {
        match self {
            Concept::Halfspace(h) => h.support(),
            Concept::Parity(p) => &p.vars,
        }
    }

    pub fn eval(&self, x: &[i8]) -> Result<i8, ConceptError> {
        match self {
            Concept::Halfspace(h) => h.eval(x),
            Concept::Parity(p) => p.eval(x),
        }
    }
}

/// Distribution over unlabeled points of {-1,+1}^d.
#[derive(Debug, Clone, PartialEq)]
pub enum InputDistribution {
    Uniform { d: usize },
    /// Coordinate j is +1 with probability p[j].
    ProductBias { p: Vec<f64> },
    FiniteSupport { points: Vec<Vec<i8>>, probs: Vec<f64> },
}

impl InputDistribution {
    pub fn uniform(d: usize) -> Self {
        InputDistribution::Uniform { d }
    }

    pub fn product_bias(p: Vec<f64>) -> Result<Self, ConceptError> {
        if p.is_empty() {
            return Err(ConceptError::Invalid("bias vector must be non-empty".into()));
        }
        if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(ConceptError::Invalid("bias probabilities must lie in [0,1]".into()));
        }
        Ok(InputDistribution::ProductBias { p })
    }

    pub fn finite_support(points: Vec<Vec<i8>>, probs: Vec<f64>) -> Result<Self, ConceptError> {
        if points.is_empty() || points.len() != probs.len() {
            return Err(ConceptError::Invalid(
                "finite support needs matching non-empty points and probabilities".into(),
            ));
        }
        let d = points[0].len();
        for pt in &points {
            if pt.len() != d {
                return Err(ConceptError::Invalid("finite-support points must share a dimension".into()));
            }
            if pt.iter().any(|&v| v != 1 && v != -1) {
                return Err(ConceptError::Invalid("finite-support points must be +-1 vectors".into()));
            }
        }
        if probs.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(ConceptError::Invalid("probabilities must lie in [0,1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ConceptError::Invalid(format!(
                "probabilities sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(InputDistribution::FiniteSupport { points, probs })
    }

    pub fn dim(&self) -> usize {
        match self {
            InputDistribution::Uniform { d } => *d,
            InputDistribution::ProductBias { p } => p.len(),
            InputDistribution::FiniteSupport { points, .. } => points[0].len(),
        }
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> Vec<i8> {
        match self {
            InputDistribution::Uniform { d } => {
                let mut x = vec![0i8; *d];
                seed::fill_signs(rng, &mut x);
                x
            }
            InputDistribution::ProductBias { p } => p
                .iter()
                .map(|&pj| if seed::coin(rng, pj) { 1 } else { -1 })
                .collect(),
            InputDistribution::FiniteSupport { points, probs } => {
                let u = seed::unit_f64(rng);
                let mut acc = 0.0;
                for (pt, &pr) in points.iter().zip(probs) {
                    acc += pr;
                    if u < acc {
                        return pt.clone();
                    }
                }
                points.last().expect("non-empty support").clone()
            }
        }
    }
}

/// Draw m i.i.d. points from `dist` labeled by `concept`. Deterministic for
/// a given (seed, task_id).
pub fn sample_labeled_task(
    concept: &Concept,
    dist: &InputDistribution,
    m: usize,
    task_id: usize,
    seed: SeedSpec,
) -> Result<TaskDataset, ConceptError> {
    if concept.dim() != dist.dim() {
        return Err(ConceptError::DimMismatch {
            expected: concept.dim(),
            got: dist.dim(),
        });
    }
    let mut rng = seed.stream(task_id, Purpose::Data);
    let mut examples = Vec::with_capacity(m);
    for _ in 0..m {
        let x = dist.sample(&mut rng);
        let y = concept.eval(&x)?;
        examples.push(HypercubeExample { x, y });
    }
    Ok(TaskDataset { task_id, examples })
}

/// How a per-task concept chooses its variables inside the shared set V.
#[derive(Debug, Clone)]
pub enum SupportSpec {
    /// Explicit feature indices; must be contained in V.
    Explicit(Vec<usize>),
    /// A uniformly random size-`size` subset of V.
    RandomSubset { size: usize },
}

/// Per-task concept recipe for [`build_multitask_instance`].
#[derive(Debug, Clone)]
pub enum ConceptSpec {
    Majority { support: SupportSpec },
    RandomMargin {
        support: SupportSpec,
        gamma_min: f64,
        max_abs_weight: u32,
    },
    Parity { vars: SupportSpec },
    Fixed(Concept),
}

fn resolve_support(
    spec: &SupportSpec,
    shared_v: &[usize],
    task_id: usize,
    rng: &mut impl RngCore,
) -> Result<Vec<usize>, ConceptError> {
    match spec {
        SupportSpec::Explicit(idxs) => {
            for &i in idxs {
                if !shared_v.contains(&i) {
                    return Err(ConceptError::Invalid(format!(
                        "task {task_id}: support feature {i} escapes the shared set V"
                    )));
                }
            }
            let mut s = idxs.clone();
            s.sort_unstable();
            Ok(s)
        }
        SupportSpec::RandomSubset { size } => {
            if *size > shared_v.len() {
                return Err(ConceptError::Invalid(format!(
                    "task {task_id}: subset size {size} exceeds |V|={}",
                    shared_v.len()
                )));
            }
            let picks = seed::subset(rng, shared_v.len(), *size);
            Ok(picks.into_iter().map(|i| shared_v[i]).collect())
        }
    }
}

/// Build a realizable multitask instance whose per-task concepts all live
/// inside the shared feature set V. Returns the dataset and the ground-truth
/// concepts; the union of supports is re-checked against V.
pub fn build_multitask_instance(
    dims: &ProblemDims,
    shared_v: &[usize],
    concept_specs: &[ConceptSpec],
    dists: &[InputDistribution],
    seed: SeedSpec,
) -> Result<(MultitaskDataset, Vec<Concept>), ConceptError> {
    if shared_v.is_empty() || shared_v.len() > dims.k {
        return Err(ConceptError::Invalid(format!(
            "shared set has {} features, expected 1..=k={}",
            shared_v.len(),
            dims.k
        )));
    }
    let mut v_sorted = shared_v.to_vec();
    v_sorted.sort_unstable();
    v_sorted.dedup();
    if v_sorted.len() != shared_v.len() {
        return Err(ConceptError::Invalid("shared set V has duplicates".into()));
    }
    if *v_sorted.last().unwrap() >= dims.d {
        return Err(ConceptError::Invalid(format!(
            "shared set feature {} out of range for d={}",
            v_sorted.last().unwrap(),
            dims.d
        )));
    }
    // specs and distributions are cycled across tasks, so a single entry
    // broadcasts and a length-n list is strictly per-task
    if concept_specs.is_empty() {
        return Err(ConceptError::Invalid("need at least one concept spec".into()));
    }
    if dists.is_empty() {
        return Err(ConceptError::Invalid("need at least one distribution".into()));
    }

    let mut concepts = Vec::with_capacity(dims.n);
    let mut tasks = Vec::with_capacity(dims.n);
    for task_id in 1..=dims.n {
        let spec = &concept_specs[(task_id - 1) % concept_specs.len()];
        let dist = &dists[(task_id - 1) % dists.len()];
        if dist.dim() != dims.d {
            return Err(ConceptError::DimMismatch {
                expected: dims.d,
                got: dist.dim(),
            });
        }
        let mut rng = seed.stream(task_id, Purpose::Concept);
        let concept = match spec {
            ConceptSpec::Majority { support } => {
                let sup = resolve_support(support, &v_sorted, task_id, &mut rng)?;
                Concept::Halfspace(gen_majority_halfspace(dims.d, sup.len(), &sup)?)
            }
            ConceptSpec::RandomMargin {
                support,
                gamma_min,
                max_abs_weight,
            } => {
                let sup = resolve_support(support, &v_sorted, task_id, &mut rng)?;
                let opts = RandomMarginOptions {
                    max_abs_weight: *max_abs_weight,
                    support: Some(sup.clone()),
                    ..RandomMarginOptions::default()
                };
                Concept::Halfspace(gen_random_margin_halfspace(
                    dims.d,
                    sup.len(),
                    *gamma_min,
                    &opts,
                    &mut rng,
                )?)
            }
            ConceptSpec::Parity { vars } => {
                let sup = resolve_support(vars, &v_sorted, task_id, &mut rng)?;
                Concept::Parity(ParityConcept::new(dims.d, sup)?)
            }
            ConceptSpec::Fixed(c) => {
                if c.dim() != dims.d {
                    return Err(ConceptError::DimMismatch {
                        expected: dims.d,
                        got: c.dim(),
                    });
                }
                for &i in c.relevant() {
                    if !v_sorted.contains(&i) {
                        return Err(ConceptError::Invalid(format!(
                            "task {task_id}: support feature {i} escapes the shared set V"
                        )));
                    }
                }
                c.clone()
            }
        };
        for &i in concept.relevant() {
            debug_assert!(v_sorted.contains(&i));
            if !v_sorted.contains(&i) {
                return Err(ConceptError::Invalid(format!(
                    "task {task_id}: generated support feature {i} escapes the shared set V"
                )));
            }
        }
        let task = sample_labeled_task(&concept, dist, dims.m, task_id, seed)?;
        concepts.push(concept);
        tasks.push(task);
    }
    let ds = MultitaskDataset::new(*dims, tasks)?;
    Ok((ds, concepts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn embed(vals: &[i8], d: usize) -> Vec<i8> {
        let mut x = vec![1i8; d];
        x[..vals.len()].copy_from_slice(vals);
        x
    }

    #[test]
    fn eval_halfspace_examples() {
        let dict = SparseHalfspace::new(4, vec![0], vec![1.0]).unwrap();
        assert_eq!(dict.eval(&embed(&[1], 4)).unwrap(), 1);
        assert_eq!(dict.eval(&embed(&[-1], 4)).unwrap(), -1);

        let h = SparseHalfspace::new(5, vec![0, 1, 2], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(h.eval(&embed(&[1, 1, -1], 5)).unwrap(), 1);

        let h = SparseHalfspace::new(5, vec![0, 1, 2], vec![3.0, 1.0, 1.0]).unwrap();
        assert_eq!(h.eval(&embed(&[-1, 1, 1], 5)).unwrap(), -1);

        assert!(matches!(
            h.eval(&[1, 1]).unwrap_err(),
            ConceptError::DimMismatch { .. }
        ));
    }

    #[test]
    fn exact_margin_values() {
        assert_eq!(margin_of_weights(&[1.0]).unwrap(), 1.0);
        let m3 = margin_of_weights(&[1.0, 1.0, 1.0]).unwrap();
        assert!((m3 - 0.5773502691896258).abs() < 1e-15, "got {m3}");
        let m311 = margin_of_weights(&[3.0, 1.0, 1.0]).unwrap();
        assert!((m311 - 0.30151134457776363).abs() < 1e-15, "got {m311}");
        assert_eq!(margin_of_weights(&[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            SparseHalfspace::new(4, vec![0, 1], vec![1.0, 1.0]).unwrap_err(),
            ConceptError::ZeroMargin
        ));
    }

    #[test]
    fn margin_guard_rejects_large_support() {
        let w = vec![1.0; MARGIN_ENUM_GUARD + 1];
        assert!(matches!(
            margin_of_weights(&w).unwrap_err(),
            ConceptError::SupportTooLarge(_)
        ));
    }

    #[test]
    fn gray_walk_matches_direct() {
        // force both paths on the same vector by probing the internals
        let w = [2.0, -1.0, 3.0, 1.0, -2.0];
        assert_eq!(min_abs_dot_direct(&w), min_abs_dot_gray(&w));
        let w2 = [0.5, 1.25, -0.75, 2.5, 1.0, -1.5, 0.25];
        let a = min_abs_dot_direct(&w2);
        let b = min_abs_dot_gray(&w2);
        assert!((a - b).abs() < 1e-12, "direct {a} gray {b}");
    }

    #[test]
    fn majority_margins() {
        let h = gen_majority_halfspace(8, 1, &[3]).unwrap();
        assert_eq!(h.margin(), 1.0);
        assert_eq!(h.support(), &[3]);

        let h = gen_majority_halfspace(8, 3, &[0, 4, 7]).unwrap();
        assert!((h.margin() - 0.5773502691896258).abs() < 1e-15);

        assert!(gen_majority_halfspace(8, 2, &[0, 1]).is_err());

        for k in (1..=15usize).step_by(2) {
            let sup: Vec<usize> = (0..k).collect();
            let h = gen_majority_halfspace(16, k, &sup).unwrap();
            assert!(
                (h.margin() - 1.0 / (k as f64).sqrt()).abs() <= 1e-12,
                "k={k} margin {}",
                h.margin()
            );
        }
    }

    #[test]
    fn random_margin_dictator() {
        let seed = SeedSpec::new(5);
        let mut rng = seed.stream(0, Purpose::Concept);
        let h =
            gen_random_margin_halfspace(10, 1, 1.0, &RandomMarginOptions::default(), &mut rng)
                .unwrap();
        assert_eq!(h.margin(), 1.0);
        assert_eq!(h.support().len(), 1);
    }

    #[test]
    fn random_margin_majority_threshold() {
        let seed = SeedSpec::new(6);
        let mut rng = seed.stream(0, Purpose::Concept);
        let gamma_min = 1.0 / 3.0f64.sqrt();
        let h = gen_random_margin_halfspace(
            12,
            3,
            gamma_min,
            &RandomMarginOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert!(h.margin() >= 0.577, "margin {}", h.margin());
        assert_eq!(h.margin(), h.recompute_margin());
    }

    #[test]
    fn random_margin_impossible_target_exhausts() {
        // grid oracle: sign flips of the weights permute the sign patterns, so
        // scanning magnitudes exhausts all 3-sparse {+-1,..,+-3} vectors
        let mut best_grid = 0.0f64;
        for a in 1..=3i32 {
            for b in 1..=3i32 {
                for c in 1..=3i32 {
                    let m = margin_of_weights(&[a as f64, b as f64, c as f64]).unwrap();
                    best_grid = best_grid.max(m);
                }
            }
        }
        assert!(best_grid < 0.99, "grid best margin {best_grid}");

        let seed = SeedSpec::new(7);
        let mut rng = seed.stream(0, Purpose::Concept);
        let opts = RandomMarginOptions {
            attempts: 2000,
            ..RandomMarginOptions::default()
        };
        match gen_random_margin_halfspace(12, 3, 0.99, &opts, &mut rng).unwrap_err() {
            ConceptError::MarginSearchExhausted { attempts, best } => {
                assert_eq!(attempts, 2000);
                assert!(best <= best_grid + 1e-15, "best {best} vs grid {best_grid}");
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn eval_parity_examples() {
        let p = ParityConcept::new(6, vec![]).unwrap();
        assert_eq!(p.eval(&vec![1; 6]).unwrap(), 1);

        let p = ParityConcept::new(6, vec![0, 1]).unwrap();
        assert_eq!(p.eval(&embed(&[1, -1], 6)).unwrap(), -1);

        let p = ParityConcept::new(6, vec![0, 1, 2]).unwrap();
        assert_eq!(p.eval(&embed(&[-1, -1, -1], 6)).unwrap(), -1);

        assert!(p.eval(&[1, 1]).is_err());
    }

    #[test]
    fn finite_support_single_point_constant() {
        let pt = vec![1i8, -1, 1];
        let dist = InputDistribution::finite_support(vec![pt.clone()], vec![1.0]).unwrap();
        let concept = Concept::Parity(ParityConcept::new(3, vec![0, 2]).unwrap());
        let task = sample_labeled_task(&concept, &dist, 20, 1, SeedSpec::new(3)).unwrap();
        assert!(task.examples.iter().all(|ex| ex.x == pt && ex.y == 1));
    }

    #[test]
    fn sampling_deterministic() {
        let concept =
            Concept::Halfspace(SparseHalfspace::new(8, vec![2], vec![1.0]).unwrap());
        let dist = InputDistribution::uniform(8);
        let a = sample_labeled_task(&concept, &dist, 50, 4, SeedSpec::new(11)).unwrap();
        let b = sample_labeled_task(&concept, &dist, 50, 4, SeedSpec::new(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dictator_label_mean_concentrates() {
        let concept =
            Concept::Halfspace(SparseHalfspace::new(16, vec![5], vec![1.0]).unwrap());
        let dist = InputDistribution::uniform(16);
        let task = sample_labeled_task(&concept, &dist, 10_000, 1, SeedSpec::new(13)).unwrap();
        let mean: f64 =
            task.examples.iter().map(|ex| f64::from(ex.y)).sum::<f64>() / 10_000.0;
        assert!(mean.abs() <= 3.0 / (10_000f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn build_instance_shared_support() {
        let dims = ProblemDims::new(16, 4, 2, 30).unwrap();
        let v = vec![1, 5, 9, 13];
        let specs = vec![
            ConceptSpec::Parity {
                vars: SupportSpec::Explicit(vec![1]),
            },
            ConceptSpec::Parity {
                vars: SupportSpec::Explicit(vec![5, 9, 13]),
            },
        ];
        let dists = vec![InputDistribution::uniform(16)];
        let (ds, concepts) =
            build_multitask_instance(&dims, &v, &specs, &dists, SeedSpec::new(17)).unwrap();
        assert_eq!(concepts.len(), 2);
        let union: Vec<usize> = {
            let mut u: Vec<usize> = concepts.iter().flat_map(|c| c.relevant().to_vec()).collect();
            u.sort_unstable();
            u.dedup();
            u
        };
        assert_eq!(union, v);
        // realizability: every label matches its concept
        for (task, concept) in ds.tasks.iter().zip(&concepts) {
            for ex in &task.examples {
                assert_eq!(concept.eval(&ex.x).unwrap(), ex.y);
            }
        }
    }

    #[test]
    fn build_instance_rejects_escaping_support() {
        let dims = ProblemDims::new(16, 4, 1, 10).unwrap();
        let v = vec![1, 5, 9, 13];
        let specs = vec![ConceptSpec::Parity {
            vars: SupportSpec::Explicit(vec![2]),
        }];
        let dists = vec![InputDistribution::uniform(16)];
        let err =
            build_multitask_instance(&dims, &v, &specs, &dists, SeedSpec::new(17)).unwrap_err();
        assert!(err.to_string().contains("escapes"), "got {err}");
    }

    #[test]
    fn identical_majority_tasks_reduce_to_single_task_setting() {
        let dims = ProblemDims::new(12, 3, 4, 20).unwrap();
        let v = vec![2, 6, 10];
        let specs = vec![ConceptSpec::Majority {
            support: SupportSpec::Explicit(vec![2, 6, 10]),
        }];
        let dists = vec![InputDistribution::uniform(12)];
        let (_, concepts) =
            build_multitask_instance(&dims, &v, &specs, &dists, SeedSpec::new(19)).unwrap();
        for c in &concepts[1..] {
            assert_eq!(c, &concepts[0]);
        }
    }

    #[test]
    fn margin_soundness_on_random_points() {
        let seed = SeedSpec::new(23);
        let mut gen_rng = seed.stream(0, Purpose::Concept);
        for trial in 0..5 {
            let h = gen_random_margin_halfspace(
                20,
                3,
                0.2,
                &RandomMarginOptions::default(),
                &mut gen_rng,
            )
            .unwrap();
            let norm: f64 = h.weights().iter().map(|w| w * w).sum::<f64>().sqrt();
            let mut rng = seed.stream(trial + 1, Purpose::Data);
            let mut x = vec![0i8; 20];
            for _ in 0..1000 {
                seed::fill_signs(&mut rng, &mut x);
                let dot: f64 = h
                    .support()
                    .iter()
                    .zip(h.weights())
                    .map(|(&i, &w)| w * f64::from(x[i]))
                    .sum();
                assert!(dot.abs() / norm >= h.margin() - 1e-12);
            }
            assert_eq!(h.margin(), h.recompute_margin());
        }
    }

    #[test]
    fn concept_json_schema() {
        let h = SparseHalfspace::new(8, vec![1, 4], vec![2.0, -1.0]).unwrap();
        let json = serde_json::to_value(Concept::Halfspace(h.clone())).unwrap();
        assert_eq!(json["type"], "halfspace");
        assert_eq!(json["support"], serde_json::json!([1, 4]));
        assert_eq!(json["weights"], serde_json::json!([2.0, -1.0]));
        assert!(json["margin"].is_f64());
        let back: Concept = serde_json::from_value(json).unwrap();
        assert_eq!(back, Concept::Halfspace(h));

        let p = ParityConcept::new(8, vec![0, 3]).unwrap();
        let json = serde_json::to_value(Concept::Parity(p.clone())).unwrap();
        assert_eq!(json["type"], "parity");
        assert_eq!(json["V"], serde_json::json!([0, 3]));
        let back: Concept = serde_json::from_value(json).unwrap();
        assert_eq!(back, Concept::Parity(p));
    }
}
