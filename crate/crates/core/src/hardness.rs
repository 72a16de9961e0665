//! Threshold secret sharing of a feature subset over {-1,+1}, the hard
//! concept class built on it, the attribute-efficient learner that reads the
//! secret out of share-bit queries, the brute-force multitask learner, and
//! the reduction that turns a single-task parity sample into a multitask
//! instance whose share answers stay below the reconstruction threshold.

use std::collections::BTreeSet;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{ConceptError, InputDistribution, ParityConcept};
use crate::seed::{self, Purpose, SeedSpec};

#[derive(Debug, Error)]
pub enum HardnessError {
    #[error("d={0} must be a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("{0}")]
    Invalid(String),
    #[error("missing share bits for {} (p,q) pairs, first {:?}", missing.len(), missing.first())]
    AeIncomplete { missing: Vec<(usize, usize)> },
    #[error("inconsistent duplicate labels for share position (p={p}, q={q})")]
    InconsistentDuplicate { p: usize, q: usize },
    #[error("no hypothesis tuple over any size-k candidate set is consistent with the samples")]
    NotRealizable,
    #[error(transparent)]
    Concept(#[from] ConceptError),
}

/// Encoding geometry: d must be a power of two so each coordinate index fits
/// exactly log2(d) bits; every block carries one extra validity bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingParams {
    pub d: usize,
    pub k: usize,
    pub block_len: usize,
    pub payload_len: usize,
}

impl EncodingParams {
    pub fn new(d: usize, k: usize) -> Result<Self, HardnessError> {
        if d < 2 || !d.is_power_of_two() {
            return Err(HardnessError::NotPowerOfTwo(d));
        }
        if k == 0 {
            return Err(HardnessError::Invalid("k must be >= 1".into()));
        }
        let log2d = d.trailing_zeros() as usize;
        let block_len = log2d + 1;
        Ok(EncodingParams {
            d,
            k,
            block_len,
            payload_len: k * block_len,
        })
    }

    fn index_bits(&self) -> usize {
        self.block_len - 1
    }
}

/// A feature subset encoded as a {-1,+1} string of k blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSecret {
    pub bits: Vec<i8>,
}

/// Encode V into k blocks, sorted ascending: each occupied block is a +1
/// validity bit followed by the big-endian binary of the index (1 -> +1,
/// 0 -> -1); the trailing k - |V| blocks are all -1.
pub fn encode_set(v: &[usize], params: &EncodingParams) -> Result<EncodedSecret, HardnessError> {
    let mut sorted = v.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(HardnessError::Invalid("secret set has duplicates".into()));
    }
    if sorted.len() > params.k {
        return Err(HardnessError::Invalid(format!(
            "|V|={} exceeds k={}",
            sorted.len(),
            params.k
        )));
    }
    if let Some(&max) = sorted.last() {
        if max >= params.d {
            return Err(HardnessError::Invalid(format!(
                "coordinate {max} out of range for d={}",
                params.d
            )));
        }
    }
    let mut bits = Vec::with_capacity(params.payload_len);
    for &idx in &sorted {
        bits.push(1);
        for b in (0..params.index_bits()).rev() {
            bits.push(if (idx >> b) & 1 == 1 { 1 } else { -1 });
        }
    }
    bits.resize(params.payload_len, -1);
    Ok(EncodedSecret { bits })
}

/// Inverse of [`encode_set`] on its image; blocks starting with -1 are
/// ignored, so non-canonical strings decode permissively to a set.
pub fn decode_set(bits: &[i8], params: &EncodingParams) -> Result<Vec<usize>, HardnessError> {
    if bits.len() != params.payload_len {
        return Err(HardnessError::Invalid(format!(
            "payload has {} bits, expected {}",
            bits.len(),
            params.payload_len
        )));
    }
    if bits.iter().any(|&v| v != 1 && v != -1) {
        return Err(HardnessError::Invalid("payload bits must be +-1".into()));
    }
    let mut set = BTreeSet::new();
    for block in bits.chunks_exact(params.block_len) {
        if block[0] == -1 {
            continue;
        }
        let mut idx = 0usize;
        for &bit in &block[1..] {
            idx = (idx << 1) | usize::from(bit == 1);
        }
        set.insert(idx);
    }
    Ok(set.into_iter().collect())
}

/// The t shares of one secret plus the randomness that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareSet {
    pub t: usize,
    pub shares: Vec<Vec<i8>>,
    pub randomness: Vec<i8>,
}

/// Share an already-encoded payload: shares 0..t-1 are blocks of r, the last
/// share is the payload masked by the componentwise product of the others,
/// so the product of all t shares reproduces the payload.
pub fn share_bits(payload: &[i8], r: &[i8], t: usize) -> Result<Vec<Vec<i8>>, HardnessError> {
    if t < 2 {
        return Err(HardnessError::Invalid(format!("threshold t={t} must be >= 2")));
    }
    let len = payload.len();
    if r.len() != t * len {
        return Err(HardnessError::Invalid(format!(
            "randomness has {} bits, expected t*len = {}",
            r.len(),
            t * len
        )));
    }
    if payload.iter().chain(r.iter()).any(|&v| v != 1 && v != -1) {
        return Err(HardnessError::Invalid("payload and randomness bits must be +-1".into()));
    }
    let mut shares: Vec<Vec<i8>> = (0..t - 1)
        .map(|p| r[p * len..(p + 1) * len].to_vec())
        .collect();
    let mut last = payload.to_vec();
    for share in &shares {
        for (l, &s) in last.iter_mut().zip(share) {
            *l *= s;
        }
    }
    shares.push(last);
    Ok(shares)
}

/// Share a feature subset with threshold t and randomness r (length
/// t * payload_len; only the first t-1 blocks are consumed).
pub fn share(
    v: &[usize],
    r: &[i8],
    t: usize,
    params: &EncodingParams,
) -> Result<ShareSet, HardnessError> {
    let encoded = encode_set(v, params)?;
    let shares = share_bits(&encoded.bits, r, t)?;
    Ok(ShareSet {
        t,
        shares,
        randomness: r.to_vec(),
    })
}

/// Componentwise product of all shares.
pub fn reconstruct_bits(shares: &[Vec<i8>]) -> Result<Vec<i8>, HardnessError> {
    let first = shares
        .first()
        .ok_or_else(|| HardnessError::Invalid("no shares given".into()))?;
    let len = first.len();
    let mut product = vec![1i8; len];
    for share in shares {
        if share.len() != len {
            return Err(HardnessError::Invalid(format!(
                "share length {} disagrees with {}",
                share.len(),
                len
            )));
        }
        if share.iter().any(|&v| v != 1 && v != -1) {
            return Err(HardnessError::Invalid("share bits must be +-1".into()));
        }
        for (p, &s) in product.iter_mut().zip(share) {
            *p *= s;
        }
    }
    Ok(product)
}

/// Multiply all t shares together and decode the resulting payload.
pub fn reconstruct(
    shares: &[Vec<i8>],
    params: &EncodingParams,
) -> Result<Vec<usize>, HardnessError> {
    decode_set(&reconstruct_bits(shares)?, params)
}

/// Side-information distribution: p uniform over 0..t, q uniform over the
/// payload positions, b = +1 with probability epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideDistribution {
    pub epsilon: f64,
    pub t: usize,
    pub payload_len: usize,
}

impl SideDistribution {
    pub fn new(epsilon: f64, t: usize, payload_len: usize) -> Result<Self, HardnessError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(HardnessError::Invalid(format!(
                "epsilon must lie in [0,1], got {epsilon}"
            )));
        }
        if t == 0 || payload_len == 0 {
            return Err(HardnessError::Invalid("t and payload_len must be >= 1".into()));
        }
        Ok(SideDistribution {
            epsilon,
            t,
            payload_len,
        })
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> (usize, usize, i8) {
        let p = seed::below(rng, self.t);
        let q = seed::below(rng, self.payload_len);
        let b = if seed::coin(rng, self.epsilon) { 1 } else { -1 };
        (p, q, b)
    }
}

/// A hard-class concept: answers parity queries when b = -1 and share-bit
/// queries when b = +1. Share indices p, q are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardConcept {
    pub v: Vec<usize>,
    pub r: Vec<i8>,
    pub t: usize,
    pub params: EncodingParams,
    base: ParityConcept,
    shares: ShareSet,
}

impl HardConcept {
    pub fn new(
        v: Vec<usize>,
        r: Vec<i8>,
        t: usize,
        params: EncodingParams,
    ) -> Result<Self, HardnessError> {
        let shares = share(&v, &r, t, &params)?;
        let base = ParityConcept::new(params.d, v.clone())?;
        Ok(HardConcept {
            v,
            r,
            t,
            params,
            base,
            shares,
        })
    }

    pub fn shares(&self) -> &ShareSet {
        &self.shares
    }

    pub fn parity(&self) -> &ParityConcept {
        &self.base
    }

    pub fn eval(&self, x: &[i8], p: usize, q: usize, b: i8) -> Result<i8, HardnessError> {
        if p >= self.t || q >= self.params.payload_len {
            return Err(HardnessError::Invalid(format!(
                "share position (p={p}, q={q}) out of range ({}x{})",
                self.t, self.params.payload_len
            )));
        }
        match b {
            -1 => Ok(self.base.eval(x)?),
            1 => Ok(self.shares.shares[p][q]),
            other => Err(HardnessError::Invalid(format!("b must be +-1, got {other}"))),
        }
    }
}

/// A labeled hard-class example: the hypercube point plus side information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardExample {
    pub x: Vec<i8>,
    pub p: usize,
    pub q: usize,
    pub b: i8,
    pub y: i8,
}

/// Draw m labeled examples of a hard concept with features from
/// d_x x (side distribution at epsilon).
pub fn sample_hard_task(
    concept: &HardConcept,
    d_x: &InputDistribution,
    epsilon: f64,
    m: usize,
    task_id: usize,
    spec: SeedSpec,
) -> Result<Vec<HardExample>, HardnessError> {
    if d_x.dim() != concept.params.d {
        return Err(HardnessError::Invalid(format!(
            "distribution dimension {} disagrees with d={}",
            d_x.dim(),
            concept.params.d
        )));
    }
    let side = SideDistribution::new(epsilon, concept.t, concept.params.payload_len)?;
    let mut x_rng = spec.stream(task_id, Purpose::Data);
    let mut side_rng = spec.stream(task_id, Purpose::SideInfo);
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let x = d_x.sample(&mut x_rng);
        let (p, q, b) = side.sample(&mut side_rng);
        let y = concept.eval(&x, p, q, b)?;
        out.push(HardExample { x, p, q, b, y });
    }
    Ok(out)
}

/// Sample size from the coverage argument:
/// ceil((8/eps) * t * payload_len * ln(2 * t * payload_len / delta)).
pub fn ae_sample_size(params: &EncodingParams, t: usize, eps: f64, delta: f64) -> usize {
    let tl = (t * params.payload_len) as f64;
    ((8.0 / eps) * tl * (2.0 * tl / delta).ln()).ceil() as usize
}

/// Attribute-efficient learner: read every share bit off the b = +1 samples,
/// multiply across shares per payload position, decode, return the parity.
/// Fails listing the missing (p, q) pairs if coverage is incomplete.
pub fn ae_learn(
    sample: &[HardExample],
    params: &EncodingParams,
    t: usize,
) -> Result<ParityConcept, HardnessError> {
    let len = params.payload_len;
    let mut table: Vec<Vec<Option<i8>>> = vec![vec![None; len]; t];
    for ex in sample {
        if ex.b != 1 {
            continue;
        }
        if ex.p >= t || ex.q >= len {
            return Err(HardnessError::Invalid(format!(
                "share position (p={}, q={}) out of range ({t}x{len})",
                ex.p, ex.q
            )));
        }
        match table[ex.p][ex.q] {
            None => table[ex.p][ex.q] = Some(ex.y),
            Some(prev) if prev != ex.y => {
                return Err(HardnessError::InconsistentDuplicate { p: ex.p, q: ex.q })
            }
            Some(_) => {}
        }
    }
    let mut missing = Vec::new();
    for (p, row) in table.iter().enumerate() {
        for (q, cell) in row.iter().enumerate() {
            if cell.is_none() {
                missing.push((p, q));
            }
        }
    }
    if !missing.is_empty() {
        return Err(HardnessError::AeIncomplete { missing });
    }
    let payload: Vec<i8> = (0..len)
        .map(|q| (0..t).map(|p| table[p][q].expect("coverage checked")).product())
        .collect();
    let v = decode_set(&payload, params)?;
    Ok(ParityConcept::new(params.d, v)?)
}

// Subset masks of a size-k candidate set, ordered so that the masks'
// element lists (ascending positions) are lexicographically increasing.
fn subset_masks_lex(k: usize) -> Vec<u32> {
    let mut masks: Vec<u32> = (0..(1u32 << k)).collect();
    let elems = |mask: u32| -> Vec<usize> { (0..k).filter(|&j| (mask >> j) & 1 == 1).collect() };
    masks.sort_by(|&a, &b| elems(a).cmp(&elems(b)));
    masks
}

/// Exhaustive multitask learner: scan size-k candidate sets V_x in
/// lexicographic order and, per task, subsets of V_x in lexicographic order,
/// returning the first tuple consistent with every task's b = -1 samples.
pub fn brute_force_multitask_learn(
    task_samples: &[Vec<HardExample>],
    params: &EncodingParams,
    k: usize,
) -> Result<Vec<ParityConcept>, HardnessError> {
    let d = params.d;
    if k == 0 || k > d {
        return Err(HardnessError::Invalid(format!("need 1 <= k <= d, got k={k} d={d}")));
    }
    if k > 20 {
        return Err(HardnessError::Invalid(format!(
            "k={k} exceeds the 2^k subset enumeration guard (20)"
        )));
    }
    if task_samples.is_empty() {
        return Err(HardnessError::Invalid("no tasks given".into()));
    }
    // restrict each task to its b = -1 samples once
    let neg_tasks: Vec<Vec<(&[i8], i8)>> = task_samples
        .iter()
        .map(|samples| {
            samples
                .iter()
                .filter(|ex| ex.b == -1)
                .map(|ex| (ex.x.as_slice(), ex.y))
                .collect()
        })
        .collect();
    let subset_order = subset_masks_lex(k);

    let mut candidate: Vec<usize> = (0..k).collect();
    loop {
        // per task, first subset of the candidate consistent with all
        // negative samples; bit j of `neg_bits` records x[candidate[j]] == -1
        let mut hypotheses: Option<Vec<ParityConcept>> = Some(Vec::with_capacity(neg_tasks.len()));
        'tasks: for negs in &neg_tasks {
            let patterns: Vec<(u32, i8)> = negs
                .iter()
                .map(|(x, y)| {
                    let mut bits = 0u32;
                    for (j, &c) in candidate.iter().enumerate() {
                        if x[c] == -1 {
                            bits |= 1 << j;
                        }
                    }
                    (bits, *y)
                })
                .collect();
            for &mask in &subset_order {
                let consistent = patterns
                    .iter()
                    .all(|&(bits, y)| ((mask & bits).count_ones() % 2 == 0) == (y == 1));
                if consistent {
                    let vars: Vec<usize> = (0..k)
                        .filter(|&j| (mask >> j) & 1 == 1)
                        .map(|j| candidate[j])
                        .collect();
                    hypotheses
                        .as_mut()
                        .expect("still building")
                        .push(ParityConcept::new(d, vars)?);
                    continue 'tasks;
                }
            }
            hypotheses = None;
            break;
        }
        if let Some(h) = hypotheses {
            return Ok(h);
        }
        if !next_combination(&mut candidate, d) {
            return Err(HardnessError::NotRealizable);
        }
    }
}

// Advance a sorted k-combination of 0..d to its lexicographic successor.
fn next_combination(c: &mut [usize], d: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] + 1 <= d - (k - i) {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Majority vote over all hypotheses and share positions at b = -1. Each
/// hypothesis answers parity queries independently of (p, q), so the vote of
/// task i carries multiplicity (m+1) * payload_len; the tally over tasks is
/// therefore identical to the full (i, p, q) vote, ties included. Exact ties
/// resolve to +1.
pub fn majority_predict(
    hypotheses: &[ParityConcept],
    x: &[i8],
    _params: &EncodingParams,
    _m: usize,
) -> Result<i8, HardnessError> {
    let mut pos = 0usize;
    let mut neg = 0usize;
    for h in hypotheses {
        if h.eval(x)? == 1 {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    Ok(if pos >= neg { 1 } else { -1 })
}

/// One task of a reduction dataset with its bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionTask {
    pub examples: Vec<HardExample>,
    pub r: Vec<i8>,
    /// Share indices p that occur among this task's b = +1 samples.
    pub used_share_positions: Vec<usize>,
}

/// A single-task parity sample recast as n hard-class tasks of m examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionDataset {
    pub params: EncodingParams,
    /// Reconstruction threshold, always m + 1.
    pub t: usize,
    pub epsilon: f64,
    pub tasks: Vec<ReductionTask>,
}

/// Split a parity sample into n tasks of m examples; b = +1 examples are
/// relabeled with share bits of the empty auxiliary secret under per-task
/// randomness r_i (drawn distinct across tasks), b = -1 examples keep their
/// parity labels. Requires nm <= |S|; the threshold t = m + 1 exceeds the
/// number of samples per task.
pub fn build_reduction_dataset(
    s: &[(Vec<i8>, i8)],
    n: usize,
    m: usize,
    epsilon: f64,
    params: &EncodingParams,
    spec: SeedSpec,
) -> Result<ReductionDataset, HardnessError> {
    if n == 0 || m == 0 {
        return Err(HardnessError::Invalid("n and m must be >= 1".into()));
    }
    if n * m > s.len() {
        return Err(HardnessError::Invalid(format!(
            "nm = {} exceeds sample size {}",
            n * m,
            s.len()
        )));
    }
    let t = m + 1;
    let side = SideDistribution::new(epsilon, t, params.payload_len)?;
    let v_aux: Vec<usize> = Vec::new();

    let mut seen = std::collections::HashSet::new();
    let mut tasks = Vec::with_capacity(n);
    for i in 1..=n {
        let mut r_rng = spec.stream(i, Purpose::ShareRandomness);
        let mut r = vec![0i8; t * params.payload_len];
        loop {
            seed::fill_signs(&mut r_rng, &mut r);
            if seen.insert(r.clone()) {
                break;
            }
        }
        let aux_shares = share(&v_aux, &r, t, params)?;
        let mut side_rng = spec.stream(i, Purpose::SideInfo);
        let mut examples = Vec::with_capacity(m);
        let mut used = BTreeSet::new();
        for j in 0..m {
            let (x, y) = &s[(i - 1) * m + j];
            let (p, q, b) = side.sample(&mut side_rng);
            let label = if b == 1 {
                used.insert(p);
                aux_shares.shares[p][q]
            } else {
                *y
            };
            examples.push(HardExample {
                x: x.clone(),
                p,
                q,
                b,
                y: label,
            });
        }
        tasks.push(ReductionTask {
            examples,
            r,
            used_share_positions: used.into_iter().collect(),
        });
    }
    Ok(ReductionDataset {
        params: *params,
        t,
        epsilon,
        tasks,
    })
}

/// Construct the witness randomness r' under which the true secret's shares
/// agree with the auxiliary shares at every share index this task observed.
/// Exists because at most m distinct indices occur and the threshold is m+1.
pub fn embedding_witness(
    task: &ReductionTask,
    v_true: &[usize],
    t: usize,
    params: &EncodingParams,
) -> Result<HardConcept, HardnessError> {
    let len = params.payload_len;
    if task.r.len() != t * len {
        return Err(HardnessError::Invalid(format!(
            "task randomness has {} bits, expected {}",
            task.r.len(),
            t * len
        )));
    }
    let used: BTreeSet<usize> = task.used_share_positions.iter().copied().collect();
    if used.len() >= t {
        return Err(HardnessError::Invalid(
            "task observed every share index; no free index for the witness".into(),
        ));
    }
    let v_tilde = encode_set(v_true, params)?.bits;
    let aux_tilde = encode_set(&[], params)?.bits;
    let mut r_prime = task.r.clone();
    if let Some(free) = (0..t - 1).find(|p| !used.contains(p)) {
        // flip the free r-block so the masked share of (V, r') reproduces
        // the auxiliary masked share
        for q in 0..len {
            r_prime[free * len + q] *= v_tilde[q] * aux_tilde[q];
        }
    }
    // else: every 0..t-2 block is used, so t-1 (the masked share) is free
    // and r' = r already matches on all observed indices
    HardConcept::new(v_true.to_vec(), r_prime, t, *params)
}

/// Check that a witness concept reproduces every label of a reduction task.
pub fn verify_embedding(
    task: &ReductionTask,
    witness: &HardConcept,
) -> Result<bool, HardnessError> {
    for ex in &task.examples {
        if witness.eval(&ex.x, ex.p, ex.q, ex.b)? != ex.y {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HardHeader {
    d: usize,
    k_hint: usize,
    n: usize,
    m: usize,
    t: usize,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HardLine {
    task: usize,
    x: Vec<i8>,
    p: usize,
    q: usize,
    b: i8,
    y: i8,
}

/// A hard-class multitask dataset destined for file storage: the JSON-lines
/// dataset format extended with the side-information fields p, q, b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardDataset {
    pub params: EncodingParams,
    pub t: usize,
    pub epsilon: f64,
    pub tasks: Vec<Vec<HardExample>>,
}

impl From<&ReductionDataset> for HardDataset {
    fn from(red: &ReductionDataset) -> Self {
        HardDataset {
            params: red.params,
            t: red.t,
            epsilon: red.epsilon,
            tasks: red.tasks.iter().map(|task| task.examples.clone()).collect(),
        }
    }
}

/// Write a hard-class dataset as JSON lines: a header object, then one
/// object per example with fields task, x, p, q, b, y.
pub fn write_hard_dataset(
    path: &std::path::Path,
    ds: &HardDataset,
) -> Result<(), HardnessError> {
    use std::io::Write;
    let n = ds.tasks.len();
    let m = ds.tasks.first().map_or(0, |t| t.len());
    if n == 0 || m == 0 || ds.tasks.iter().any(|t| t.len() != m) {
        return Err(HardnessError::Invalid(
            "dataset needs n >= 1 equally sized non-empty tasks".into(),
        ));
    }
    let file = std::fs::File::create(path)
        .map_err(|e| HardnessError::Invalid(format!("i/o error on {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write_line = |line: String| -> Result<(), HardnessError> {
        writeln!(out, "{line}")
            .map_err(|e| HardnessError::Invalid(format!("i/o error on {}: {e}", path.display())))
    };
    let header = HardHeader {
        d: ds.params.d,
        k_hint: ds.params.k,
        n,
        m,
        t: ds.t,
        epsilon: ds.epsilon,
    };
    write_line(serde_json::to_string(&header).expect("header serializes"))?;
    for (i, task) in ds.tasks.iter().enumerate() {
        for ex in task {
            let line = HardLine {
                task: i + 1,
                x: ex.x.clone(),
                p: ex.p,
                q: ex.q,
                b: ex.b,
                y: ex.y,
            };
            write_line(serde_json::to_string(&line).expect("line serializes"))?;
        }
    }
    Ok(())
}

/// Read and validate a dataset written by [`write_hard_dataset`].
pub fn read_hard_dataset(path: &std::path::Path) -> Result<HardDataset, HardnessError> {
    use std::io::BufRead;
    let file = std::fs::File::open(path)
        .map_err(|e| HardnessError::Invalid(format!("i/o error on {}: {e}", path.display())))?;
    let mut lines = std::io::BufReader::new(file).lines().enumerate();
    let header: HardHeader = match lines.next() {
        None => return Err(HardnessError::Invalid("missing header".into())),
        Some((_, line)) => {
            let line =
                line.map_err(|e| HardnessError::Invalid(format!("i/o error: {e}")))?;
            serde_json::from_str(&line)
                .map_err(|e| HardnessError::Invalid(format!("line 1: bad header: {e}")))?
        }
    };
    let params = EncodingParams::new(header.d, header.k_hint)?;
    if header.t < 2 {
        return Err(HardnessError::Invalid(format!("header t={} must be >= 2", header.t)));
    }
    let mut tasks: Vec<Vec<HardExample>> = vec![Vec::with_capacity(header.m); header.n];
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| HardnessError::Invalid(format!("i/o error: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: HardLine = serde_json::from_str(&line)
            .map_err(|e| HardnessError::Invalid(format!("line {lineno}: {e}")))?;
        if row.task == 0 || row.task > header.n {
            return Err(HardnessError::Invalid(format!(
                "line {lineno}: task {} out of range 1..={}",
                row.task, header.n
            )));
        }
        if row.x.len() != header.d || row.x.iter().any(|&v| v != 1 && v != -1) {
            return Err(HardnessError::Invalid(format!(
                "line {lineno}: x must be a +-1 vector of length {}",
                header.d
            )));
        }
        if row.p >= header.t || row.q >= params.payload_len {
            return Err(HardnessError::Invalid(format!(
                "line {lineno}: share position (p={}, q={}) out of range ({}x{})",
                row.p, row.q, header.t, params.payload_len
            )));
        }
        if (row.b != 1 && row.b != -1) || (row.y != 1 && row.y != -1) {
            return Err(HardnessError::Invalid(format!(
                "line {lineno}: b and y must be +-1"
            )));
        }
        tasks[row.task - 1].push(HardExample {
            x: row.x,
            p: row.p,
            q: row.q,
            b: row.b,
            y: row.y,
        });
    }
    for (i, task) in tasks.iter().enumerate() {
        if task.len() != header.m {
            return Err(HardnessError::Invalid(format!(
                "task {} has {} examples, declared m={}",
                i + 1,
                task.len(),
                header.m
            )));
        }
    }
    Ok(HardDataset {
        params,
        t: header.t,
        epsilon: header.epsilon,
        tasks,
    })
}

/// Pack a {-1,+1} string into lowercase hex, MSB-first, zero-padded.
pub fn signs_to_hex(bits: &[i8]) -> String {
    let mut out = String::with_capacity(bits.len().div_ceil(8) * 2);
    for chunk in bits.chunks(8) {
        let mut byte = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            if b == 1 {
                byte |= 0x80 >> i;
            }
        }
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Inverse of [`signs_to_hex`] for a known bit length.
pub fn hex_to_signs(hex: &str, len: usize) -> Result<Vec<i8>, HardnessError> {
    let expected_bytes = len.div_ceil(8);
    if hex.len() != expected_bytes * 2 {
        return Err(HardnessError::Invalid(format!(
            "hex string has {} chars, expected {} for {len} bits",
            hex.len(),
            expected_bytes * 2
        )));
    }
    let mut bits = Vec::with_capacity(len);
    for i in 0..expected_bytes {
        let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
            .map_err(|e| HardnessError::Invalid(format!("bad hex: {e}")))?;
        for j in 0..8 {
            if bits.len() < len {
                bits.push(if byte & (0x80 >> j) != 0 { 1 } else { -1 });
            }
        }
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedSpec;

    fn params(d: usize, k: usize) -> EncodingParams {
        EncodingParams::new(d, k).unwrap()
    }

    #[test]
    fn encoding_geometry() {
        let p = params(4, 2);
        assert_eq!(p.block_len, 3);
        assert_eq!(p.payload_len, 6);
        assert!(EncodingParams::new(3, 1).is_err());
        assert!(EncodingParams::new(0, 1).is_err());
    }

    #[test]
    fn encode_examples() {
        let p1 = params(4, 1);
        assert_eq!(encode_set(&[2], &p1).unwrap().bits, vec![1, 1, -1]);

        let p2 = params(4, 2);
        assert_eq!(
            encode_set(&[2], &p2).unwrap().bits,
            vec![1, 1, -1, -1, -1, -1]
        );

        assert_eq!(encode_set(&[], &p2).unwrap().bits, vec![-1; 6]);
    }

    #[test]
    fn decode_examples() {
        let p1 = params(4, 1);
        assert_eq!(decode_set(&[1, -1, 1], &p1).unwrap(), vec![1]);
        assert_eq!(decode_set(&[-1, -1, -1], &p1).unwrap(), Vec::<usize>::new());
        assert!(decode_set(&[1, -1], &p1).is_err());
    }

    #[test]
    fn encode_decode_roundtrip_exhaustive_small() {
        for (d, k) in [(4usize, 1usize), (4, 2), (8, 2), (16, 3)] {
            let p = params(d, k);
            // every subset of size <= k via masks
            for mask in 0u32..(1 << d) {
                let v: Vec<usize> = (0..d).filter(|&i| (mask >> i) & 1 == 1).collect();
                if v.len() > k {
                    continue;
                }
                let enc = encode_set(&v, &p).unwrap();
                assert_eq!(decode_set(&enc.bits, &p).unwrap(), v);
            }
        }
    }

    #[test]
    fn share_literal_example() {
        // payload (+1,-1), one r block (-1,+1) followed by unused bits
        let shares = share_bits(&[1, -1], &[-1, 1, 1, 1], 2).unwrap();
        assert_eq!(shares[0], vec![-1, 1]);
        assert_eq!(shares[1], vec![-1, -1]);
        let product = reconstruct_bits(&shares).unwrap();
        assert_eq!(product, vec![1, -1]);
    }

    #[test]
    fn share_identity_mask() {
        let p = params(8, 2);
        let r = vec![1i8; 3 * p.payload_len];
        let ss = share(&[3, 6], &r, 3, &p).unwrap();
        assert_eq!(ss.shares[2], encode_set(&[3, 6], &p).unwrap().bits);
        assert_eq!(reconstruct(&ss.shares, &p).unwrap(), vec![3, 6]);
    }

    #[test]
    fn flipped_share_bit_changes_the_secret_silently() {
        // no integrity guarantee: corrupting one bit still decodes to a set
        let p = params(8, 2);
        let r = vec![1i8; 3 * p.payload_len];
        let mut ss = share(&[3, 6], &r, 3, &p).unwrap();
        ss.shares[1][1] = -ss.shares[1][1];
        let decoded = reconstruct(&ss.shares, &p).unwrap();
        assert_ne!(decoded, vec![3, 6]);
    }

    #[test]
    fn reconstruct_random_schemes() {
        let spec = SeedSpec::new(31);
        let mut rng = spec.stream(0, Purpose::ShareRandomness);
        for trial in 0..200 {
            let d = [4usize, 8, 16][trial % 3];
            let k = 1 + trial % 3;
            let p = params(d, k);
            let t = 2 + trial % 4;
            let size = seed::below(&mut rng, k + 1);
            let v = seed::subset(&mut rng, d, size);
            let mut r = vec![0i8; t * p.payload_len];
            seed::fill_signs(&mut rng, &mut r);
            let ss = share(&v, &r, t, &p).unwrap();
            assert_eq!(reconstruct(&ss.shares, &p).unwrap(), v);
        }
    }

    // exhaustive pairwise hiding at t=3: the joint distribution of any two
    // shares over uniform r is the same multiset for every secret
    #[test]
    fn two_of_three_shares_hide_the_secret() {
        let p = params(4, 1);
        let t = 3;
        let r_len = t * p.payload_len;
        let secrets: Vec<Vec<usize>> =
            vec![vec![], vec![0], vec![1], vec![2], vec![3]];
        for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let mut dists: Vec<std::collections::BTreeMap<(Vec<i8>, Vec<i8>), usize>> =
                Vec::new();
            for v in &secrets {
                let mut counts = std::collections::BTreeMap::new();
                for bits in 0u32..(1 << r_len) {
                    let r: Vec<i8> = (0..r_len)
                        .map(|i| if (bits >> i) & 1 == 1 { 1 } else { -1 })
                        .collect();
                    let ss = share(v, &r, t, &p).unwrap();
                    *counts
                        .entry((ss.shares[a].clone(), ss.shares[b].clone()))
                        .or_insert(0) += 1;
                }
                dists.push(counts);
            }
            for d in &dists[1..] {
                assert_eq!(d, &dists[0], "positions ({a},{b})");
            }
        }
    }

    #[test]
    fn hard_concept_eval_cases() {
        let p = params(4, 1);
        let t = 3;
        let r = vec![1i8; t * p.payload_len];
        let c = HardConcept::new(vec![2], r, t, p).unwrap();

        // b = -1: parity of x over V, independent of (p, q)
        let x = vec![1, 1, -1, 1];
        for pp in 0..t {
            for q in 0..p.payload_len {
                assert_eq!(c.eval(&x, pp, q, -1).unwrap(), -1);
            }
        }
        // b = +1, p < t-1: an r bit (all +1 here)
        assert_eq!(c.eval(&x, 0, 1, 1).unwrap(), 1);
        // b = +1, p = t-1 with identity mask: the payload bit at q
        let payload = encode_set(&[2], &p).unwrap().bits;
        for q in 0..p.payload_len {
            assert_eq!(c.eval(&x, t - 1, q, 1).unwrap(), payload[q]);
        }
        assert!(c.eval(&x, t, 0, 1).is_err());
        assert!(c.eval(&x, 0, p.payload_len, 1).is_err());
    }

    fn make_concept(d: usize, k: usize, t: usize, v: Vec<usize>, seed: u64) -> HardConcept {
        let p = params(d, k);
        let mut rng = SeedSpec::new(seed).stream(0, Purpose::ShareRandomness);
        let mut r = vec![0i8; t * p.payload_len];
        seed::fill_signs(&mut rng, &mut r);
        HardConcept::new(v, r, t, p).unwrap()
    }

    #[test]
    fn hard_task_epsilon_extremes() {
        let c = make_concept(8, 2, 4, vec![1, 5], 41);
        let dist = InputDistribution::uniform(8);
        let all_neg = sample_hard_task(&c, &dist, 0.0, 50, 1, SeedSpec::new(42)).unwrap();
        assert!(all_neg.iter().all(|ex| ex.b == -1));
        assert!(all_neg
            .iter()
            .all(|ex| ex.y == c.parity().eval(&ex.x).unwrap()));

        let all_pos = sample_hard_task(&c, &dist, 1.0, 50, 1, SeedSpec::new(42)).unwrap();
        assert!(all_pos.iter().all(|ex| ex.b == 1));
    }

    #[test]
    fn hard_task_b_fraction_concentrates() {
        let c = make_concept(8, 2, 4, vec![1, 5], 43);
        let dist = InputDistribution::uniform(8);
        let eps = 0.3;
        let m = 10_000;
        let sample = sample_hard_task(&c, &dist, eps, m, 1, SeedSpec::new(44)).unwrap();
        let frac = sample.iter().filter(|ex| ex.b == 1).count() as f64 / m as f64;
        let bound = 3.0 * (eps * (1.0 - eps) / m as f64).sqrt();
        assert!((frac - eps).abs() <= bound, "frac {frac} vs eps {eps}");
    }

    #[test]
    fn ae_learn_recovers_with_full_coverage() {
        let p = params(16, 3);
        let t = 5;
        let c = make_concept(16, 3, t, vec![2, 7, 11], 45);
        // synthesize one b=+1 example per (p,q) pair
        let mut sample = Vec::new();
        for pp in 0..t {
            for q in 0..p.payload_len {
                let y = c.eval(&vec![1; 16], pp, q, 1).unwrap();
                sample.push(HardExample {
                    x: vec![1; 16],
                    p: pp,
                    q,
                    b: 1,
                    y,
                });
            }
        }
        let learned = ae_learn(&sample, &p, t).unwrap();
        assert_eq!(learned.vars, vec![2, 7, 11]);
        // oracle cross-check: reconstructing the concept's own shares gives
        // the same secret the learner read off the labels
        assert_eq!(reconstruct(&c.shares().shares, &p).unwrap(), vec![2, 7, 11]);
    }

    #[test]
    fn ae_learn_reports_missing_pairs() {
        let p = params(16, 3);
        let err = ae_learn(&[], &p, 4).unwrap_err();
        match err {
            HardnessError::AeIncomplete { missing } => {
                assert_eq!(missing.len(), 4 * p.payload_len);
            }
            other => panic!("expected incomplete, got {other:?}"),
        }
    }

    #[test]
    fn ae_learn_rejects_conflicting_duplicates() {
        let p = params(4, 1);
        let mk = |y: i8| HardExample {
            x: vec![1; 4],
            p: 0,
            q: 1,
            b: 1,
            y,
        };
        let err = ae_learn(&[mk(1), mk(-1)], &p, 2).unwrap_err();
        assert!(matches!(
            err,
            HardnessError::InconsistentDuplicate { p: 0, q: 1 }
        ));
    }

    #[test]
    fn ae_sample_size_frozen() {
        let p = params(64, 3);
        assert_eq!(p.payload_len, 21);
        assert_eq!(ae_sample_size(&p, 21, 0.2, 0.1), 160_256);
    }

    #[test]
    fn brute_force_full_truth_table() {
        let p = params(4, 2);
        let concept = ParityConcept::new(4, vec![1, 3]).unwrap();
        let sample: Vec<HardExample> = (0u32..16)
            .map(|bits| {
                let x: Vec<i8> = (0..4)
                    .map(|i| if (bits >> i) & 1 == 1 { 1 } else { -1 })
                    .collect();
                let y = concept.eval(&x).unwrap();
                HardExample { x, p: 0, q: 0, b: -1, y }
            })
            .collect();
        let hyps = brute_force_multitask_learn(&[sample], &p, 2).unwrap();
        assert_eq!(hyps[0].vars, vec![1, 3]);
    }

    #[test]
    fn brute_force_vacuous_returns_empty_parities() {
        let p = params(8, 2);
        let all_pos = vec![HardExample {
            x: vec![1; 8],
            p: 0,
            q: 0,
            b: 1,
            y: 1,
        }];
        let hyps = brute_force_multitask_learn(&[all_pos.clone(), all_pos], &p, 2).unwrap();
        assert!(hyps.iter().all(|h| h.vars.is_empty()));
        // empty parity predicts +1 everywhere
        assert_eq!(hyps[0].eval(&vec![-1; 8]).unwrap(), 1);
    }

    #[test]
    fn brute_force_two_tasks_recover_their_supports() {
        let pr = params(16, 2);
        let spec = SeedSpec::new(47);
        let t1 = ParityConcept::new(16, vec![3]).unwrap();
        let t2 = ParityConcept::new(16, vec![9]).unwrap();
        let dist = InputDistribution::uniform(16);
        let mut tasks = Vec::new();
        for (id, c) in [(1usize, &t1), (2, &t2)] {
            let mut rng = spec.stream(id, Purpose::Data);
            let sample: Vec<HardExample> = (0..60)
                .map(|_| {
                    let x = dist.sample(&mut rng);
                    let y = c.eval(&x).unwrap();
                    HardExample { x, p: 0, q: 0, b: -1, y }
                })
                .collect();
            tasks.push(sample);
        }
        let hyps = brute_force_multitask_learn(&tasks, &pr, 2).unwrap();
        // fresh holdout: predictions match the ground truth
        let mut rng = spec.stream(9, Purpose::Holdout);
        for _ in 0..500 {
            let x = dist.sample(&mut rng);
            assert_eq!(hyps[0].eval(&x).unwrap(), t1.eval(&x).unwrap());
            assert_eq!(hyps[1].eval(&x).unwrap(), t2.eval(&x).unwrap());
        }
    }

    #[test]
    fn majority_vote_matches_literal_triple_loop() {
        let pr = params(8, 2);
        let m = 3;
        let hyps = vec![
            ParityConcept::new(8, vec![0]).unwrap(),
            ParityConcept::new(8, vec![1]).unwrap(),
            ParityConcept::new(8, vec![0, 1]).unwrap(),
            ParityConcept::new(8, vec![]).unwrap(),
        ];
        let literal = |x: &[i8]| -> i8 {
            let mut pos = 0i64;
            let mut neg = 0i64;
            for h in &hyps {
                for _p in 0..m + 1 {
                    for _q in 0..pr.payload_len {
                        if h.eval(x).unwrap() == 1 {
                            pos += 1;
                        } else {
                            neg += 1;
                        }
                    }
                }
            }
            if pos >= neg {
                1
            } else {
                -1
            }
        };
        for bits in 0u32..256 {
            let x: Vec<i8> = (0..8)
                .map(|i| if (bits >> i) & 1 == 1 { 1 } else { -1 })
                .collect();
            assert_eq!(majority_predict(&hyps, &x, &pr, m).unwrap(), literal(&x));
        }
    }

    #[test]
    fn majority_vote_examples() {
        let pr = params(8, 1);
        let all_plus = vec![ParityConcept::new(8, vec![]).unwrap(); 5];
        assert_eq!(majority_predict(&all_plus, &vec![-1; 8], &pr, 2).unwrap(), 1);

        // 3 of 5 voters say -1 on this x
        let hyps = vec![
            ParityConcept::new(8, vec![0]).unwrap(),
            ParityConcept::new(8, vec![0]).unwrap(),
            ParityConcept::new(8, vec![0]).unwrap(),
            ParityConcept::new(8, vec![]).unwrap(),
            ParityConcept::new(8, vec![]).unwrap(),
        ];
        let mut x = vec![1i8; 8];
        x[0] = -1;
        assert_eq!(majority_predict(&hyps, &x, &pr, 2).unwrap(), -1);
    }

    #[test]
    fn reduction_eps_zero_keeps_parity_labels() {
        let pr = params(8, 2);
        let concept = ParityConcept::new(8, vec![2, 5]).unwrap();
        let spec = SeedSpec::new(51);
        let mut rng = spec.stream(0, Purpose::Data);
        let dist = InputDistribution::uniform(8);
        let s: Vec<(Vec<i8>, i8)> = (0..40)
            .map(|_| {
                let x = dist.sample(&mut rng);
                let y = concept.eval(&x).unwrap();
                (x, y)
            })
            .collect();
        let red = build_reduction_dataset(&s, 4, 10, 0.0, &pr, spec).unwrap();
        assert_eq!(red.t, 11);
        for (i, task) in red.tasks.iter().enumerate() {
            assert!(task.used_share_positions.is_empty());
            for (j, ex) in task.examples.iter().enumerate() {
                let (x, y) = &s[i * 10 + j];
                assert_eq!(&ex.x, x);
                assert_eq!(ex.b, -1);
                assert_eq!(ex.y, *y);
            }
        }
    }

    #[test]
    fn reduction_r_distinct_across_tasks_and_seeds() {
        let pr = params(8, 1);
        let dist = InputDistribution::uniform(8);
        let concept = ParityConcept::new(8, vec![1]).unwrap();
        for seed in 0..1000u64 {
            let spec = SeedSpec::new(seed);
            let mut rng = spec.stream(0, Purpose::Data);
            let s: Vec<(Vec<i8>, i8)> = (0..24)
                .map(|_| {
                    let x = dist.sample(&mut rng);
                    let y = concept.eval(&x).unwrap();
                    (x, y)
                })
                .collect();
            let red = build_reduction_dataset(&s, 8, 3, 0.4, &pr, spec).unwrap();
            let mut rs: Vec<&Vec<i8>> = red.tasks.iter().map(|t| &t.r).collect();
            rs.sort();
            rs.dedup();
            assert_eq!(rs.len(), 8, "seed {seed}");
        }
    }

    #[test]
    fn embedding_witness_exists_and_verifies() {
        let pr = params(16, 2);
        let concept = ParityConcept::new(16, vec![4, 12]).unwrap();
        let spec = SeedSpec::new(53);
        let mut rng = spec.stream(0, Purpose::Data);
        let dist = InputDistribution::uniform(16);
        let s: Vec<(Vec<i8>, i8)> = (0..60)
            .map(|_| {
                let x = dist.sample(&mut rng);
                let y = concept.eval(&x).unwrap();
                (x, y)
            })
            .collect();
        let red = build_reduction_dataset(&s, 6, 10, 0.3, &pr, spec).unwrap();
        for task in &red.tasks {
            let witness = embedding_witness(task, &[4, 12], red.t, &pr).unwrap();
            assert!(verify_embedding(task, &witness).unwrap());
        }
    }

    #[test]
    fn hard_dataset_file_roundtrip() {
        let pr = params(8, 2);
        let concept = ParityConcept::new(8, vec![2, 5]).unwrap();
        let spec = SeedSpec::new(61);
        let mut rng = spec.stream(0, Purpose::Data);
        let dist = InputDistribution::uniform(8);
        let s: Vec<(Vec<i8>, i8)> = (0..20)
            .map(|_| {
                let x = dist.sample(&mut rng);
                let y = concept.eval(&x).unwrap();
                (x, y)
            })
            .collect();
        let red = build_reduction_dataset(&s, 4, 5, 0.4, &pr, spec).unwrap();
        let ds = HardDataset::from(&red);
        let dir = std::env::temp_dir().join("simulboost-hardness-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("hard.jsonl");
        write_hard_dataset(&path, &ds).unwrap();
        let back = read_hard_dataset(&path).unwrap();
        assert_eq!(back, ds);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 5);
        let first_data: serde_json::Value =
            serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        for field in ["task", "x", "p", "q", "b", "y"] {
            assert!(first_data.get(field).is_some(), "missing field {field}");
        }
    }

    #[test]
    fn hard_dataset_rejects_out_of_range_p() {
        let dir = std::env::temp_dir().join("simulboost-hardness-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad-p.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"d\":4,\"k_hint\":1,\"n\":1,\"m\":1,\"t\":2,\"epsilon\":0.5}\n",
                "{\"task\":1,\"x\":[1,1,1,1],\"p\":2,\"q\":0,\"b\":1,\"y\":1}\n",
            ),
        )
        .unwrap();
        let err = read_hard_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("out of range"), "got {err}");
    }

    #[test]
    fn hex_roundtrip() {
        let bits = vec![1i8, -1, -1, 1, 1, 1, -1, 1, 1, -1, -1];
        let hex = signs_to_hex(&bits);
        assert_eq!(hex.len(), 4);
        assert_eq!(hex_to_signs(&hex, bits.len()).unwrap(), bits);
        assert!(hex_to_signs("zz", 8).is_err());
        assert!(hex_to_signs("ff", 16).is_err());
    }
}
