//! Scheme construction: the cyclic baseline, fractional repetition, the
//! recursive combined construction, and the securify transform that turns
//! any stage-1 linear scheme into a secure one at no extra communication.
//!
//! A scheme is described by a coefficient matrix F' of shape
//! `lambda x (N + r)` over columns `[merged messages | randomness]` together
//! with one transmission vector per server; server n sends `s_n F' [W'; Q]`.
//! The first row of F' is always the target sum. Randomness count is
//! `lambda - 1` throughout: one fewer pad than independent combinations.

mod combined;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{
    cyclic_assignment, fractional_repetition_assignment, gcd, Assignment, ProblemParams,
};
use crate::field::{sample_matrix_with, FieldMatrix, FieldModulus};
use crate::verify::builder_accepts;
use crate::Error;

pub(crate) use combined::build_stage1;

/// Bounded resampling: constructions that hold "with high probability" are
/// sampled, verified exactly, and redrawn on failure up to this many times.
pub const RETRY_BUDGET: usize = 32;

/// One rewrite step of the randomness-count recursion h(N, M').
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HRule {
    /// M' = 1: every message travels separately, h = N.
    BaseRep,
    /// Divide both parameters by gcd(N, M').
    Gcd,
    /// N > 2M': split off floor(N/M' - 1) fully replicated blocks.
    Blocks,
    /// 1.5M' <= N < 2M', M' even: peel one combination, recurse on
    /// (N - M', M'/2) over message pairs.
    Even,
    /// 1.5M' <= N < 2M', M' odd: closed form N - (3M' - 5)/2.
    OddBase,
    /// M' < N < 1.5M': mirror to (M', 2M' - N).
    Reflect,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HStep {
    pub rule: HRule,
    pub before: (usize, usize),
    pub after: Option<(usize, usize)>,
    pub lambda_added: usize,
}

/// The full rewrite sequence from (N, M') down to a terminal case, plus the
/// resulting value h(N, M').
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HRecursionTrace {
    pub steps: Vec<HStep>,
    pub value: usize,
}

impl HRecursionTrace {
    /// Re-executes the recorded steps; `Some(value)` when every transition
    /// is a legal rule application arriving at the stored value.
    pub fn replay(&self) -> Option<usize> {
        let mut cur = self.steps.first()?.before;
        let mut acc = 0usize;
        for step in &self.steps {
            if step.before != cur {
                return None;
            }
            let (n, m) = cur;
            let (expect_after, expect_added) = match step.rule {
                HRule::Gcd => {
                    let g = gcd(n, m);
                    if g <= 1 {
                        return None;
                    }
                    (Some((n / g, m / g)), 0)
                }
                HRule::BaseRep => {
                    if m != 1 {
                        return None;
                    }
                    (None, n)
                }
                HRule::Blocks => {
                    if n <= 2 * m {
                        return None;
                    }
                    let v = n / m - 1;
                    (Some((n - v * m, m)), v)
                }
                HRule::Reflect => {
                    if !(m < n && 2 * n < 3 * m) {
                        return None;
                    }
                    (Some((m, 2 * m - n)), 0)
                }
                HRule::Even => {
                    if !(2 * n >= 3 * m && n < 2 * m && m % 2 == 0) {
                        return None;
                    }
                    (Some((n - m, m / 2)), 1)
                }
                HRule::OddBase => {
                    if !(2 * n >= 3 * m && n < 2 * m && m % 2 == 1) {
                        return None;
                    }
                    (None, n - (3 * m - 5) / 2)
                }
            };
            if step.after != expect_after || step.lambda_added != expect_added {
                return None;
            }
            acc += expect_added;
            match expect_after {
                Some(next) => cur = next,
                None => return (acc == self.value).then_some(acc),
            }
        }
        None
    }
}

/// Minimum number of independent combinations the combined construction
/// transmits for the (N, M') problem; the achievable randomness size is
/// h(N, M') - 1.
pub fn h_value(n: usize, m_prime: usize) -> Result<HRecursionTrace, Error> {
    if n == 0 || m_prime == 0 || m_prime > n {
        return Err(Error::InvalidParameters(format!(
            "h(N, M') needs 1 <= M' <= N, got ({n}, {m_prime})"
        )));
    }
    let mut steps = Vec::new();
    let (mut n, mut m) = (n, m_prime);
    let mut acc = 0usize;
    loop {
        let g = gcd(n, m);
        if g > 1 {
            steps.push(HStep {
                rule: HRule::Gcd,
                before: (n, m),
                after: Some((n / g, m / g)),
                lambda_added: 0,
            });
            n /= g;
            m /= g;
            continue;
        }
        if m == 1 {
            steps.push(HStep {
                rule: HRule::BaseRep,
                before: (n, m),
                after: None,
                lambda_added: n,
            });
            acc += n;
            break;
        }
        if n > 2 * m {
            let v = n / m - 1;
            steps.push(HStep {
                rule: HRule::Blocks,
                before: (n, m),
                after: Some((n - v * m, m)),
                lambda_added: v,
            });
            acc += v;
            n -= v * m;
            continue;
        }
        if 2 * n < 3 * m {
            steps.push(HStep {
                rule: HRule::Reflect,
                before: (n, m),
                after: Some((m, 2 * m - n)),
                lambda_added: 0,
            });
            let next = (m, 2 * m - n);
            n = next.0;
            m = next.1;
            continue;
        }
        if m % 2 == 0 {
            steps.push(HStep {
                rule: HRule::Even,
                before: (n, m),
                after: Some((n - m, m / 2)),
                lambda_added: 1,
            });
            acc += 1;
            n -= m;
            m /= 2;
            continue;
        }
        let added = n - (3 * m - 5) / 2;
        steps.push(HStep {
            rule: HRule::OddBase,
            before: (n, m),
            after: None,
            lambda_added: added,
        });
        acc += added;
        break;
    }
    Ok(HRecursionTrace { steps, value: acc })
}

/// A partition of the K datasets into N equal merged-message groups;
/// recovering the sum of merged messages recovers the full sum.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    /// 1-based group id per dataset (index 0 holds dataset 1's group).
    pub dataset_group: Vec<usize>,
}

impl Grouping {
    pub fn group_count(&self) -> usize {
        self.dataset_group.iter().copied().max().unwrap_or(0)
    }

    /// Datasets of group `g` (1-based), ascending.
    pub fn members(&self, g: usize) -> Vec<usize> {
        self.dataset_group
            .iter()
            .enumerate()
            .filter_map(|(i, &gi)| (gi == g).then_some(i + 1))
            .collect()
    }

    /// True when server's set contains every dataset of group `g`.
    pub fn group_held(&self, sets: &[usize], g: usize) -> bool {
        self.dataset_group
            .iter()
            .enumerate()
            .all(|(i, &gi)| gi != g || sets.binary_search(&(i + 1)).is_ok())
    }
}

/// The wrap-around grouping: dataset k joins group Mod(k, N), so group i
/// collects {i, i + N, i + 2N, ...}. K/N datasets per group.
pub fn group_and_merge(params: &ProblemParams) -> Grouping {
    Grouping {
        dataset_group: (1..=params.k)
            .map(|k| crate::assignment::mod1(k, params.n))
            .collect(),
    }
}

/// Contiguous grouping, used by the fractional repetition builder so its
/// consecutive dataset blocks are unions of whole groups. Identical to
/// [`group_and_merge`] when K = N.
fn contiguous_grouping(params: &ProblemParams) -> Grouping {
    let per = params.k / params.n;
    Grouping {
        dataset_group: (0..params.k).map(|k0| k0 / per + 1).collect(),
    }
}

/// A complete secure scheme: assignment, coefficient matrix F' over
/// `[merged messages | randomness]`, and per-server transmission vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemeWire", into = "SchemeWire")]
pub struct SchemeSpec {
    pub params: ProblemParams,
    pub grouping: Grouping,
    pub assignment: Assignment,
    pub lambda: usize,
    pub randomness_count: usize,
    pub coeff_matrix: FieldMatrix,
    pub server_vectors: Vec<Vec<u64>>,
    /// Symbols sent per server, normalized by L; all 1 in this regime.
    pub output_lengths: Vec<usize>,
    pub trace: Option<HRecursionTrace>,
}

impl SchemeSpec {
    /// Number of merged-message columns (= N).
    pub fn merged_count(&self) -> usize {
        self.params.n
    }

    /// The decoding target: all-ones over messages, zeros over randomness.
    pub fn target_row(&self) -> Vec<u64> {
        let mut t = vec![1u64; self.merged_count()];
        t.extend(std::iter::repeat_n(0, self.randomness_count));
        t
    }

    /// Coefficients of server `idx0`'s transmission over
    /// `[merged messages | randomness]`.
    pub fn expanded_row(&self, idx0: usize) -> Vec<u64> {
        self.coeff_matrix
            .left_mul(&self.server_vectors[idx0])
            .expect("server vector length matches lambda")
    }

    /// All N transmissions stacked, N x (N + r).
    pub fn expanded_rows(&self) -> FieldMatrix {
        let rows: Vec<Vec<u64>> = (0..self.params.n).map(|i| self.expanded_row(i)).collect();
        FieldMatrix::from_rows(self.params.q, &rows).expect("uniform row widths")
    }

    /// Whether server `idx0` can compute merged message `g` (1-based):
    /// it must store every dataset of that group.
    pub fn can_compute(&self, idx0: usize, g: usize) -> bool {
        self.grouping.group_held(&self.assignment.sets[idx0], g)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixWire {
    rows: usize,
    cols: usize,
    entries: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct SchemeWire {
    params: ProblemParams,
    grouping: Vec<usize>,
    assignment: Assignment,
    lambda: usize,
    randomness_count: usize,
    coeff_matrix: MatrixWire,
    server_vectors: Vec<Vec<u64>>,
    trace: Option<HRecursionTrace>,
}

impl TryFrom<SchemeWire> for SchemeSpec {
    type Error = Error;

    fn try_from(w: SchemeWire) -> Result<Self, Error> {
        let params = w.params;
        if w.grouping.len() != params.k {
            return Err(Error::InvalidParameters(format!(
                "grouping covers {} datasets, expected {}",
                w.grouping.len(),
                params.k
            )));
        }
        if w.grouping.iter().any(|&g| g == 0 || g > params.n) {
            return Err(Error::InvalidParameters(
                "grouping ids must lie in [1, N]".into(),
            ));
        }
        if w.assignment.n != params.n || w.assignment.k != params.k {
            return Err(Error::InvalidParameters(
                "assignment dimensions disagree with params".into(),
            ));
        }
        if w.coeff_matrix.rows != w.lambda
            || w.coeff_matrix.cols != params.n + w.randomness_count
        {
            return Err(Error::InvalidParameters(format!(
                "coefficient matrix is {}x{}, expected {}x{}",
                w.coeff_matrix.rows,
                w.coeff_matrix.cols,
                w.lambda,
                params.n + w.randomness_count
            )));
        }
        if w.server_vectors.len() != params.n
            || w.server_vectors.iter().any(|v| v.len() != w.lambda)
        {
            return Err(Error::InvalidParameters(
                "need one length-lambda vector per server".into(),
            ));
        }
        let coeff_matrix = FieldMatrix::from_entries(
            params.q,
            w.coeff_matrix.rows,
            w.coeff_matrix.cols,
            w.coeff_matrix.entries,
        )?;
        let n = params.n;
        Ok(SchemeSpec {
            params,
            grouping: Grouping {
                dataset_group: w.grouping,
            },
            // Checks below rely on sorted sets; normalize external input.
            assignment: Assignment::new(w.assignment.n, w.assignment.k, w.assignment.sets),
            lambda: w.lambda,
            randomness_count: w.randomness_count,
            coeff_matrix,
            server_vectors: w.server_vectors,
            output_lengths: vec![1; n],
            trace: w.trace,
        })
    }
}

impl From<SchemeSpec> for SchemeWire {
    fn from(s: SchemeSpec) -> Self {
        SchemeWire {
            params: s.params,
            grouping: s.grouping.dataset_group,
            assignment: s.assignment,
            lambda: s.lambda,
            randomness_count: s.randomness_count,
            coeff_matrix: MatrixWire {
                rows: s.coeff_matrix.rows(),
                cols: s.coeff_matrix.cols(),
                entries: s.coeff_matrix.entries().to_vec(),
            },
            server_vectors: s.server_vectors,
            trace: s.trace,
        }
    }
}

/// Appends the randomness block to a stage-1 (non-secure) scheme:
/// F' = [F | S] with S = [0; I], leaving the transmission vectors and
/// output lengths untouched, so the communication cost is preserved and
/// the randomness count becomes lambda - 1.
pub fn securify(
    params: &ProblemParams,
    grouping: &Grouping,
    assignment: Assignment,
    stage1_f: &FieldMatrix,
    server_vectors: Vec<Vec<u64>>,
    trace: Option<HRecursionTrace>,
) -> Result<SchemeSpec, Error> {
    let n = params.n;
    let lambda = stage1_f.rows();
    if stage1_f.cols() != n {
        return Err(Error::Dimension(format!(
            "stage-1 matrix has {} columns, expected N = {n}",
            stage1_f.cols()
        )));
    }
    if (0..n).any(|c| stage1_f.get(0, c) != 1) {
        return Err(Error::Integrity(
            "stage-1 first row must be the all-ones target function".into(),
        ));
    }
    if server_vectors.len() != n || server_vectors.iter().any(|v| v.len() != lambda) {
        return Err(Error::Dimension(
            "need one length-lambda transmission vector per server".into(),
        ));
    }
    // Zero-structure precondition: a server's stage-1 row must vanish on
    // every merged message it cannot compute.
    for (idx0, vec) in server_vectors.iter().enumerate() {
        let row = stage1_f.left_mul(vec)?;
        for g in 1..=n {
            if row[g - 1] != 0 && !grouping.group_held(&assignment.sets[idx0], g) {
                return Err(Error::Integrity(format!(
                    "server {} uses merged message {g} it cannot compute",
                    idx0 + 1
                )));
            }
        }
    }
    let r = lambda - 1;
    let mut s_block = FieldMatrix::zeros(params.q, lambda, r);
    for i in 1..lambda {
        s_block.set(i, i - 1, 1);
    }
    let coeff_matrix = stage1_f.hstack(&s_block)?;
    Ok(SchemeSpec {
        params: params.clone(),
        grouping: grouping.clone(),
        assignment,
        lambda,
        randomness_count: r,
        coeff_matrix,
        server_vectors,
        output_lengths: vec![1; n],
        trace,
    })
}

/// Cyclic-assignment scheme: lambda = N_r, the coefficient matrix is the
/// all-ones row over sampled rows, and each server's vector spans the left
/// nullspace of the columns it cannot compute. Verified and resampled
/// until decodability and security hold exactly.
pub fn build_cyclic_scheme(params: &ProblemParams) -> Result<SchemeSpec, Error> {
    let grouping = group_and_merge(params);
    let assignment = cyclic_assignment(params);
    let n = params.n;
    let lambda = params.n_r;
    let q = params.q;
    let held: Vec<Vec<usize>> = (0..n)
        .map(|idx0| {
            (1..=n)
                .filter(|&g| grouping.group_held(&assignment.sets[idx0], g))
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut last_reason = String::from("no attempt run");
    for _ in 0..RETRY_BUDGET {
        let sampled = sample_matrix_with(q, lambda - 1, n, &mut rng, None)?;
        let mut rows = vec![vec![1u64; n]];
        rows.extend(sampled.row_vecs());
        let f = FieldMatrix::from_rows(q, &rows)?;
        let mut vectors = Vec::with_capacity(n);
        let mut degenerate = false;
        for (idx0, held_groups) in held.iter().enumerate() {
            let outside: Vec<usize> = (1..=n)
                .filter(|g| !held_groups.contains(g))
                .map(|g| g - 1)
                .collect();
            let ns = f.select_columns(&outside).left_nullspace();
            if ns.rows() != 1 {
                degenerate = true;
                last_reason = format!(
                    "server {} nullspace dimension {} (want 1)",
                    idx0 + 1,
                    ns.rows()
                );
                break;
            }
            vectors.push(ns.row(0).to_vec());
        }
        if degenerate {
            continue;
        }
        let scheme = securify(params, &grouping, assignment.clone(), &f, vectors, None)?;
        match builder_accepts(&scheme) {
            Ok(()) => return Ok(scheme),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::ConstructionFailed {
        attempts: RETRY_BUDGET,
        reason: last_reason,
    })
}

/// Fractional repetition scheme (M' | N): block i of M' identical servers
/// sends its block sum telescoped with the randomness pads, achieving the
/// assignment-free optimum eta = N/M' - 1. Deterministic; no resampling.
pub fn build_fractional_repetition_scheme(params: &ProblemParams) -> Result<SchemeSpec, Error> {
    let m_prime = params.m_prime();
    if !params.n.is_multiple_of(m_prime) {
        return Err(Error::UnsupportedParameters(format!(
            "fractional repetition needs M' = {m_prime} to divide N = {}",
            params.n
        )));
    }
    let grouping = contiguous_grouping(params);
    let assignment = fractional_repetition_assignment(params)?;
    let n = params.n;
    let q = params.q;
    let blocks = n / m_prime;
    let lambda = blocks;
    let r = lambda - 1;

    // Rows: the target, then A_2, ..., A_blocks with the telescoping
    // +-Q pattern; block 1's A_1 = Q_1 + block sum is the row combination
    // (1, -1, ..., -1).
    let mut f = FieldMatrix::zeros(q, lambda, n + r);
    for c in 0..n {
        f.set(0, c, 1);
    }
    for row in 1..lambda {
        let block = row; // 0-based block id this row transmits
        for g in (block * m_prime)..((block + 1) * m_prime) {
            f.set(row, g, 1);
        }
        f.set(row, n + row - 1, q.neg(1));
        if row < lambda - 1 {
            f.set(row, n + row, 1);
        }
    }
    let mut vectors = Vec::with_capacity(n);
    for idx0 in 0..n {
        let block = idx0 / m_prime;
        let mut v = vec![0u64; lambda];
        if block == 0 {
            v[0] = 1;
            for item in v.iter_mut().skip(1) {
                *item = q.neg(1);
            }
        } else {
            v[block] = 1;
        }
        vectors.push(v);
    }
    let scheme = SchemeSpec {
        params: params.clone(),
        grouping,
        assignment,
        lambda,
        randomness_count: r,
        coeff_matrix: f,
        server_vectors: vectors,
        output_lengths: vec![1; n],
        trace: None,
    };
    builder_accepts(&scheme).map_err(|reason| Error::ConstructionFailed {
        attempts: 1,
        reason,
    })?;
    Ok(scheme)
}

/// The combined construction: recursively assembles the stage-1 assignment
/// and coefficient matrix through the five reductions, securifies, and
/// verifies; sampled coefficients are redrawn until the exact checks pass.
/// Achieves lambda = h(N, M') and eta = h(N, M') - 1.
pub fn build_combined_scheme(params: &ProblemParams) -> Result<SchemeSpec, Error> {
    let m_prime = params.m_prime();
    let trace = h_value(params.n, m_prime)?;
    let grouping = group_and_merge(params);
    let q = params.q;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut last_reason = String::from("no attempt run");
    for _ in 0..RETRY_BUDGET {
        let stage1 = match build_stage1(q, params.n, m_prime, &mut rng) {
            Ok(s) => s,
            Err(Error::ConstructionFailed { reason, .. }) => {
                last_reason = reason;
                continue;
            }
            Err(e) => return Err(e),
        };
        if stage1.f.rows() != trace.value {
            return Err(Error::Integrity(format!(
                "stage-1 produced {} rows, h predicts {}",
                stage1.f.rows(),
                trace.value
            )));
        }
        let sets: Vec<Vec<usize>> = stage1
            .sets
            .iter()
            .map(|groups| {
                let mut datasets: Vec<usize> =
                    groups.iter().flat_map(|&g| grouping.members(g)).collect();
                datasets.sort_unstable();
                datasets
            })
            .collect();
        let assignment = Assignment::new(params.n, params.k, sets);
        let scheme = securify(
            params,
            &grouping,
            assignment,
            &stage1.f,
            stage1.vectors.clone(),
            Some(trace.clone()),
        )?;
        match builder_accepts(&scheme) {
            Ok(()) => return Ok(scheme),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::ConstructionFailed {
        attempts: RETRY_BUDGET,
        reason: last_reason,
    })
}

/// Samples a residue pair that is not (0, 0).
pub(crate) fn sample_nonzero_pair<R: Rng>(q: FieldModulus, rng: &mut R) -> (u64, u64) {
    loop {
        let a = rng.random_range(0..q.q());
        let b = rng.random_range(0..q.q());
        if a != 0 || b != 0 {
            return (a, b);
        }
    }
}
