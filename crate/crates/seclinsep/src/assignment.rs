//! Dataset assignments and the combinatorial converse machinery.
//!
//! An assignment places each of K datasets on exactly M' = N - N_r + 1
//! servers with every server holding M = (K/N) M' datasets (the minimum
//! computation cost regime). Chains of servers, each contributing a dataset
//! unseen by its predecessors, lower-bound the randomness any secure scheme
//! on that assignment needs; the exact searches here make those bounds
//! computable, and the tiny-instance enumerator brute-forces the min-max
//! bound over all assignments.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::field::FieldModulus;
use crate::Error;

/// `Mod(b, a)` with values in `[1, a]`, i.e. `a` instead of `0`.
pub(crate) fn mod1(b: usize, a: usize) -> usize {
    let r = b % a;
    if r == 0 {
        a
    } else {
        r
    }
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Instance parameters (K, N, N_r, q, seed) in the minimum-computation-cost
/// regime, where the per-server budget M = (K/N)(N - N_r + 1) is forced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ParamsWire", into = "ParamsWire")]
pub struct ProblemParams {
    pub k: usize,
    pub n: usize,
    pub n_r: usize,
    pub m: usize,
    pub q: FieldModulus,
    pub seed: u64,
}

impl ProblemParams {
    pub fn new(k: usize, n: usize, n_r: usize, q: FieldModulus, seed: u64) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::InvalidParameters("N must be at least 1".into()));
        }
        if k == 0 || !k.is_multiple_of(n) {
            return Err(Error::InvalidParameters(format!(
                "N = {n} must divide K = {k}"
            )));
        }
        if n_r == 0 || n_r > n {
            return Err(Error::InvalidParameters(format!(
                "N_r = {n_r} must lie in [1, N = {n}]"
            )));
        }
        let m = (k / n) * (n - n_r + 1);
        Ok(Self {
            k,
            n,
            n_r,
            m,
            q,
            seed,
        })
    }

    /// Replication factor M' = N - N_r + 1 of every dataset.
    pub fn m_prime(&self) -> usize {
        self.n - self.n_r + 1
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsWire {
    k: usize,
    n: usize,
    n_r: usize,
    m: usize,
    q: u64,
    seed: u64,
}

impl TryFrom<ParamsWire> for ProblemParams {
    type Error = Error;

    fn try_from(w: ParamsWire) -> Result<Self, Error> {
        let q = FieldModulus::new(w.q)?;
        let p = ProblemParams::new(w.k, w.n, w.n_r, q, w.seed)?;
        if p.m != w.m {
            return Err(Error::InvalidParameters(format!(
                "stored M = {} but the minimum-cost regime forces M = {}",
                w.m, p.m
            )));
        }
        Ok(p)
    }
}

impl From<ProblemParams> for ParamsWire {
    fn from(p: ProblemParams) -> Self {
        ParamsWire {
            k: p.k,
            n: p.n,
            n_r: p.n_r,
            m: p.m,
            q: p.q.q(),
            seed: p.seed,
        }
    }
}

/// Which datasets each server stores; `sets[i]` is Z_{i+1} with 1-based,
/// ascending dataset indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub n: usize,
    pub k: usize,
    pub sets: Vec<Vec<usize>>,
}

impl Assignment {
    pub fn new(n: usize, k: usize, mut sets: Vec<Vec<usize>>) -> Self {
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        Self { n, k, sets }
    }

    /// Servers holding dataset `d` (1-based).
    pub fn replicas(&self, d: usize) -> Vec<usize> {
        (1..=self.n)
            .filter(|&s| self.sets[s - 1].binary_search(&d).is_ok())
            .collect()
    }

    /// Checks both regularity invariants: |Z_n| = m and every dataset on
    /// exactly `m_prime` servers.
    pub fn validate(&self, m: usize, m_prime: usize) -> Result<(), Error> {
        if self.sets.len() != self.n {
            return Err(Error::InvalidParameters(format!(
                "assignment has {} sets for {} servers",
                self.sets.len(),
                self.n
            )));
        }
        let mut counts = vec![0usize; self.k + 1];
        for (i, s) in self.sets.iter().enumerate() {
            if s.len() != m {
                return Err(Error::InvalidParameters(format!(
                    "server {} stores {} datasets, expected {m}",
                    i + 1,
                    s.len()
                )));
            }
            for &d in s {
                if d == 0 || d > self.k {
                    return Err(Error::InvalidParameters(format!(
                        "dataset index {d} out of range [1, {}]",
                        self.k
                    )));
                }
                counts[d] += 1;
            }
        }
        for (d, &count) in counts.iter().enumerate().skip(1) {
            if count != m_prime {
                return Err(Error::InvalidParameters(format!(
                    "dataset {d} replicated {count} times, expected {m_prime}"
                )));
            }
        }
        Ok(())
    }
}

/// Cyclic placement: dataset group i goes to the M' servers that wrap
/// around it, so server n stores the groups {Mod(n, N), ..., Mod(n + N - N_r, N)}.
pub fn cyclic_assignment(params: &ProblemParams) -> Assignment {
    let n = params.n;
    let sets = (1..=n)
        .map(|srv| {
            let mut datasets = Vec::with_capacity(params.m);
            for j in 0..=(n - params.n_r) {
                let group = mod1(srv + j, n);
                datasets.extend((1..=params.k).filter(|&d| mod1(d, n) == group));
            }
            datasets
        })
        .collect();
    Assignment::new(n, params.k, sets)
}

/// Fractional repetition placement: disjoint blocks of M' servers share an
/// identical slice of the datasets. Requires M' | N.
pub fn fractional_repetition_assignment(params: &ProblemParams) -> Result<Assignment, Error> {
    let m_prime = params.m_prime();
    if !params.n.is_multiple_of(m_prime) {
        return Err(Error::UnsupportedParameters(format!(
            "fractional repetition needs M' = {m_prime} to divide N = {}",
            params.n
        )));
    }
    let blocks = params.n / m_prime;
    let per_block = params.k / blocks;
    let sets = (1..=params.n)
        .map(|srv| {
            let block = (srv - 1) / m_prime;
            ((block * per_block + 1)..=((block + 1) * per_block)).collect()
        })
        .collect();
    Ok(Assignment::new(params.n, params.k, sets))
}

/// An ordered witness for the chain converse: each listed server holds a
/// dataset none of its predecessors store, so eta >= len - 1 for any secure
/// scheme on this assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainCertificate {
    pub servers: Vec<usize>,
    pub witnesses: Vec<usize>,
}

impl ChainCertificate {
    pub fn len(&self) -> usize {
        self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }

    /// Re-checks the membership conditions by direct set arithmetic.
    pub fn verify(&self, a: &Assignment) -> bool {
        if self.servers.len() != self.witnesses.len() {
            return false;
        }
        let mut seen_servers = BTreeSet::new();
        let mut covered: BTreeSet<usize> = BTreeSet::new();
        for (&srv, &wit) in self.servers.iter().zip(&self.witnesses) {
            if srv == 0 || srv > a.n || !seen_servers.insert(srv) {
                return false;
            }
            let z = &a.sets[srv - 1];
            if z.binary_search(&wit).is_err() || covered.contains(&wit) {
                return false;
            }
            covered.extend(z.iter().copied());
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainMode {
    /// Maximum-length chain by DFS over coverage states. Requires N <= 14.
    Exact,
    /// Maximal chain: repeatedly append the server contributing the fewest
    /// (but at least one) new datasets, lowest index on ties.
    Greedy,
}

const EXACT_CHAIN_MAX_N: usize = 14;
const EXACT_CHAIN_MAX_CLASSES: usize = 30;

/// Datasets with identical replica sets are interchangeable in the chain
/// condition, so the search runs over replica classes.
struct ChainClasses {
    /// Per server, the bitmask of classes it stores (fully, by definition).
    server_masks: Vec<u32>,
    /// Per class, the smallest dataset index in it (witness extraction).
    class_min_dataset: Vec<usize>,
    /// Per dataset (1-based), its class.
    dataset_class: Vec<usize>,
}

fn chain_classes(a: &Assignment) -> Result<ChainClasses, Error> {
    let mut class_of: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut class_min_dataset = Vec::new();
    let mut dataset_class = vec![usize::MAX; a.k + 1];
    for (d, slot) in dataset_class.iter_mut().enumerate().skip(1) {
        let replicas = a.replicas(d);
        let next = class_of.len();
        let id = *class_of.entry(replicas).or_insert(next);
        if id == class_min_dataset.len() {
            class_min_dataset.push(d);
        }
        *slot = id;
    }
    let classes = class_min_dataset.len();
    if classes > EXACT_CHAIN_MAX_CLASSES {
        return Err(Error::LimitsExceeded(format!(
            "{classes} replica classes exceed the exact-search cap {EXACT_CHAIN_MAX_CLASSES}"
        )));
    }
    let mut server_masks = vec![0u32; a.n];
    for (s, z) in a.sets.iter().enumerate() {
        for &d in z {
            server_masks[s] |= 1 << dataset_class[d];
        }
    }
    Ok(ChainClasses {
        server_masks,
        class_min_dataset,
        dataset_class,
    })
}

/// Longest (exact) or maximal (greedy) chain. Exact mode refuses N > 14;
/// callers on larger instances fall back to the greedy one-sided bound.
pub fn find_longest_chain(a: &Assignment, mode: ChainMode) -> Result<ChainCertificate, Error> {
    match mode {
        ChainMode::Exact => {
            if a.n > EXACT_CHAIN_MAX_N {
                return Err(Error::LimitsExceeded(format!(
                    "exact chain search supports N <= {EXACT_CHAIN_MAX_N}, got N = {}",
                    a.n
                )));
            }
            exact_chain(a)
        }
        ChainMode::Greedy => Ok(greedy_chain(a)),
    }
}

fn exact_chain(a: &Assignment) -> Result<ChainCertificate, Error> {
    let cls = chain_classes(a)?;
    let mut memo: HashMap<u32, usize> = HashMap::new();

    fn best(cov: u32, masks: &[u32], memo: &mut HashMap<u32, usize>) -> usize {
        if let Some(&v) = memo.get(&cov) {
            return v;
        }
        let mut out = 0;
        let mut seen: Vec<u32> = Vec::new(); // servers with equal masks are interchangeable
        for &m in masks {
            if m & !cov == 0 || seen.contains(&m) {
                continue;
            }
            seen.push(m);
            let v = 1 + best(cov | m, masks, memo);
            if v > out {
                out = v;
            }
        }
        memo.insert(cov, out);
        out
    }

    let total = best(0, &cls.server_masks, &mut memo);

    // Reconstruct a witness chain, lowest server index first at each step.
    let mut servers = Vec::with_capacity(total);
    let mut witnesses = Vec::with_capacity(total);
    let mut cov = 0u32;
    for remaining in (1..=total).rev() {
        let pick = (0..a.n)
            .find(|&s| {
                let m = cls.server_masks[s];
                m & !cov != 0 && 1 + best(cov | m, &cls.server_masks, &mut memo) == remaining
            })
            .expect("a maximising server exists while the chain is extendable");
        let new_class = (0..cls.class_min_dataset.len())
            .filter(|&c| cls.server_masks[pick] & (1 << c) != 0 && cov & (1 << c) == 0)
            .min_by_key(|&c| {
                a.sets[pick]
                    .iter()
                    .copied()
                    .filter(|&d| cls.dataset_class[d] == c)
                    .min()
                    .unwrap_or(usize::MAX)
            })
            .expect("server contributes a new class");
        let witness = a.sets[pick]
            .iter()
            .copied()
            .filter(|&d| cls.dataset_class[d] == new_class)
            .min()
            .unwrap();
        servers.push(pick + 1);
        witnesses.push(witness);
        cov |= cls.server_masks[pick];
    }
    Ok(ChainCertificate { servers, witnesses })
}

fn greedy_chain(a: &Assignment) -> ChainCertificate {
    let mut covered = vec![false; a.k + 1];
    let mut servers = Vec::new();
    let mut witnesses = Vec::new();
    loop {
        let mut pick: Option<(usize, usize)> = None; // (new_count, server)
        for s in 0..a.n {
            let new_count = a.sets[s].iter().filter(|&&d| !covered[d]).count();
            if new_count == 0 {
                continue;
            }
            if pick.is_none_or(|(c, _)| new_count < c) {
                pick = Some((new_count, s));
            }
        }
        let Some((_, s)) = pick else { break };
        let witness = a.sets[s].iter().copied().find(|&d| !covered[d]).unwrap();
        servers.push(s + 1);
        witnesses.push(witness);
        for &d in &a.sets[s] {
            covered[d] = true;
        }
    }
    ChainCertificate { servers, witnesses }
}

const ENUM_MAX_N: usize = 8;
const ENUM_MAX_M: usize = 5;

/// Streams every K = N assignment where each dataset sits on exactly M'
/// servers and each server holds M' datasets, one representative per
/// server-relabeling orbit (the sets are emitted in non-decreasing
/// lexicographic order, which is exactly the canonical form).
pub fn for_each_assignment<F: FnMut(&Assignment)>(
    n: usize,
    m_prime: usize,
    mut visit: F,
) -> Result<(), Error> {
    if n == 0 || m_prime == 0 || m_prime > n {
        return Err(Error::InvalidParameters(format!(
            "need 1 <= M' <= N, got N = {n}, M' = {m_prime}"
        )));
    }
    if n > ENUM_MAX_N || m_prime > ENUM_MAX_M {
        return Err(Error::LimitsExceeded(format!(
            "assignment enumeration supports N <= {ENUM_MAX_N} and M' <= {ENUM_MAX_M}"
        )));
    }
    let mut rem = vec![m_prime; n + 1]; // rem[d]: copies of dataset d still to place
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(n);
    place_server(n, m_prime, &mut rem, &mut sets, &mut visit);
    Ok(())
}

fn place_server<F: FnMut(&Assignment)>(
    n: usize,
    m_prime: usize,
    rem: &mut Vec<usize>,
    sets: &mut Vec<Vec<usize>>,
    visit: &mut F,
) {
    let level = sets.len();
    if level == n {
        debug_assert!((1..=n).all(|d| rem[d] == 0));
        let a = Assignment {
            n,
            k: n,
            sets: sets.clone(),
        };
        visit(&a);
        return;
    }
    let slots_left = n - level;
    // Datasets that still need a copy in every remaining server must appear
    // in this one too.
    let forced: Vec<usize> = (1..=n).filter(|&d| rem[d] == slots_left).collect();
    if forced.len() > m_prime {
        return;
    }
    let last = sets.last().cloned();
    let tight = last.is_some();
    let mut chosen = Vec::with_capacity(m_prime);
    choose_datasets(
        n,
        m_prime,
        1,
        last.as_deref(),
        tight,
        &forced,
        rem,
        sets,
        &mut chosen,
        visit,
    );
}

#[allow(clippy::too_many_arguments)]
fn choose_datasets<F: FnMut(&Assignment)>(
    n: usize,
    m_prime: usize,
    from: usize,
    last: Option<&[usize]>,
    tight: bool,
    forced: &[usize],
    rem: &mut Vec<usize>,
    sets: &mut Vec<Vec<usize>>,
    chosen: &mut Vec<usize>,
    visit: &mut F,
) {
    if chosen.len() == m_prime {
        if forced.iter().any(|f| !chosen.contains(f)) {
            return;
        }
        sets.push(chosen.clone());
        for &d in chosen.iter() {
            rem[d] -= 1;
        }
        let slots_left = n - sets.len();
        if (1..=n).all(|d| rem[d] <= slots_left) {
            place_server(n, m_prime, rem, sets, visit);
        }
        for &d in chosen.iter() {
            rem[d] += 1;
        }
        sets.pop();
        return;
    }
    let need = m_prime - chosen.len();
    for d in from..=n {
        if n - d + 1 < need {
            break;
        }
        // An unpicked forced dataset below d can never be added later.
        if forced.iter().any(|&fd| fd < d && !chosen.contains(&fd)) {
            break;
        }
        if rem[d] == 0 {
            continue;
        }
        let pos = chosen.len();
        let (passes, next_tight) = if tight {
            let l = last.unwrap()[pos];
            (d >= l, d == l)
        } else {
            (true, false)
        };
        if !passes {
            continue;
        }
        chosen.push(d);
        choose_datasets(
            n, m_prime, d + 1, last, next_tight, forced, rem, sets, chosen, visit,
        );
        chosen.pop();
    }
}

/// Collects the enumeration into a vector (tests and small instances).
pub fn enumerate_assignments(n: usize, m_prime: usize) -> Result<Vec<Assignment>, Error> {
    let mut out = Vec::new();
    for_each_assignment(n, m_prime, |a| out.push(a.clone()))?;
    Ok(out)
}

/// Brute-forces min over assignments of the max chain length. The value
/// minus one is the assignment-free lower bound on the randomness size.
pub fn converse_min_max(n: usize, m_prime: usize) -> Result<(usize, Assignment), Error> {
    let mut best: Option<(usize, Assignment)> = None;
    for_each_assignment(n, m_prime, |a| {
        let chain = exact_chain(a).expect("enumeration instances are within exact-search limits");
        let len = chain.len();
        if best.as_ref().is_none_or(|(b, _)| len < *b) {
            best = Some((len, a.clone()));
        }
    })?;
    Ok(best.expect("at least one assignment exists"))
}
