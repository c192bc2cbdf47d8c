//! Acceptance suite: one test per criterion, each printing a pass line and
//! enforcing its runtime budget. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.
//!
//! Oracles used here (exact chain search, mutual-information and
//! table-lookup decodability) are implemented locally and independently of
//! the library paths they check.

use std::collections::HashMap;
use std::time::Instant;

use seclinsep::assignment::{
    converse_min_max, find_longest_chain, gcd, Assignment, ChainMode, ProblemParams,
};
use seclinsep::field::{FieldMatrix, FieldModulus};
use seclinsep::scheme::{
    build_combined_scheme, build_cyclic_scheme, build_fractional_repetition_scheme, h_value,
    SchemeSpec,
};
use seclinsep::verify::{
    check_decodability, check_security, check_zero_structure, verify_scheme, DecodeMode,
};

fn params(k: usize, n: usize, n_r: usize, q: u64, seed: u64) -> ProblemParams {
    ProblemParams::new(k, n, n_r, FieldModulus::new(q).unwrap(), seed).unwrap()
}

fn finish(criterion: usize, what: &str, started: Instant, budget_secs: u64) {
    let elapsed = started.elapsed();
    println!(
        "[criterion {criterion}] {what}: PASS ({:.2}s, budget {budget_secs}s)",
        elapsed.as_secs_f64()
    );
    assert!(
        elapsed.as_secs() < budget_secs,
        "criterion {criterion} exceeded its {budget_secs}s budget: {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// Test-local oracles
// ---------------------------------------------------------------------------

/// Exact maximum chain length by plain memoized DFS over replica classes,
/// written independently of the library's search.
fn oracle_chain_len(a: &Assignment) -> usize {
    let mut class_ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut dataset_class = vec![0usize; a.k + 1];
    for (d, slot) in dataset_class.iter_mut().enumerate().skip(1) {
        let reps = a.replicas(d);
        let next = class_ids.len();
        let id = *class_ids.entry(reps).or_insert(next);
        *slot = id;
    }
    let classes = class_ids.len();
    assert!(classes <= 28, "oracle supports up to 28 classes");
    let masks: Vec<u32> = a
        .sets
        .iter()
        .map(|z| z.iter().fold(0u32, |m, &d| m | (1 << dataset_class[d])))
        .collect();
    fn go(cov: u32, masks: &[u32], memo: &mut HashMap<u32, usize>) -> usize {
        if let Some(&v) = memo.get(&cov) {
            return v;
        }
        let mut best = 0;
        for &m in masks {
            if m & !cov != 0 {
                best = best.max(1 + go(cov | m, masks, memo));
            }
        }
        memo.insert(cov, best);
        best
    }
    go(0, &masks, &mut HashMap::new())
}

fn all_tuples(q: u64, len: usize) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * q as usize);
        for t in &out {
            for v in 0..q {
                let mut t2 = t.clone();
                t2.push(v);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

fn answer_symbol(qf: FieldModulus, row: &[u64], w: &[u64], qv: &[u64]) -> u64 {
    let mut acc = 0u64;
    for (i, &c) in row.iter().enumerate() {
        let v = if i < w.len() { w[i] } else { qv[i - w.len()] };
        acc = qf.add(acc, qf.mul(c, v));
    }
    acc
}

/// Exact mutual-information security oracle: I(W; X | sum W) = 0 iff for
/// every value of the sum, all message tuples with that sum induce the same
/// distribution of the full answer vector.
fn oracle_mi_secure(s: &SchemeSpec) -> bool {
    let qf = s.params.q;
    let q = qf.q();
    let n = s.params.n;
    let rows: Vec<Vec<u64>> = (0..n).map(|i| s.expanded_row(i)).collect();
    let w_tuples = all_tuples(q, n);
    let q_tuples = all_tuples(q, s.randomness_count);
    let mut per_sum: HashMap<u64, Vec<Vec<u64>>> = HashMap::new();
    for w in &w_tuples {
        let sum = w.iter().fold(0u64, |acc, &x| qf.add(acc, x));
        let mut dist: Vec<Vec<u64>> = q_tuples
            .iter()
            .map(|qv| rows.iter().map(|r| answer_symbol(qf, r, w, qv)).collect())
            .collect();
        dist.sort();
        match per_sum.get(&sum) {
            None => {
                per_sum.insert(sum, dist);
            }
            Some(reference) => {
                if reference != &dist {
                    return false;
                }
            }
        }
    }
    true
}

/// Table-lookup decodability for a responding set: the answers must
/// determine the sum, i.e. no two (W, Q) inputs share the restricted
/// answer tuple while having different sums.
fn oracle_lookup_decodes(s: &SchemeSpec, subset: &[usize]) -> bool {
    let qf = s.params.q;
    let q = qf.q();
    let n = s.params.n;
    let rows: Vec<Vec<u64>> = subset.iter().map(|&i| s.expanded_row(i)).collect();
    let mut table: HashMap<Vec<u64>, u64> = HashMap::new();
    for w in all_tuples(q, n) {
        let sum = w.iter().fold(0u64, |acc, &x| qf.add(acc, x));
        for qv in all_tuples(q, s.randomness_count) {
            let x: Vec<u64> = rows.iter().map(|r| answer_symbol(qf, r, &w, &qv)).collect();
            match table.get(&x) {
                None => {
                    table.insert(x, sum);
                }
                Some(&prev) => {
                    if prev != sum {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn strip_randomness(s: &SchemeSpec) -> SchemeSpec {
    let mut t = s.clone();
    for r in 0..t.lambda {
        for c in t.params.n..t.coeff_matrix.cols() {
            t.coeff_matrix.set(r, c, 0);
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_three_server_walkthrough() {
    let started = Instant::now();
    let p = params(3, 3, 2, 3, 42);
    let s = build_cyclic_scheme(&p).unwrap();
    let report = verify_scheme(&s, DecodeMode::Exhaustive).unwrap();
    assert_eq!(report.communication_cost, 2);
    assert_eq!(report.randomness_size, 1);
    assert!(report.decodability.decodable && report.decodability.exhaustive);
    assert_eq!(report.decodability.subsets_checked, 3);
    assert!(report.security.secure);
    assert!(report.pass);
    finish(1, "K=N=3, N_r=2 over F_3: cost 2, eta 1, secure", started, 1);
}

#[test]
fn criterion_2_h_recursion_table_and_sweep() {
    let started = Instant::now();
    for n in 1..=60 {
        assert_eq!(h_value(n, 1).unwrap().value, n);
    }
    for (n, m, expect) in [
        (3, 2, 2),
        (5, 2, 3),
        (4, 3, 2),
        (5, 3, 3),
        (5, 4, 2),
        (7, 4, 3),
        (8, 5, 3),
    ] {
        assert_eq!(h_value(n, m).unwrap().value, expect, "h({n}, {m})");
    }
    // Full sweep: h never exceeds N_r, and every trace replays.
    for n in 1..=60usize {
        for m in 1..=n {
            let trace = h_value(n, m).unwrap();
            assert_eq!(trace.replay(), Some(trace.value));
            assert!(trace.value <= n - m + 1, "h({n},{m}) > N_r");
        }
    }
    // Gap-witness families.
    for m in 2..=59usize {
        for mult in 1.. {
            let n = mult * m + 1;
            if n > 60 {
                break;
            }
            assert_eq!(h_value(n, m).unwrap().value - 1, mult, "family nM'+1 at ({n},{m})");
        }
    }
    for m in (2..=40usize).step_by(2) {
        let n = 3 * m / 2;
        assert_eq!(h_value(n, m).unwrap().value - 1, 1, "family 1.5M' at ({n},{m})");
    }
    for m in (3..=39usize).step_by(2) {
        let n = (3 * m).div_ceil(2);
        assert_eq!(
            h_value(n, m).unwrap().value - 1,
            2,
            "family (3M'+1)/2 at ({n},{m})"
        );
    }
    finish(2, "h table, N<=60 sweep, gap witnesses", started, 1);
}

#[test]
fn criterion_3_fractional_repetition_grid() {
    let started = Instant::now();
    let mut instances = 0;
    for n in 1..=24usize {
        for m in 1..=n {
            if n % m != 0 {
                continue;
            }
            let n_r = n - m + 1;
            let p = params(n, n, n_r, 2147483647, 42);
            let s = build_fractional_repetition_scheme(&p).unwrap();
            assert_eq!(s.randomness_count, n / m - 1, "eta at ({n}, {m})");
            let report = verify_scheme(&s, DecodeMode::Exhaustive).unwrap();
            assert!(report.pass, "({n}, {m}) failed verification");
            assert!(report.decodability.exhaustive);
            instances += 1;
        }
    }
    finish(
        3,
        &format!("fractional repetition, {instances} divisor instances N<=24"),
        started,
        120,
    );
}

#[test]
fn criterion_4_cyclic_grid_with_tight_chains() {
    let started = Instant::now();
    for n in 1..=18usize {
        for n_r in 1..=n {
            let p = params(n, n, n_r, 2147483647, 42);
            let s = build_cyclic_scheme(&p).unwrap();
            assert_eq!(s.randomness_count, n_r - 1, "eta at ({n}, {n_r})");
            let report = verify_scheme(&s, DecodeMode::Exhaustive).unwrap();
            assert!(report.pass, "cyclic ({n}, {n_r}) failed verification");
            // Tightness: the cyclic assignment's longest chain is exactly N_r.
            let oracle = oracle_chain_len(&s.assignment);
            assert_eq!(oracle, n_r, "chain at ({n}, {n_r})");
            if n <= 14 {
                let exact = find_longest_chain(&s.assignment, ChainMode::Exact).unwrap();
                assert!(exact.verify(&s.assignment));
                assert_eq!(exact.len(), oracle, "library vs oracle at ({n}, {n_r})");
            }
        }
    }
    finish(4, "cyclic schemes N<=18, eta = N_r - 1, chain = N_r", started, 300);
}

#[test]
fn criterion_5_combined_grid() {
    let started = Instant::now();
    for n in 1..=18usize {
        for m in 1..=n {
            let n_r = n - m + 1;
            let p = params(n, n, n_r, 2147483647, 42);
            let s = build_combined_scheme(&p).unwrap();
            let h = h_value(n, m).unwrap().value;
            assert_eq!(s.lambda, h, "lambda at ({n}, {m})");
            assert_eq!(s.randomness_count, h - 1, "eta at ({n}, {m})");
            let report = verify_scheme(&s, DecodeMode::Exhaustive).unwrap();
            assert!(report.pass, "combined ({n}, {m}) failed verification");
            assert_eq!(report.communication_cost, n_r);
            assert!(report.decodability.exhaustive);
            // Chain converse consistency: the emitted assignment's longest
            // chain never exceeds h, and is exactly h when the optimality
            // condition M'/gcd <= 4 applies.
            assert!(report.chain.consistent, "chain at ({n}, {m})");
            if report.chain.exact {
                assert!(report.chain.chain_length <= h, "chain > h at ({n}, {m})");
            }
            if let Some(tight) = report.chain.matches_h {
                assert!(tight, "chain != h under optimality at ({n}, {m})");
            }
        }
    }
    for n in 19..=24usize {
        for m in 1..=n {
            let n_r = n - m + 1;
            let p = params(n, n, n_r, 2147483647, 42);
            let s = build_combined_scheme(&p).unwrap();
            let h = h_value(n, m).unwrap().value;
            assert_eq!(s.lambda, h, "lambda at ({n}, {m})");
            assert_eq!(s.randomness_count, h - 1);
            let dec = check_decodability(&s, DecodeMode::Sampled { count: 10_000 }).unwrap();
            assert!(
                dec.decodable && dec.failing_subsets.is_empty(),
                "sampled failures at ({n}, {m})"
            );
            assert!(check_security(&s).secure, "security at ({n}, {m})");
            assert!(check_zero_structure(&s).ok, "zero structure at ({n}, {m})");
        }
    }
    finish(5, "combined schemes: N<=18 exhaustive, 19..24 sampled", started, 900);
}

#[test]
fn criterion_6_min_max_converse_matches_h() {
    let started = Instant::now();
    for (n, m) in [(3, 2), (4, 3), (5, 2), (5, 3), (5, 4), (7, 4)] {
        let (value, witness) = converse_min_max(n, m).unwrap();
        let h = h_value(n, m).unwrap().value;
        assert_eq!(value, h, "min-max vs h at ({n}, {m})");
        assert!(m / gcd(n, m) <= 4);
        // Lower bounds the min-max must respect: the floor bound, and the
        // witness itself must attain the reported value.
        assert!(value >= n.div_ceil(m));
        assert_eq!(oracle_chain_len(&witness), value);
        witness.validate(m, m).unwrap();
    }
    finish(6, "brute-force min-max equals h on the six pairs", started, 600);
}

#[test]
fn criterion_7_micro_oracle_equivalence() {
    let started = Instant::now();
    let mut security_comparisons = 0usize;
    let mut decode_comparisons = 0usize;
    for q in [3u64, 5] {
        for (n, n_r) in [(2usize, 1usize), (2, 2), (3, 2)] {
            let p = params(n, n, n_r, q, 42);
            let m_prime = p.m_prime();
            let mut corpus: Vec<SchemeSpec> = vec![
                build_cyclic_scheme(&p).unwrap(),
                build_combined_scheme(&p).unwrap(),
            ];
            if n % m_prime == 0 {
                corpus.push(build_fractional_repetition_scheme(&p).unwrap());
            }
            for base in corpus.clone() {
                if base.randomness_count >= 1 {
                    corpus.push(strip_randomness(&base));
                }
            }
            for scheme in &corpus {
                // Corpus precondition making the rank test exactly the MI
                // test: the target lies in the transmitted row space.
                assert!(scheme
                    .expanded_rows()
                    .solve_left(&scheme.target_row())
                    .unwrap()
                    .is_some());
                let rank_verdict = check_security(scheme).secure;
                let mi_verdict = oracle_mi_secure(scheme);
                assert_eq!(rank_verdict, mi_verdict, "security verdicts disagree");
                security_comparisons += 1;
                for subset in subsets(n, n_r) {
                    let rows: Vec<Vec<u64>> =
                        subset.iter().map(|&i| scheme.expanded_row(i)).collect();
                    let stacked = FieldMatrix::from_rows(p.q, &rows).unwrap();
                    let linalg = stacked.solve_left(&scheme.target_row()).unwrap().is_some();
                    let lookup = oracle_lookup_decodes(scheme, &subset);
                    assert_eq!(linalg, lookup, "decodability verdicts disagree");
                    decode_comparisons += 1;
                }
            }
        }
    }
    // Both branches of each verdict must actually occur in the corpus.
    assert!(security_comparisons >= 12 && decode_comparisons >= 20);
    finish(
        7,
        &format!(
            "oracle equivalence: {security_comparisons} security, {decode_comparisons} decode comparisons, zero disagreements"
        ),
        started,
        60,
    );
}

#[test]
fn criterion_8_fault_injections_detected() {
    let started = Instant::now();
    // Twenty seeded schemes with eta >= 1 across the three builders.
    let spec: [(usize, usize, usize); 20] = [
        (0, 4, 3),
        (1, 8, 5),
        (2, 5, 4),
        (0, 4, 3),
        (1, 6, 4),
        (2, 7, 4),
        (0, 6, 5),
        (1, 6, 5),
        (2, 8, 4),
        (0, 7, 6),
        (1, 8, 7),
        (2, 9, 8),
        (0, 8, 6),
        (1, 9, 7),
        (2, 10, 6),
        (0, 9, 4),
        (1, 10, 9),
        (2, 6, 5),
        (0, 10, 7),
        (1, 12, 9),
    ];
    for (seed, (kind, n, n_r)) in spec.iter().enumerate() {
        let p = params(*n, *n, *n_r, 2147483647, seed as u64);
        let s = match kind {
            0 => build_cyclic_scheme(&p).unwrap(),
            1 => build_fractional_repetition_scheme(&p).unwrap(),
            _ => build_combined_scheme(&p).unwrap(),
        };
        assert!(s.randomness_count >= 1, "need eta >= 1 at case {seed}");

        // (a) Stripping the randomness flips security to FAIL.
        let stripped = strip_randomness(&s);
        assert!(!check_security(&stripped).secure, "strip not detected at {seed}");

        // (b) A coefficient on a non-stored message flips zero-structure.
        let mut leaky = s.clone();
        let (srv, missing) = (0..p.n)
            .flat_map(|srv| (1..=p.n).map(move |g| (srv, g)))
            .find(|&(srv, g)| !s.can_compute(srv, g))
            .expect("every server misses some merged message when M' < N");
        let row_used = (0..s.lambda)
            .find(|&r| s.server_vectors[srv][r] != 0)
            .expect("vectors are nonzero");
        let old = leaky.coeff_matrix.get(row_used, missing - 1);
        leaky.coeff_matrix.set(row_used, missing - 1, old + 1);
        let zs = check_zero_structure(&leaky);
        assert!(!zs.ok, "zero-structure corruption not detected at {seed}");

        // (c) Zeroing one server's answer creates a failing subset.
        let mut silenced = s.clone();
        silenced.server_vectors[0] = vec![0; s.lambda];
        let dec = check_decodability(&silenced, DecodeMode::Exhaustive).unwrap();
        assert!(!dec.decodable, "zero row not detected at {seed}");
        assert!(!dec.failing_subsets.is_empty());
    }
    finish(8, "strip/flip/silence faults detected on 20 seeded schemes", started, 60);
}
