//! Stage-1 (non-secure) construction for the combined scheme.
//!
//! The recursion mirrors the h(N, M') rewrite rules: each rule builds the
//! (N, M') scheme for K = N from an inner scheme on a smaller instance,
//! carrying an explicit linear expansion from inner messages to outer
//! messages so the coefficient matrix is always materialized over the N
//! outer messages. Every produced scheme has the all-ones target as its
//! first row and transmission vectors that vanish on messages the server
//! does not store; decodability of sampled coefficients is left to the
//! caller's verify-and-retry loop.

use rand::Rng;

use crate::assignment::{gcd, mod1};
use crate::field::{sample_matrix_with, FieldMatrix, FieldModulus};
use crate::Error;

use super::sample_nonzero_pair;

/// A stage-1 scheme for the (n, m') problem with K = N = n.
pub(crate) struct Stage1 {
    pub n: usize,
    pub m_prime: usize,
    /// Per server, the 1-based messages it stores (sorted).
    pub sets: Vec<Vec<usize>>,
    /// lambda x n coefficient matrix; first row all-ones.
    pub f: FieldMatrix,
    /// Per server, its length-lambda transmission vector over the rows of f.
    pub vectors: Vec<Vec<u64>>,
}

impl Stage1 {
    fn lambda(&self) -> usize {
        self.f.rows()
    }
}

pub(crate) fn build_stage1<R: Rng>(
    q: FieldModulus,
    n: usize,
    m_prime: usize,
    rng: &mut R,
) -> Result<Stage1, Error> {
    if n == 0 || m_prime == 0 || m_prime > n {
        return Err(Error::InvalidParameters(format!(
            "stage-1 needs 1 <= M' <= N, got ({n}, {m_prime})"
        )));
    }
    let g = gcd(n, m_prime);
    if g > 1 {
        let inner = build_stage1(q, n / g, m_prime / g, rng)?;
        return Ok(gcd_expand(inner, g));
    }
    if m_prime == 1 {
        return Ok(base_rep(q, n));
    }
    if n > 2 * m_prime {
        let v = n / m_prime - 1;
        let inner = build_stage1(q, n - v * m_prime, m_prime, rng)?;
        return Ok(blocks_expand(inner, v, m_prime));
    }
    if 2 * n < 3 * m_prime {
        let inner = build_stage1(q, m_prime, 2 * m_prime - n, rng)?;
        return reflect_expand(inner, n, m_prime, rng);
    }
    if m_prime.is_multiple_of(2) {
        let inner = build_stage1(q, n - m_prime, m_prime / 2, rng)?;
        return Ok(even_expand(inner, m_prime));
    }
    odd_terminal(q, n, m_prime, rng)
}

/// M' = 1: server i alone holds message i. Rows are the target followed by
/// suffix sums, so each server's single message is a difference of
/// adjacent rows and the securify pads telescope.
fn base_rep(q: FieldModulus, n: usize) -> Stage1 {
    let mut f = FieldMatrix::zeros(q, n, n);
    for c in 0..n {
        f.set(0, c, 1);
    }
    for r in 1..n {
        for c in r..n {
            f.set(r, c, 1);
        }
    }
    let mut vectors = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = vec![0u64; n];
        v[i] = 1;
        if i + 1 < n {
            v[i + 1] = q.neg(1);
        }
        vectors.push(v);
    }
    Stage1 {
        n,
        m_prime: 1,
        sets: (1..=n).map(|i| vec![i]).collect(),
        f,
        vectors,
    }
}

/// Scheme 1: g = gcd(N, M') messages form a super-message and g servers a
/// super-server; the inner scheme runs unchanged on the merged system.
fn gcd_expand(inner: Stage1, g: usize) -> Stage1 {
    let n = inner.n * g;
    let lambda = inner.lambda();
    let mut f = FieldMatrix::zeros(inner.f.modulus(), lambda, n);
    for r in 0..lambda {
        for i in 0..inner.n {
            let val = inner.f.get(r, i);
            for t in 0..g {
                f.set(r, i * g + t, val);
            }
        }
    }
    let mut sets = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for j in 0..inner.n {
        let datasets: Vec<usize> = inner.sets[j]
            .iter()
            .flat_map(|&i| ((i - 1) * g + 1)..=(i * g))
            .collect();
        for _ in 0..g {
            sets.push(datasets.clone());
            vectors.push(inner.vectors[j].clone());
        }
    }
    Stage1 {
        n,
        m_prime: inner.m_prime * g,
        sets,
        f,
        vectors,
    }
}

/// Scheme 2 (N > 2M'): v fully replicated blocks of M' servers each send
/// their block sum; the remaining (N - vM', M') instance runs the inner
/// scheme. Adds v rows.
fn blocks_expand(inner: Stage1, v: usize, m_prime: usize) -> Stage1 {
    let offset = v * m_prime;
    let n = offset + inner.n;
    let q = inner.f.modulus();
    let lam_in = inner.lambda();
    let lambda = lam_in + v;
    let mut f = FieldMatrix::zeros(q, lambda, n);
    for c in 0..n {
        f.set(0, c, 1);
    }
    // Row 1: the inner target (sum of the last block), embedded.
    for i in 0..inner.n {
        f.set(1, offset + i, inner.f.get(0, i));
    }
    // Rows 2..=v: sums of blocks 2..=v (block 1's sum is a combination).
    for b in 1..v {
        for c in (b * m_prime)..((b + 1) * m_prime) {
            f.set(1 + b, c, 1);
        }
    }
    // Rows v+1..: the inner rows past its target, embedded.
    for r in 1..lam_in {
        for i in 0..inner.n {
            f.set(v + r, offset + i, inner.f.get(r, i));
        }
    }

    let mut sets = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for b in 0..v {
        let block: Vec<usize> = ((b * m_prime + 1)..=((b + 1) * m_prime)).collect();
        for _ in 0..m_prime {
            sets.push(block.clone());
            let mut s = vec![0u64; lambda];
            if b == 0 {
                s[0] = 1;
                for item in s.iter_mut().take(v + 1).skip(1) {
                    *item = q.neg(1);
                }
            } else {
                s[1 + b] = 1;
            }
            vectors.push(s);
        }
    }
    for j in 0..inner.n {
        sets.push(inner.sets[j].iter().map(|&d| offset + d).collect());
        let mut s = vec![0u64; lambda];
        s[1] = inner.vectors[j][0];
        s[v + 1..v + lam_in].copy_from_slice(&inner.vectors[j][1..]);
        vectors.push(s);
    }
    Stage1 {
        n,
        m_prime,
        sets,
        f,
        vectors,
    }
}

/// Scheme 3 (1.5M' <= N < 2M', M' even): two half-classes of [M'] send
/// 2F1 - F2 and F2 - F1; the rest run the inner (N - M', M'/2) scheme over
/// the pair messages P_i = W_{y+i} + 2 W_{M'+i}, whose sum is F2. Adds one
/// row.
fn even_expand(inner: Stage1, m_prime: usize) -> Stage1 {
    let n = inner.n + m_prime;
    let y = 2 * m_prime - n;
    debug_assert!(y >= 1 && 2 * y <= m_prime && m_prime.is_multiple_of(2));
    let q = inner.f.modulus();
    let lam_in = inner.lambda();
    let lambda = lam_in + 1;
    let half = m_prime / 2;

    // expandP maps an inner row over pairs onto outer messages.
    let expand_pair = |row: &[u64]| -> Vec<u64> {
        let mut out = vec![0u64; n];
        for (i0, &val) in row.iter().enumerate() {
            out[y + i0] = val; // message y + i, 1-based i = i0 + 1
            out[m_prime + i0] = q.mul(2, val);
        }
        out
    };

    let mut rows = vec![vec![1u64; n]];
    for r in 0..lam_in {
        rows.push(expand_pair(inner.f.row(r)));
    }
    let f = FieldMatrix::from_rows(q, &rows).expect("uniform widths");

    let mut sets = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for idx0 in 0..m_prime {
        if idx0 < half {
            sets.push((1..=m_prime).collect());
            let mut s = vec![0u64; lambda];
            s[0] = 2 % q.q();
            s[1] = q.neg(1);
            vectors.push(s);
        } else {
            let mut z: Vec<usize> = (1..=y).collect();
            z.extend((m_prime + 1)..=n);
            sets.push(z);
            let mut s = vec![0u64; lambda];
            s[0] = q.neg(1);
            s[1] = 1;
            vectors.push(s);
        }
    }
    for j in 0..inner.n {
        let mut z: Vec<usize> = Vec::with_capacity(m_prime);
        for &i in &inner.sets[j] {
            z.push(y + i);
            z.push(m_prime + i);
        }
        z.sort_unstable();
        sets.push(z);
        let mut s = vec![0u64; lambda];
        s[1..].copy_from_slice(&inner.vectors[j]);
        vectors.push(s);
    }
    Stage1 {
        n,
        m_prime,
        sets,
        f,
        vectors,
    }
}

/// Scheme 5 (M' < N < 1.5M'): messages 1..N-M' go to every server in [M'],
/// the rest to all of [M'+1..N] plus the inner (M', 2M'-N) pattern on [M'].
/// Servers past M' send random left-nullspace combinations of the rank-1
/// left block. Row count unchanged.
fn reflect_expand<R: Rng>(
    inner: Stage1,
    n: usize,
    m_prime: usize,
    rng: &mut R,
) -> Result<Stage1, Error> {
    let q = inner.f.modulus();
    let lambda = inner.lambda();
    debug_assert!(lambda >= 2, "reflect on coprime (n, m') has lambda >= 2");
    let left_width = n - m_prime;

    // Column profile of the rank-1 left block: 1 on the target row, then
    // one sampled value per remaining row, constant across the block.
    let mut left_col = vec![1u64];
    for _ in 1..lambda {
        left_col.push(rng.random_range(0..q.q()));
    }
    let mut rows = Vec::with_capacity(lambda);
    for (r, &profile) in left_col.iter().enumerate() {
        let mut row = vec![profile; left_width];
        row.extend_from_slice(inner.f.row(r));
        rows.push(row);
    }
    let f = FieldMatrix::from_rows(q, &rows)?;

    let mut col = FieldMatrix::zeros(q, lambda, 1);
    for (r, &profile) in left_col.iter().enumerate() {
        col.set(r, 0, profile);
    }
    let nullspace = col.left_nullspace();
    debug_assert_eq!(nullspace.rows(), lambda - 1);

    let mut sets = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for j in 0..m_prime {
        let mut z: Vec<usize> = (1..=left_width).collect();
        z.extend(inner.sets[j].iter().map(|&d| left_width + d));
        z.sort_unstable();
        sets.push(z);
        vectors.push(inner.vectors[j].clone());
    }
    for _ in m_prime..n {
        sets.push(((left_width + 1)..=n).collect());
        // Nullspace rows are independent, so any nonzero coefficient tuple
        // gives a nonzero vector.
        let mut coeffs: Vec<u64> = vec![0; lambda - 1];
        while coeffs.iter().all(|&c| c == 0) {
            for c in coeffs.iter_mut() {
                *c = rng.random_range(0..q.q());
            }
        }
        let mut s = vec![0u64; lambda];
        for (bi, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (pos, item) in s.iter_mut().enumerate() {
                *item = q.add(*item, q.mul(c, nullspace.get(bi, pos)));
            }
        }
        vectors.push(s);
    }
    Ok(Stage1 {
        n,
        m_prime,
        sets,
        f,
        vectors,
    })
}

/// Scheme 4 (1.5M' <= N < 2M', M' odd): terminal case with three server
/// classes and lambda = N - (3M' - 5)/2 rows; class [1..y] sends F1 - F2,
/// class [y+1..M'] random combinations of a 2-dimensional nullspace, class
/// [M'+1..N] the cyclic-style single nullspace vector.
fn odd_terminal<R: Rng>(
    q: FieldModulus,
    n: usize,
    m_prime: usize,
    rng: &mut R,
) -> Result<Stage1, Error> {
    debug_assert!(m_prime % 2 == 1 && m_prime >= 3);
    debug_assert!(2 * n >= 3 * m_prime && n < 2 * m_prime);
    let y = 2 * m_prime - n;
    let t = (m_prime - 1) / 2;
    let lambda = (m_prime + 5) / 2 - y;
    let tail = n - m_prime; // cyclic window universe for part-3 messages

    let a = q.sample_excluding(rng, &[0, 1])?;
    let stars = sample_matrix_with(q, lambda - 2, tail, rng, None)?;
    let mut f = FieldMatrix::zeros(q, lambda, n);
    for c in 0..n {
        f.set(0, c, 1);
    }
    for c in t..m_prime {
        f.set(1, c, a);
    }
    for c in m_prime..n {
        f.set(1, c, 1);
    }
    for r in 0..lambda - 2 {
        for c in 0..tail {
            f.set(2 + r, m_prime + c, stars.get(r, c));
        }
    }

    // Part-3 window of a class-2 server (1-based relative indices into the
    // tail), and the shorter window of a class-3 server.
    let window2 = |srv: usize| -> Vec<usize> {
        (0..=t).map(|j| mod1(srv - y + j, tail)).collect()
    };
    let window3 = |srv: usize| -> Vec<usize> {
        (0..t).map(|j| mod1(srv - m_prime + j, tail)).collect()
    };

    let mut sets = Vec::with_capacity(n);
    for srv in 1..=n {
        let mut z: Vec<usize> = if srv <= y {
            (1..=m_prime).collect()
        } else if srv <= m_prime {
            let mut z: Vec<usize> = (1..=t).collect();
            z.extend(window2(srv).into_iter().map(|rel| m_prime + rel));
            z
        } else {
            let mut z: Vec<usize> = ((t + 1)..=m_prime).collect();
            z.extend(window3(srv).into_iter().map(|rel| m_prime + rel));
            z
        };
        z.sort_unstable();
        z.dedup();
        sets.push(z);
    }

    // Class-2 basis [a f1 - f2; f3; ...] and class-3 basis [f2; f3; ...].
    let mut basis2_rows = Vec::with_capacity(lambda - 1);
    {
        let top: Vec<u64> = (0..n)
            .map(|c| q.sub(q.mul(a, f.get(0, c)), f.get(1, c)))
            .collect();
        basis2_rows.push(top);
        for r in 2..lambda {
            basis2_rows.push(f.row(r).to_vec());
        }
    }
    let basis2 = FieldMatrix::from_rows(q, &basis2_rows)?;
    let basis3_rows: Vec<Vec<u64>> = (1..lambda).map(|r| f.row(r).to_vec()).collect();
    let basis3 = FieldMatrix::from_rows(q, &basis3_rows)?;

    let mut vectors = Vec::with_capacity(n);
    for srv in 1..=n {
        if srv <= y {
            let mut s = vec![0u64; lambda];
            s[0] = 1;
            s[1] = q.neg(1);
            vectors.push(s);
            continue;
        }
        if srv <= m_prime {
            let window = window2(srv);
            let missing: Vec<usize> = (1..=tail)
                .filter(|rel| !window.contains(rel))
                .map(|rel| m_prime + rel - 1)
                .collect();
            let ns = basis2.select_columns(&missing).left_nullspace();
            if ns.rows() != 2 {
                return Err(Error::ConstructionFailed {
                    attempts: 1,
                    reason: format!(
                        "class-2 nullspace dimension {} at server {srv} (want 2)",
                        ns.rows()
                    ),
                });
            }
            let (c1, c2) = sample_nonzero_pair(q, rng);
            let mut coeffs = vec![0u64; lambda - 1];
            for (pos, item) in coeffs.iter_mut().enumerate() {
                let v = q.add(q.mul(c1, ns.get(0, pos)), q.mul(c2, ns.get(1, pos)));
                *item = v;
            }
            // Translate from [a f1 - f2; f3; ...] coordinates to rows of f.
            let mut s = vec![0u64; lambda];
            s[0] = q.mul(a, coeffs[0]);
            s[1] = q.neg(coeffs[0]);
            s[2..lambda].copy_from_slice(&coeffs[1..]);
            vectors.push(s);
            continue;
        }
        let window = window3(srv);
        let missing: Vec<usize> = (1..=tail)
            .filter(|rel| !window.contains(rel))
            .map(|rel| m_prime + rel - 1)
            .collect();
        let ns = basis3.select_columns(&missing).left_nullspace();
        if ns.rows() != 1 {
            return Err(Error::ConstructionFailed {
                attempts: 1,
                reason: format!(
                    "class-3 nullspace dimension {} at server {srv} (want 1)",
                    ns.rows()
                ),
            });
        }
        let mut s = vec![0u64; lambda];
        s[1..lambda].copy_from_slice(ns.row(0));
        vectors.push(s);
    }
    Ok(Stage1 {
        n,
        m_prime,
        sets,
        f,
        vectors,
    })
}
