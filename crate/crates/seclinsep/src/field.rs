//! Exact arithmetic and dense linear algebra over a prime field F_q.
//!
//! Everything downstream (scheme construction, decodability and security
//! verification) reduces to rank, left-system solving and left-nullspace
//! computations on small dense matrices, so those are the primitives here.
//! No floating point anywhere; residues are `u64` values in `[0, q)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Error;

/// Largest supported modulus. Keeping q below 2^31 means products of two
/// residues fit in a `u64` without widening.
pub const MAX_MODULUS: u64 = (1 << 31) - 1;

/// A prime modulus q defining the field F_q.
///
/// Primality is checked at construction (deterministic Miller-Rabin, exact
/// for the supported range). The default modulus used by the CLI is the
/// Mersenne prime 2^31 - 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldModulus {
    q: u64,
}

impl FieldModulus {
    /// Checks `q` is prime and in range. Small primes (q = 2, 3) are
    /// accepted; constructions over tiny fields rely on the verifier to
    /// reject unlucky draws.
    pub fn new(q: u64) -> Result<Self, Error> {
        if !(2..=MAX_MODULUS).contains(&q) {
            return Err(Error::ModulusRange(q));
        }
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(Self { q })
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn reduce(&self, a: u64) -> u64 {
        a % self.q
    }

    /// Maps a signed integer onto its residue, so tests can write `-1`.
    pub fn from_i64(&self, a: i64) -> u64 {
        let q = self.q as i64;
        (a.rem_euclid(q)) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            self.q - (b - a)
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        // a, b < 2^31 so the product fits a u64.
        (a * b) % self.q
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut acc = 1u64 % self.q;
        a %= self.q;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: u64) -> Result<u64, Error> {
        let a = a % self.q;
        if a == 0 {
            return Err(Error::ZeroInverse);
        }
        Ok(self.pow(a, self.q - 2))
    }

    /// Uniform residue avoiding everything in `excluded`, by rejection.
    pub fn sample_excluding<R: Rng>(&self, rng: &mut R, excluded: &[u64]) -> Result<u64, Error> {
        let distinct: BTreeSet<u64> = excluded.iter().map(|&e| e % self.q).collect();
        if distinct.len() as u64 >= self.q {
            return Err(Error::ExclusionTooLarge {
                excluded: distinct.len(),
                q: self.q,
            });
        }
        loop {
            let v = rng.random_range(0..self.q);
            if !distinct.contains(&v) {
                return Ok(v);
            }
        }
    }
}

/// Deterministic Miller-Rabin; bases {2, 3, 5, 7} are exact below
/// 3,215,031,751 which covers the supported modulus range.
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut a: u64, mut e: u64| {
        let mut acc = 1u64;
        a %= n;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, a);
            }
            a = mulmod(a, a);
            e >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Per-cell exclusion sets for [`sample_matrix`]: residues that must not
/// appear at the flagged `(row, col)` positions.
pub type CellExclusions = BTreeMap<(usize, usize), BTreeSet<u64>>;

/// Dense row-major matrix over F_q.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldMatrix {
    q: FieldModulus,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl FieldMatrix {
    pub fn zeros(q: FieldModulus, rows: usize, cols: usize) -> Self {
        Self {
            q,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(q: FieldModulus, n: usize) -> Self {
        let mut m = Self::zeros(q, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds from explicit rows; entries are reduced mod q.
    pub fn from_rows(q: FieldModulus, rows: &[Vec<u64>]) -> Result<Self, Error> {
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::Dimension(format!(
                    "ragged rows: expected width {ncols}, found {}",
                    r.len()
                )));
            }
            data.extend(r.iter().map(|&v| q.reduce(v)));
        }
        Ok(Self {
            q,
            rows: rows.len(),
            cols: ncols,
            data,
        })
    }

    /// Rebuilds from a row-major entry array (the wire format).
    pub fn from_entries(
        q: FieldModulus,
        rows: usize,
        cols: usize,
        entries: Vec<u64>,
    ) -> Result<Self, Error> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "entry array length {} does not match {rows}x{cols}",
                entries.len()
            )));
        }
        let data = entries.into_iter().map(|v| q.reduce(v)).collect();
        Ok(Self {
            q,
            rows,
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn modulus(&self) -> FieldModulus {
        self.q
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = self.q.reduce(v);
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn entries(&self) -> &[u64] {
        &self.data
    }

    pub fn row_vecs(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Submatrix keeping `idx` columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(self.q, self.rows, idx.len());
        for r in 0..self.rows {
            for (jj, &j) in idx.iter().enumerate() {
                m.set(r, jj, self.get(r, j));
            }
        }
        m
    }

    /// Horizontal concatenation `[self | right]`.
    pub fn hstack(&self, right: &Self) -> Result<Self, Error> {
        if self.rows != right.rows {
            return Err(Error::Dimension(format!(
                "hstack: {} vs {} rows",
                self.rows, right.rows
            )));
        }
        let mut m = Self::zeros(self.q, self.rows, self.cols + right.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m.set(r, c, self.get(r, c));
            }
            for c in 0..right.cols {
                m.set(r, self.cols + c, right.get(r, c));
            }
        }
        Ok(m)
    }

    /// Row-vector times matrix: `v · self`, v of length `rows`.
    pub fn left_mul(&self, v: &[u64]) -> Result<Vec<u64>, Error> {
        if v.len() != self.rows {
            return Err(Error::Dimension(format!(
                "left_mul: vector length {} vs {} rows",
                v.len(),
                self.rows
            )));
        }
        let q = self.q;
        let mut out = vec![0u64; self.cols];
        for (r, &coef) in v.iter().enumerate() {
            if coef == 0 {
                continue;
            }
            let row = self.row(r);
            for (o, &x) in out.iter_mut().zip(row.iter()) {
                *o = q.add(*o, q.mul(coef, x));
            }
        }
        Ok(out)
    }

    /// Rank via Gaussian elimination.
    pub fn rank(&self) -> usize {
        self.echelon().pivots.len()
    }

    /// Finds `u` with `u · self = target`, or `None` when the target lies
    /// outside the row space. `target` must have `cols` entries.
    pub fn solve_left(&self, target: &[u64]) -> Result<Option<Vec<u64>>, Error> {
        if target.len() != self.cols {
            return Err(Error::Dimension(format!(
                "solve_left: target length {} vs {} cols",
                target.len(),
                self.cols
            )));
        }
        let q = self.q;
        let ech = self.echelon();
        let mut residual: Vec<u64> = target.iter().map(|&v| q.reduce(v)).collect();
        let mut combo = vec![0u64; self.rows];
        for (i, &p) in ech.pivots.iter().enumerate() {
            let factor = residual[p];
            if factor == 0 {
                continue;
            }
            // Pivot entries are normalized to 1.
            for (res, &l) in residual.iter_mut().zip(ech.left[i].iter()) {
                *res = q.sub(*res, q.mul(factor, l));
            }
            for (co, &t) in combo.iter_mut().zip(ech.transform[i].iter()) {
                *co = q.add(*co, q.mul(factor, t));
            }
        }
        if residual.iter().all(|&v| v == 0) {
            Ok(Some(combo))
        } else {
            Ok(None)
        }
    }

    /// Basis of the row space: the nonzero rows of an echelon form.
    pub fn row_basis(&self) -> Self {
        let ech = self.echelon();
        let rank = ech.pivots.len();
        let basis: Vec<Vec<u64>> = ech.left[..rank].to_vec();
        Self {
            q: self.q,
            rows: rank,
            cols: self.cols,
            data: basis.into_iter().flatten().collect(),
        }
    }

    /// Basis of the left nullspace: `rows - rank` independent vectors `v`
    /// with `v · self = 0`, returned as the rows of a matrix. Full-row-rank
    /// input yields a 0-row result.
    pub fn left_nullspace(&self) -> Self {
        let ech = self.echelon();
        let rank = ech.pivots.len();
        let basis: Vec<Vec<u64>> = ech.transform[rank..].to_vec();
        Self {
            q: self.q,
            rows: basis.len(),
            cols: self.rows,
            data: basis.into_iter().flatten().collect(),
        }
    }

    /// Forward echelon form of `[self | I]`, pivots normalized to 1.
    /// `transform[i] · self = left[i]`; rows beyond the rank have zero
    /// left part, so their transform rows span the left nullspace.
    #[allow(clippy::needless_range_loop)] // split borrows across rows
    fn echelon(&self) -> Echelon {
        let q = self.q;
        let mut left = self.row_vecs();
        let mut transform: Vec<Vec<u64>> = (0..self.rows)
            .map(|i| {
                let mut e = vec![0u64; self.rows];
                e[i] = 1;
                e
            })
            .collect();
        let mut pivots = Vec::new();
        let mut next_row = 0usize;
        for col in 0..self.cols {
            let Some(pr) = (next_row..self.rows).find(|&r| left[r][col] != 0) else {
                continue;
            };
            left.swap(next_row, pr);
            transform.swap(next_row, pr);
            let inv = q
                .inv(left[next_row][col])
                .expect("pivot is nonzero by selection");
            if inv != 1 {
                for v in left[next_row].iter_mut() {
                    *v = q.mul(*v, inv);
                }
                for v in transform[next_row].iter_mut() {
                    *v = q.mul(*v, inv);
                }
            }
            for r in 0..self.rows {
                if r == next_row {
                    continue;
                }
                let factor = left[r][col];
                if factor == 0 {
                    continue;
                }
                for c in 0..self.cols {
                    let sub = q.mul(factor, left[next_row][c]);
                    left[r][c] = q.sub(left[r][c], sub);
                }
                for c in 0..self.rows {
                    let sub = q.mul(factor, transform[next_row][c]);
                    transform[r][c] = q.sub(transform[r][c], sub);
                }
            }
            pivots.push(col);
            next_row += 1;
            if next_row == self.rows {
                break;
            }
        }
        Echelon {
            left,
            transform,
            pivots,
        }
    }
}

struct Echelon {
    left: Vec<Vec<u64>>,
    transform: Vec<Vec<u64>>,
    pivots: Vec<usize>,
}

/// Uniform i.i.d. matrix, reproducible from the seed; per-cell exclusion
/// sets are honored by rejection sampling.
pub fn sample_matrix(
    q: FieldModulus,
    rows: usize,
    cols: usize,
    seed: u64,
    exclusions: Option<&CellExclusions>,
) -> Result<FieldMatrix, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_matrix_with(q, rows, cols, &mut rng, exclusions)
}

/// As [`sample_matrix`] but drawing from a caller-owned generator, so a
/// retry loop advances through fresh randomness.
pub fn sample_matrix_with<R: Rng>(
    q: FieldModulus,
    rows: usize,
    cols: usize,
    rng: &mut R,
    exclusions: Option<&CellExclusions>,
) -> Result<FieldMatrix, Error> {
    let empty = BTreeSet::new();
    let mut m = FieldMatrix::zeros(q, rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let excl = exclusions
                .and_then(|e| e.get(&(r, c)))
                .unwrap_or(&empty);
            if excl.len() as u64 >= q.q() {
                return Err(Error::ExclusionTooLarge {
                    excluded: excl.len(),
                    q: q.q(),
                });
            }
            loop {
                let v = rng.random_range(0..q.q());
                if !excl.contains(&v) {
                    m.set(r, c, v);
                    break;
                }
            }
        }
    }
    Ok(m)
}
