//! Exact Smith normal form and basis extraction for monomial groups.
//!
//! A presentation `Gamma(K, L)` is the quotient of `Z^t` by the row lattice of
//! its relation matrix `R`. Columns of `R` are indexed by generators in
//! reverse order (`x_t` first), which makes `R` upper triangular with
//! diagonal `-k_t, ..., -k_1`. If `U R V = D`, the change of coordinates
//! `v -> v V` carries the relation lattice onto the row lattice of `D`, so the
//! rows of `V^{-1}` are the new basis elements.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::monomial::{Monomial, Presentation};

/// Dense matrix of arbitrary-precision integers, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct IntegerMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntegerMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntegerMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("ragged matrix rows".into()));
        }
        Ok(IntegerMatrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().cloned().map(Into::into).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul(&self, rhs: &IntegerMatrix) -> IntegerMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = IntegerMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)].is_zero()))
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[(k, k)].is_zero() {
                match (k + 1..n).find(|&i| !a[(i, k)].is_zero()) {
                    Some(i) => {
                        a.swap_rows(i, k);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)]) / &prev;
                    a[(i, j)] = v;
                }
            }
            prev = a[(k, k)].clone();
        }
        sign * a[(n - 1, n - 1)].clone()
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i != j {
            for c in 0..self.cols {
                self.data.swap(i * self.cols + c, j * self.cols + c);
            }
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i != j {
            for r in 0..self.rows {
                self.data.swap(r * self.cols + i, r * self.cols + j);
            }
        }
    }

    /// row[dst] += factor * row[src]
    fn add_row(&mut self, dst: usize, src: usize, factor: &BigInt) {
        for c in 0..self.cols {
            let v = &self[(src, c)] * factor;
            self[(dst, c)] += v;
        }
    }

    /// col[dst] += factor * col[src]
    fn add_col(&mut self, dst: usize, src: usize, factor: &BigInt) {
        for r in 0..self.rows {
            let v = &self[(r, src)] * factor;
            self[(r, dst)] += v;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for c in 0..self.cols {
            let v = -std::mem::take(&mut self[(i, c)]);
            self[(i, c)] = v;
        }
    }
}

impl Index<(usize, usize)> for IntegerMatrix {
    type Output = BigInt;

    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntegerMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.rows).map(|i| self.row(i).iter().map(|x| x.to_string()).collect::<Vec<_>>()))
            .finish()
    }
}

/// JSON arrays of decimal strings, so entries of any size survive exactly.
impl Serialize for IntegerMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.to_string()).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntegerMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<String>> = Vec::deserialize(deserializer)?;
        let parsed = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| s.trim().parse::<BigInt>().map_err(D::Error::custom))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        IntegerMatrix::from_rows(&parsed).map_err(D::Error::custom)
    }
}

/// `U R V = D` with `U`, `V` unimodular and `D = diag(m_1, ..., m_r, 0, ...)`,
/// `m_1 | m_2 | ... | m_r`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnfResult {
    pub u: IntegerMatrix,
    pub v: IntegerMatrix,
    pub v_inv: IntegerMatrix,
    pub d: IntegerMatrix,
    /// Number of nonzero diagonal entries.
    pub rank: usize,
}

impl SnfResult {
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.d.rows().min(self.d.cols())).map(|i| self.d[(i, i)].clone()).collect()
    }

    /// Diagonal entries greater than one, in divisibility order.
    pub fn invariant_factors(&self) -> Vec<u64> {
        self.diagonal()
            .into_iter()
            .filter(|m| *m > BigInt::one())
            .map(|m| m.to_u64().expect("invariant factor exceeds u64"))
            .collect()
    }
}

/// The `t x t` relation matrix, generators in reverse column order.
pub fn build_relation_matrix(p: &Presentation) -> IntegerMatrix {
    let t = p.rank();
    let mut r = IntegerMatrix::zeros(t, t);
    for g in 0..t {
        let row = t - 1 - g;
        r[(row, row)] = -BigInt::from(p.exponents()[g]);
        for (j, &l) in p.relations()[g].iter().enumerate() {
            r[(row, t - 1 - j)] = BigInt::from(l);
        }
    }
    r
}

/// Smith normal form by gcd-driven row and column elimination.
///
/// Each pivot is the smallest nonzero entry of the trailing block; its row
/// and column are cleared with Euclidean remainders, and a pivot that fails
/// to divide the rest of the block absorbs an offending row and is reduced
/// again. Entries stay small because every step is a remainder step.
pub fn smith_normal_form(r: &IntegerMatrix) -> SnfResult {
    let (rows, cols) = (r.rows(), r.cols());
    let mut a = r.clone();
    let mut u = IntegerMatrix::identity(rows);
    let mut v = IntegerMatrix::identity(cols);
    let mut v_inv = IntegerMatrix::identity(cols);
    let mut rank = 0;

    'pivots: for k in 0..rows.min(cols) {
        loop {
            let Some((pi, pj)) = smallest_nonzero(&a, k) else {
                break 'pivots;
            };
            a.swap_rows(k, pi);
            u.swap_rows(k, pi);
            a.swap_cols(k, pj);
            v.swap_cols(k, pj);
            v_inv.swap_rows(k, pj);

            let mut clean = true;
            for i in k + 1..rows {
                if a[(i, k)].is_zero() {
                    continue;
                }
                let q = a[(i, k)].div_floor(&a[(k, k)]);
                let neg_q = -q;
                a.add_row(i, k, &neg_q);
                u.add_row(i, k, &neg_q);
                clean &= a[(i, k)].is_zero();
            }
            for j in k + 1..cols {
                if a[(k, j)].is_zero() {
                    continue;
                }
                let q = a[(k, j)].div_floor(&a[(k, k)]);
                let neg_q = -&q;
                a.add_col(j, k, &neg_q);
                v.add_col(j, k, &neg_q);
                // (V E)^{-1} = E^{-1} V^{-1}, E^{-1} adds q * row j to row k.
                v_inv.add_row(k, j, &q);
                clean &= a[(k, j)].is_zero();
            }
            if !clean {
                continue;
            }
            let pivot = a[(k, k)].clone();
            let offender = (k + 1..rows)
                .find(|&i| (k + 1..cols).any(|j| !a[(i, j)].is_multiple_of(&pivot)));
            match offender {
                Some(i) => {
                    let one = BigInt::one();
                    a.add_row(k, i, &one);
                    u.add_row(k, i, &one);
                }
                None => break,
            }
        }
        if a[(k, k)].is_negative() {
            a.negate_row(k);
            u.negate_row(k);
        }
        rank += 1;
    }

    let result = SnfResult {
        u,
        v,
        v_inv,
        d: a,
        rank,
    };
    check_snf(r, &result);
    result
}

fn smallest_nonzero(a: &IntegerMatrix, k: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in k..a.rows() {
        for j in k..a.cols() {
            let x = &a[(i, j)];
            if x.is_zero() {
                continue;
            }
            if best.is_none_or(|(bi, bj)| x.abs() < a[(bi, bj)].abs()) {
                best = Some((i, j));
            }
        }
    }
    best
}

fn check_snf(r: &IntegerMatrix, s: &SnfResult) {
    assert_eq!(s.u.mul(r).mul(&s.v), s.d, "U R V != D");
    assert!(s.d.is_diagonal(), "D is not diagonal");
    assert_eq!(s.u.determinant().abs(), BigInt::one(), "U is not unimodular");
    assert_eq!(s.v.determinant().abs(), BigInt::one(), "V is not unimodular");
    assert_eq!(s.v.mul(&s.v_inv), IntegerMatrix::identity(s.v.rows()), "V^-1 is wrong");
    let diag = s.diagonal();
    for w in diag.windows(2) {
        let ok = if w[0].is_zero() { w[1].is_zero() } else { w[1].is_multiple_of(&w[0]) };
        assert!(ok, "divisibility chain broken: {} then {}", w[0], w[1]);
    }
    assert!(diag.iter().all(|m| !m.is_negative()), "negative diagonal entry");
}

/// Invariant factors of `Gamma(K, L)`, unit factors dropped.
pub fn invariant_factors(p: &Presentation) -> Vec<u64> {
    smith_normal_form(&build_relation_matrix(p)).invariant_factors()
}

/// The basis `y_1, ..., y_r` of `Gamma(K, L)` read off the rows of `V^{-1}`,
/// one monomial per invariant factor greater than one, in the same order as
/// [`SnfResult::invariant_factors`].
pub fn basis_from_snf(p: &Presentation, snf: &SnfResult) -> Result<Vec<Monomial>> {
    let t = p.rank();
    if snf.v_inv.rows() != t {
        return Err(Error::Precondition("SNF does not belong to this presentation".into()));
    }
    let diag = snf.diagonal();
    if diag.iter().any(Zero::is_zero) {
        return Err(Error::Precondition("relation matrix is singular".into()));
    }
    let mut basis = Vec::new();
    for (i, m) in diag.iter().enumerate() {
        if m.is_one() {
            continue;
        }
        let raw: Vec<i128> = (0..t)
            .map(|g| {
                snf.v_inv[(i, t - 1 - g)]
                    .to_i128()
                    .ok_or_else(|| Error::Inconsistent("basis exponent exceeds i128".into()))
            })
            .collect::<Result<_>>()?;
        let y = p.reduce(&raw);
        let expected = m.to_u64().ok_or_else(|| Error::Inconsistent("invariant factor exceeds u64".into()))?;
        let order = p.element_order(&y);
        if order != expected {
            return Err(Error::Inconsistent(format!(
                "basis element {y} has order {order}, expected {expected}"
            )));
        }
        basis.push(y);
    }
    Ok(basis)
}
