//! Exact arithmetic in the monomial group `Gamma(K, L)`.
//!
//! Elements are reduced exponent vectors `x_1^{j_1} ... x_t^{j_t}` with
//! `0 <= j_i < k_i`, subject to the triangular relations
//! `x_i^{k_i} = x_1^{l_{i,1}} ... x_{i-1}^{l_{i,i-1}}` and `x_1^{k_1} = 1`.
//! Reduction sweeps from `x_t` down to `x_1`, pushing carries into lower
//! indices, so every operation costs `O(t^2)` word operations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::factorize;
use crate::deterministic::GeneratorChain;
use crate::error::{Error, Result};
use crate::oracle::{pow_with_identity, Element, GroupOracle};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Presentation {
    exponents: Vec<u64>,
    relations: Vec<Vec<u64>>,
    order: u64,
}

/// A reduced exponent vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<u64>);

impl Monomial {
    pub fn exponents(&self) -> &[u64] {
        &self.0
    }

    pub fn into_exponents(self) -> Vec<u64> {
        self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "x{}^{}", i + 1, e)?;
        }
        Ok(())
    }
}

impl Presentation {
    /// `relations[i]` must have exactly `i` entries with
    /// `relations[i][j] < exponents[j]`; every exponent is at least 2.
    pub fn new(exponents: Vec<u64>, relations: Vec<Vec<u64>>) -> Result<Self> {
        if relations.len() != exponents.len() {
            return Err(Error::InvalidSpec(format!(
                "{} relation rows for {} generators",
                relations.len(),
                exponents.len()
            )));
        }
        let mut order: u64 = 1;
        for (i, (&k, row)) in exponents.iter().zip(&relations).enumerate() {
            if k < 2 {
                return Err(Error::InvalidSpec(format!("k_{} = {k} must be at least 2", i + 1)));
            }
            if row.len() != i {
                return Err(Error::InvalidSpec(format!(
                    "relation row {} has {} entries, expected {i}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &l) in row.iter().enumerate() {
                if l >= exponents[j] {
                    return Err(Error::InvalidSpec(format!(
                        "L[{},{}] = {l} must be below k_{} = {}",
                        i + 1,
                        j + 1,
                        j + 1,
                        exponents[j]
                    )));
                }
            }
            order = order
                .checked_mul(k)
                .ok_or_else(|| Error::InvalidSpec("group order overflows u64".into()))?;
        }
        Ok(Presentation {
            exponents,
            relations,
            order,
        })
    }

    pub fn trivial() -> Self {
        Presentation {
            exponents: Vec::new(),
            relations: Vec::new(),
            order: 1,
        }
    }

    pub fn rank(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn relations(&self) -> &[Vec<u64>] {
        &self.relations
    }

    /// `|Gamma(K, L)| = k_1 ... k_t`.
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn identity(&self) -> Monomial {
        Monomial(vec![0; self.rank()])
    }

    /// The generator `x_i` (0-based index).
    pub fn generator(&self, i: usize) -> Monomial {
        let mut v = vec![0; self.rank()];
        v[i] = 1;
        Monomial(v)
    }

    /// Checks that `exps` is already a reduced monomial of this group.
    pub fn monomial(&self, exps: Vec<u64>) -> Result<Monomial> {
        if exps.len() != self.rank() || exps.iter().zip(&self.exponents).any(|(e, k)| e >= k) {
            return Err(Error::Precondition(format!("{exps:?} is not a reduced monomial")));
        }
        Ok(Monomial(exps))
    }

    /// Reduces an arbitrary (possibly negative) exponent vector.
    pub fn reduce(&self, raw: &[i128]) -> Monomial {
        self.reduce_traced(raw).0
    }

    /// Like [`reduce`](Self::reduce), also returning the largest absolute
    /// intermediate exponent seen during the sweep.
    pub fn reduce_traced(&self, raw: &[i128]) -> (Monomial, u128) {
        assert_eq!(raw.len(), self.rank(), "exponent vector has the wrong length");
        let mut e = raw.to_vec();
        let mut peak = e.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
        for i in (0..self.rank()).rev() {
            let k = self.exponents[i] as i128;
            let (q, r) = (e[i].div_euclid(k), e[i].rem_euclid(k));
            e[i] = r;
            if q == 0 {
                continue;
            }
            for (j, &l) in self.relations[i].iter().enumerate() {
                let carry = q.checked_mul(l as i128).expect("exponent overflow in reduce");
                e[j] = e[j].checked_add(carry).expect("exponent overflow in reduce");
                peak = peak.max(e[j].unsigned_abs());
            }
        }
        (Monomial(e.into_iter().map(|x| x as u64).collect()), peak)
    }

    pub fn multiply(&self, a: &Monomial, b: &Monomial) -> Monomial {
        let raw: Vec<i128> = a.0.iter().zip(&b.0).map(|(&x, &y)| x as i128 + y as i128).collect();
        self.reduce(&raw)
    }

    pub fn inverse(&self, a: &Monomial) -> Monomial {
        let raw: Vec<i128> = a.0.iter().map(|&x| -(x as i128)).collect();
        self.reduce(&raw)
    }

    /// `a^m` for any integer `m`, by square-and-multiply.
    pub fn pow(&self, a: &Monomial, m: i128) -> Monomial {
        let mut acc = self.identity();
        let mut base = if m < 0 { self.inverse(a) } else { a.clone() };
        let mut m = m.unsigned_abs();
        while m > 0 {
            if m & 1 == 1 {
                acc = self.multiply(&acc, &base);
            }
            base = self.multiply(&base, &base);
            m >>= 1;
        }
        acc
    }

    /// Least `d >= 1` with `a^d = 1`, by descent over the prime divisors of
    /// the group order.
    pub fn element_order(&self, a: &Monomial) -> u64 {
        let mut m = self.order;
        for (p, _) in factorize(self.order) {
            while m.is_multiple_of(p) && self.pow(a, (m / p) as i128).is_identity() {
                m /= p;
            }
        }
        m
    }

    /// All elements in mixed-radix order, `x_1` fastest.
    pub fn elements(&self) -> impl Iterator<Item = Monomial> + '_ {
        let ks = self.exponents.clone();
        (0..self.order).map(move |code| Monomial(crate::deterministic::decode_mixed_radix(code, &ks)))
    }

    /// Checks that a generator chain carries exactly this presentation.
    pub fn matches_chain(&self, chain: &GeneratorChain) -> bool {
        self.exponents == chain.exponents && self.relations == chain.relations
    }
}

impl fmt::Display for Presentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ks: Vec<String> = self.exponents.iter().map(|k| k.to_string()).collect();
        write!(f, "K={};", ks.join(","))?;
        for (i, row) in self.relations.iter().enumerate() {
            for (j, l) in row.iter().enumerate() {
                write!(f, " L[{},{}]={}", i + 1, j + 1, l)?;
            }
        }
        Ok(())
    }
}

impl FromStr for Presentation {
    type Err = Error;

    /// Parses `K=4,3,3; L[2,1]=3 L[3,1]=2 L[3,2]=1`. Omitted `L` entries are 0.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse(format!("{msg} in presentation `{}`", s.trim()));
        let s = s.trim();
        let (k_part, l_part) = s.split_once(';').unwrap_or((s, ""));
        let k_body = k_part
            .trim()
            .strip_prefix("K=")
            .ok_or_else(|| bad("missing `K=`"))?;
        let exponents = k_body
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<u64>().map_err(|_| bad("bad exponent")))
            .collect::<Result<Vec<_>>>()?;
        let mut relations: Vec<Vec<u64>> = (0..exponents.len()).map(|i| vec![0; i]).collect();
        for item in l_part.split_whitespace() {
            let rest = item.strip_prefix("L[").ok_or_else(|| bad("expected `L[i,j]=v`"))?;
            let (idx, val) = rest.split_once("]=").ok_or_else(|| bad("expected `L[i,j]=v`"))?;
            let (i, j) = idx.split_once(',').ok_or_else(|| bad("expected `L[i,j]=v`"))?;
            let i: usize = i.trim().parse().map_err(|_| bad("bad row index"))?;
            let j: usize = j.trim().parse().map_err(|_| bad("bad column index"))?;
            let v: u64 = val.trim().parse().map_err(|_| bad("bad relation value"))?;
            if i < 2 || i > exponents.len() || j < 1 || j >= i {
                return Err(bad("relation index out of range"));
            }
            relations[i - 1][j - 1] = v;
        }
        Presentation::new(exponents, relations)
    }
}

/// The isomorphism `Psi(x_1^{j_1} ... x_t^{j_t}) = a_1^{j_1} ... a_t^{j_t}`.
pub fn psi<O: GroupOracle + ?Sized>(
    presentation: &Presentation,
    chain: &GeneratorChain,
    oracle: &mut O,
    a: &Monomial,
) -> Result<Element> {
    if !presentation.matches_chain(chain) {
        return Err(Error::Precondition(
            "presentation does not match the generator chain".into(),
        ));
    }
    if a.0.len() != presentation.rank() {
        return Err(Error::Precondition(format!("monomial {a} has the wrong rank")));
    }
    chain.evaluate(oracle, &a.0)
}

/// `a_1^{l_1} ... a_t^{l_t}` for arbitrary non-negative exponents, computed
/// directly in the oracle group.
pub fn evaluate_unreduced<O: GroupOracle + ?Sized>(
    chain: &GeneratorChain,
    oracle: &mut O,
    exps: &[u64],
) -> Result<Element> {
    let mut acc = chain.identity;
    for (&a, &e) in chain.generators.iter().zip(exps) {
        let p = pow_with_identity(oracle, chain.identity, a, e)?;
        acc = oracle.op(acc, p)?;
    }
    Ok(acc)
}
