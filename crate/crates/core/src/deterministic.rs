//! Deterministic generator chains by explicit coset enumeration.
//!
//! Starting from `G_0 = {e}`, each round picks the smallest label outside
//! `G_{i-1}`, walks its powers until one lands back in `G_{i-1}` (that gives
//! `k_i` and, through the representation table, the relation row), then
//! writes out the cosets `a_i^j G_{i-1}` for `0 < j < k_i`. Every element of
//! the group is produced by exactly one product, so the whole run costs
//! `O(n)` oracle accesses.

use bitvec::vec::BitVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monomial::Presentation;
use crate::oracle::{pow_with_identity, Element, GroupOracle};

/// Generators `a_1..a_t` with relative orders `k_i` and triangular relations
/// `a_i^{k_i} = a_1^{l[i][0]} ... a_{i-1}^{l[i][i-1]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorChain {
    pub identity: Element,
    #[serde(rename = "A")]
    pub generators: Vec<Element>,
    #[serde(rename = "K")]
    pub exponents: Vec<u64>,
    /// Row `i` has exactly `i` entries, with `relations[i][j] < exponents[j]`.
    #[serde(rename = "L")]
    pub relations: Vec<Vec<u64>>,
}

impl GeneratorChain {
    pub fn empty(identity: Element) -> Self {
        GeneratorChain {
            identity,
            generators: Vec::new(),
            exponents: Vec::new(),
            relations: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// `k_1 * ... * k_t`, the order of the generated group.
    pub fn order(&self) -> u128 {
        self.exponents.iter().map(|&k| k as u128).product()
    }

    pub fn presentation(&self) -> Result<Presentation> {
        Presentation::new(self.exponents.clone(), self.relations.clone())
    }

    /// `a_1^{e_1} ... a_r^{e_r}` for the first `exps.len()` generators.
    pub fn evaluate<O: GroupOracle + ?Sized>(&self, oracle: &mut O, exps: &[u64]) -> Result<Element> {
        if exps.len() > self.len() {
            return Err(Error::Precondition(format!(
                "{} exponents for a chain of length {}",
                exps.len(),
                self.len()
            )));
        }
        let mut acc: Option<Element> = None;
        for (&a, &e) in self.generators.iter().zip(exps) {
            if e == 0 {
                continue;
            }
            let p = pow_with_identity(oracle, self.identity, a, e)?;
            acc = Some(match acc {
                None => p,
                Some(x) => oracle.op(x, p)?,
            });
        }
        Ok(acc.unwrap_or(self.identity))
    }

    /// Re-checks every relation `a_i^{k_i} = a_1^{l_{i,1}} ... a_{i-1}^{l_{i,i-1}}`
    /// against the oracle.
    pub fn verify_relations<O: GroupOracle + ?Sized>(&self, oracle: &mut O) -> Result<()> {
        for i in 0..self.len() {
            let lhs = pow_with_identity(oracle, self.identity, self.generators[i], self.exponents[i])?;
            let rhs = self.evaluate(oracle, &self.relations[i])?;
            if lhs != rhs {
                return Err(Error::Inconsistent(format!("relation {} does not hold", i + 1)));
            }
        }
        Ok(())
    }
}

/// Generators with relative orders but no relations (the output of
/// [`generators`]).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generators {
    #[serde(rename = "A")]
    pub elements: Vec<Element>,
    #[serde(rename = "K")]
    pub exponents: Vec<u64>,
}

/// Membership bitmap over the labels `0..n`.
#[derive(Clone, Debug)]
pub struct ElementSet {
    bits: BitVec,
    len: usize,
}

impl ElementSet {
    pub fn new(order: u64) -> Self {
        ElementSet {
            bits: BitVec::repeat(false, order as usize),
            len: 0,
        }
    }

    pub fn from_labels(order: u64, labels: impl IntoIterator<Item = Element>) -> Self {
        let mut s = Self::new(order);
        for a in labels {
            s.insert(a);
        }
        s
    }

    pub fn contains(&self, a: Element) -> bool {
        self.bits.get(a.label() as usize).is_some_and(|b| *b)
    }

    /// Returns `false` if the element was already present.
    pub fn insert(&mut self, a: Element) -> bool {
        let i = a.label() as usize;
        if self.bits[i] {
            return false;
        }
        self.bits.set(i, true);
        self.len += 1;
        true
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.bits.len()
    }

    fn first_absent(&self) -> Option<u64> {
        self.bits.first_zero().map(|i| i as u64)
    }
}

/// The smallest label not in `set`, requested through the oracle.
pub fn choose_outside_det<O: GroupOracle + ?Sized>(set: &ElementSet, oracle: &mut O) -> Result<Element> {
    let label = set.first_absent().ok_or(Error::NoElement)?;
    oracle.element_at(label)
}

/// For every element, its exponent vector over the chain, stored as one
/// mixed-radix code `sum_i lambda_i * (k_1 ... k_{i-1})`.
#[derive(Clone, Debug)]
pub struct RepresentationTable {
    exponents: Vec<u64>,
    code_of: Vec<u64>,
    by_code: Vec<Element>,
}

impl RepresentationTable {
    pub fn len(&self) -> usize {
        self.by_code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_code.is_empty()
    }

    pub fn code(&self, a: Element) -> Option<u64> {
        self.code_of.get(a.label() as usize).copied().filter(|&c| c != u64::MAX)
    }

    /// `lambda(a) = (lambda_1(a), ..., lambda_t(a))`.
    pub fn lambda(&self, a: Element) -> Option<Vec<u64>> {
        self.code(a).map(|c| decode_mixed_radix(c, &self.exponents))
    }

    /// Inverse lookup: the element whose exponent vector is `exps`.
    pub fn element(&self, exps: &[u64]) -> Option<Element> {
        if exps.len() != self.exponents.len() || exps.iter().zip(&self.exponents).any(|(e, k)| e >= k) {
            return None;
        }
        let code = encode_mixed_radix(exps, &self.exponents);
        self.by_code.get(code as usize).copied()
    }

    /// Elements in code order.
    pub fn elements(&self) -> &[Element] {
        &self.by_code
    }
}

/// Digits of `code`, least significant first; digit `i` lies in
/// `[0, radices[i])`.
pub fn decode_mixed_radix(mut code: u64, radices: &[u64]) -> Vec<u64> {
    radices
        .iter()
        .map(|&k| {
            let d = code % k;
            code /= k;
            d
        })
        .collect()
}

/// Inverse of [`decode_mixed_radix`].
pub fn encode_mixed_radix(digits: &[u64], radices: &[u64]) -> u64 {
    let mut code = 0u64;
    let mut stride = 1u64;
    for (&d, &k) in digits.iter().zip(radices) {
        code += d * stride;
        stride *= k;
    }
    code
}

struct Enumeration {
    chain: GeneratorChain,
    table: RepresentationTable,
}

fn enumerate_chain<O: GroupOracle + ?Sized>(oracle: &mut O) -> Result<Enumeration> {
    let n = oracle.size()?;
    let e = oracle.identity()?;
    let mut set = ElementSet::new(n);
    let mut code_of = vec![u64::MAX; n as usize];
    let mut members = Vec::with_capacity(n as usize);
    set.insert(e);
    code_of[e.label() as usize] = 0;
    members.push(e);

    let mut chain = GeneratorChain::empty(e);
    while (members.len() as u64) < n {
        let a = choose_outside_det(&set, oracle)?;
        // Linear scan for the least k with a^k in G_{i-1}.
        let mut powers = vec![a];
        let mut x = a;
        while !set.contains(x) {
            x = oracle.op(x, a)?;
            powers.push(x);
        }
        let k = powers.len() as u64;
        let size = members.len() as u64;
        if !(n / size).is_multiple_of(k) {
            return Err(Error::Inconsistent(format!(
                "relative order {k} does not divide {}",
                n / size
            )));
        }
        let row = decode_mixed_radix(code_of[x.label() as usize], &chain.exponents);

        for j in 1..k {
            let p = powers[(j - 1) as usize];
            for idx in 0..size {
                let b = members[idx as usize];
                let c = if idx == 0 { p } else { oracle.op(p, b)? };
                if !set.insert(c) {
                    return Err(Error::Inconsistent(format!(
                        "element {c} generated twice; cosets are not disjoint"
                    )));
                }
                code_of[c.label() as usize] = idx + j * size;
                members.push(c);
            }
        }
        chain.generators.push(a);
        chain.exponents.push(k);
        chain.relations.push(row);
    }

    Ok(Enumeration {
        table: RepresentationTable {
            exponents: chain.exponents.clone(),
            code_of,
            by_code: members,
        },
        chain,
    })
}

/// Generators of size at most `log2 |G|` with their relative orders.
pub fn generators<O: GroupOracle + ?Sized>(oracle: &mut O) -> Result<Generators> {
    let Enumeration { chain, .. } = enumerate_chain(oracle)?;
    Ok(Generators {
        elements: chain.generators,
        exponents: chain.exponents,
    })
}

/// Full chain `(A, K, L)` plus the representation of every element.
pub fn generator_plus<O: GroupOracle + ?Sized>(oracle: &mut O) -> Result<(GeneratorChain, RepresentationTable)> {
    let Enumeration { chain, table } = enumerate_chain(oracle)?;
    Ok((chain, table))
}
