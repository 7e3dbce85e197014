//! Bases and isomorphism tests for black-box abelian groups.
//!
//! A generator chain gives the presentation `Gamma(K, L)`, the Smith normal
//! form of its relation matrix gives a basis of `Gamma`, and the chain maps
//! that basis back into the oracle group. Two groups are isomorphic exactly
//! when their invariant factors agree; matching basis elements of equal
//! order then defines an explicit isomorphism.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::factorize;
use crate::deterministic::{generator_plus, GeneratorChain, RepresentationTable};
use crate::error::{Error, Result};
use crate::monomial::{psi, Monomial, Presentation};
use crate::oracle::{pow_with_identity, Counters, Element, GroupOracle, Model};
use crate::randomized::{find_exponents, random_generators_detailed, SizeEstimate, SubgroupHandle};
use crate::snf::{basis_from_snf, build_relation_matrix, smith_normal_form, SnfResult};

/// Which generator-chain algorithm feeds the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Coset enumeration, `O(n)` accesses, full-size model only.
    Det,
    /// Collision sampling, `O~(sqrt n)` accesses, either model.
    Rand,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Det => "det",
            Mode::Rand => "rand",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "det" => Ok(Mode::Det),
            "rand" => Ok(Mode::Rand),
            other => Err(Error::Parse(format!("unknown mode {other:?}; expected det or rand"))),
        }
    }
}

/// A basis `b_1..b_r` of the oracle group with orders `m_1 | ... | m_r`,
/// plus everything needed to write other elements in it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisResult {
    pub mode: Mode,
    pub delta: f64,
    pub identity: Element,
    pub basis: Vec<Element>,
    pub orders: Vec<u64>,
    /// The basis as monomials of `Gamma(K, L)`.
    pub monomials: Vec<Monomial>,
    pub chain: GeneratorChain,
    pub presentation: Presentation,
    pub snf: SnfResult,
    pub estimate: Option<SizeEstimate>,
    #[serde(skip)]
    pub table: Option<RepresentationTable>,
}

impl BasisResult {
    pub fn invariant_factors(&self) -> &[u64] {
        &self.orders
    }

    pub fn order(&self) -> u64 {
        self.presentation.order()
    }

    /// Prepares coordinate computations against `oracle`.
    pub fn decomposer<O: GroupOracle + ?Sized>(&self, oracle: &mut O) -> Result<Decomposer<'_>> {
        let handle = match self.table {
            Some(_) => None,
            None => Some(SubgroupHandle::from_chain(&self.chain, oracle)?),
        };
        Ok(Decomposer { basis: self, handle })
    }

    /// `b_1^{w_1} ... b_r^{w_r}`.
    pub fn evaluate<O: GroupOracle + ?Sized>(&self, oracle: &mut O, w: &[u64]) -> Result<Element> {
        if w.len() != self.basis.len() {
            return Err(Error::Precondition(format!("{} coordinates for a basis of size {}", w.len(), self.basis.len())));
        }
        let mut x = self.identity;
        for (&b, &e) in self.basis.iter().zip(w) {
            if e != 0 {
                let p = pow_with_identity(oracle, self.identity, b, e)?;
                x = oracle.op(x, p)?;
            }
        }
        Ok(x)
    }
}

/// Writes group elements in a [`BasisResult`]'s basis.
///
/// An element with chain exponents `v` has coordinates `u V` in the Smith
/// basis, where `u` is `v` in relation-matrix column order; coordinate `i`
/// is taken modulo `m_i`.
pub struct Decomposer<'a> {
    basis: &'a BasisResult,
    handle: Option<SubgroupHandle>,
}

impl Decomposer<'_> {
    /// Exponents of `x` over the generator chain.
    pub fn chain_exponents<O: GroupOracle + ?Sized>(
        &mut self,
        oracle: &mut O,
        rng: &mut dyn RngCore,
        x: Element,
    ) -> Result<Vec<u64>> {
        match (&self.basis.table, &mut self.handle) {
            (Some(table), _) => table
                .lambda(x)
                .ok_or_else(|| Error::Precondition(format!("{x} is not in the group"))),
            (None, Some(handle)) => {
                let n = handle.order();
                find_exponents(x, handle, oracle, rng, n, self.basis.delta)
            }
            (None, None) => unreachable!("decomposer without table or handle"),
        }
    }

    pub fn coordinates<O: GroupOracle + ?Sized>(
        &mut self,
        oracle: &mut O,
        rng: &mut dyn RngCore,
        x: Element,
    ) -> Result<Vec<u64>> {
        let v = self.chain_exponents(oracle, rng, x)?;
        let snf = &self.basis.snf;
        let t = v.len();
        let mut out = Vec::with_capacity(self.basis.orders.len());
        for (i, d) in snf.diagonal().iter().enumerate() {
            if *d <= BigInt::from(1) {
                continue;
            }
            let mut w = BigInt::from(0);
            for c in 0..t {
                w += BigInt::from(v[t - 1 - c]) * &snf.v[(c, i)];
            }
            let r = ((w % d) + d) % d;
            out.push(r.to_u64().expect("coordinate below an invariant factor"));
        }
        Ok(out)
    }
}

/// Checks that `b` has order exactly `m` in the oracle group.
pub fn has_order<O: GroupOracle + ?Sized>(oracle: &mut O, identity: Element, b: Element, m: u64) -> Result<bool> {
    if m == 0 {
        return Ok(false);
    }
    if pow_with_identity(oracle, identity, b, m)? != identity {
        return Ok(false);
    }
    for (p, _) in factorize(m) {
        if pow_with_identity(oracle, identity, b, m / p)? == identity {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Basis of the oracle group.
pub fn find_basis<O: GroupOracle + ?Sized>(
    oracle: &mut O,
    rng: &mut dyn RngCore,
    mode: Mode,
    delta: f64,
) -> Result<BasisResult> {
    let (chain, table, estimate) = match mode {
        Mode::Det => {
            if oracle.model() != Model::Fs {
                return Err(Error::Precondition("deterministic mode needs the full-size model".into()));
            }
            let (chain, table) = generator_plus(oracle)?;
            (chain, Some(table), None)
        }
        Mode::Rand => {
            let out = random_generators_detailed(oracle, rng, delta)?;
            (out.chain, None, out.estimate)
        }
    };
    let presentation = chain.presentation()?;
    let snf = smith_normal_form(&build_relation_matrix(&presentation));
    let monomials = basis_from_snf(&presentation, &snf)?;
    let orders = snf.invariant_factors();
    let mut basis = Vec::with_capacity(monomials.len());
    for (y, &m) in monomials.iter().zip(&orders) {
        let b = psi(&presentation, &chain, oracle, y)?;
        if !has_order(oracle, chain.identity, b, m)? {
            let msg = format!("basis element {b} does not have order {m}");
            return Err(match mode {
                Mode::Det => Error::Inconsistent(msg),
                Mode::Rand => Error::RandomizedFailure(msg),
            });
        }
        basis.push(b);
    }
    Ok(BasisResult {
        mode,
        delta,
        identity: chain.identity,
        basis,
        orders,
        monomials,
        chain,
        presentation,
        snf,
        estimate,
        table,
    })
}

/// `b_i^G -> b_i^H`, extended multiplicatively.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsomorphismWitness {
    pub invariant_factors: Vec<u64>,
    pub g: BasisResult,
    pub h: BasisResult,
}

impl IsomorphismWitness {
    pub fn basis_g(&self) -> &[Element] {
        &self.g.basis
    }

    pub fn basis_h(&self) -> &[Element] {
        &self.h.basis
    }

    /// Image of `x` in `H`, computed on demand.
    pub fn map<G: GroupOracle + ?Sized, H: GroupOracle + ?Sized>(
        &self,
        dec: &mut Decomposer<'_>,
        oracle_g: &mut G,
        oracle_h: &mut H,
        rng: &mut dyn RngCore,
        x: Element,
    ) -> Result<Element> {
        let w = dec.coordinates(oracle_g, rng, x)?;
        self.h.evaluate(oracle_h, &w)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsomorphismReport {
    pub isomorphic: bool,
    pub invariant_factors_g: Option<Vec<u64>>,
    pub invariant_factors_h: Option<Vec<u64>>,
    /// Set when one pipeline was abandoned because it outgrew the other.
    pub halted: bool,
    pub witness: Option<IsomorphismWitness>,
}

/// Oracle wrapper that fails with [`Error::BudgetExceeded`] once `cap`
/// accesses have been made through it.
pub struct BudgetedOracle<'a, O: GroupOracle + ?Sized> {
    inner: &'a mut O,
    start: u64,
    cap: u64,
}

impl<'a, O: GroupOracle + ?Sized> BudgetedOracle<'a, O> {
    pub fn new(inner: &'a mut O, cap: u64) -> Self {
        let start = inner.counters().total();
        BudgetedOracle { inner, start, cap }
    }

    pub fn used(&self) -> u64 {
        self.inner.counters().total() - self.start
    }

    fn charge(&self) -> Result<()> {
        if self.used() >= self.cap {
            Err(Error::BudgetExceeded(self.cap))
        } else {
            Ok(())
        }
    }
}

impl<O: GroupOracle + ?Sized> GroupOracle for BudgetedOracle<'_, O> {
    fn model(&self) -> Model {
        self.inner.model()
    }

    fn op(&mut self, a: Element, b: Element) -> Result<Element> {
        self.charge()?;
        self.inner.op(a, b)
    }

    fn random_element(&mut self, rng: &mut dyn RngCore) -> Result<Element> {
        self.charge()?;
        self.inner.random_element(rng)
    }

    fn identity(&mut self) -> Result<Element> {
        self.charge()?;
        self.inner.identity()
    }

    fn element_at(&mut self, label: u64) -> Result<Element> {
        self.charge()?;
        self.inner.element_at(label)
    }

    fn size(&self) -> Result<u64> {
        self.inner.size()
    }

    fn counters(&self) -> Counters {
        self.inner.counters()
    }
}

/// Smallest cap used by the interleaved runs.
const INITIAL_CAP: u64 = 1024;

/// A pipeline is abandoned once it has used this many times the accesses
/// of a completed one.
const HALT_FACTOR: u64 = 16;

fn compare(g: BasisResult, h: BasisResult) -> IsomorphismReport {
    let isomorphic = g.orders == h.orders;
    IsomorphismReport {
        isomorphic,
        invariant_factors_g: Some(g.orders.clone()),
        invariant_factors_h: Some(h.orders.clone()),
        halted: false,
        witness: isomorphic.then(|| IsomorphismWitness {
            invariant_factors: g.orders.clone(),
            g,
            h,
        }),
    }
}

fn budgeted_basis<O: GroupOracle + ?Sized>(
    oracle: &mut O,
    seed: u64,
    cap: u64,
    mode: Mode,
    delta: f64,
) -> Result<Option<(BasisResult, u64)>> {
    let mut b = BudgetedOracle::new(oracle, cap);
    match find_basis(&mut b, &mut ChaCha8Rng::seed_from_u64(seed), mode, delta) {
        Ok(r) => Ok(Some((r, b.used()))),
        Err(Error::BudgetExceeded(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Decides whether two oracle groups are isomorphic and, if so, produces a
/// witness.
///
/// With known sizes, unequal orders answer `false` before any sampling.
/// Without them both pipelines run under a common access cap that doubles
/// until each finishes; once one finishes, the other is abandoned (answer
/// `false`) if it outgrows the finished one by a constant factor, since
/// groups of comparable size need comparable work.
pub fn is_isomorphic<G: GroupOracle + ?Sized, H: GroupOracle + ?Sized>(
    oracle_g: &mut G,
    oracle_h: &mut H,
    rng: &mut dyn RngCore,
    mode: Mode,
    delta: f64,
) -> Result<IsomorphismReport> {
    let known = oracle_g.model() == Model::Fs && oracle_h.model() == Model::Fs;
    if known {
        if oracle_g.size()? != oracle_h.size()? {
            return Ok(IsomorphismReport {
                isomorphic: false,
                invariant_factors_g: None,
                invariant_factors_h: None,
                halted: false,
                witness: None,
            });
        }
        let g = find_basis(oracle_g, rng, mode, delta)?;
        let h = find_basis(oracle_h, rng, mode, delta)?;
        return Ok(compare(g, h));
    }

    let (seed_g, seed_h) = (rng.next_u64(), rng.next_u64());
    let mut done_g: Option<(BasisResult, u64)> = None;
    let mut done_h: Option<(BasisResult, u64)> = None;
    let mut cap = INITIAL_CAP;
    loop {
        if done_g.is_none() {
            done_g = budgeted_basis(oracle_g, seed_g, cap, mode, delta)?;
        }
        if done_h.is_none() {
            done_h = budgeted_basis(oracle_h, seed_h, cap, mode, delta)?;
        }
        let finished = match (&done_g, &done_h) {
            (Some(_), Some(_)) => break,
            (Some((_, c)), None) | (None, Some((_, c))) => Some(*c),
            (None, None) => None,
        };
        match finished {
            Some(c) => {
                let limit = (HALT_FACTOR * c).max(INITIAL_CAP);
                if cap >= limit {
                    let (g, h) = (done_g.map(|x| x.0.orders), done_h.map(|x| x.0.orders));
                    return Ok(IsomorphismReport {
                        isomorphic: false,
                        invariant_factors_g: g,
                        invariant_factors_h: h,
                        halted: true,
                        witness: None,
                    });
                }
                cap = limit;
            }
            None => cap = cap.saturating_mul(2),
        }
    }
    Ok(compare(done_g.unwrap().0, done_h.unwrap().0))
}

/// Checks a witness against both oracles: basis orders, the homomorphism
/// law on `samples` random pairs and, for groups of order at most 256 with
/// known size, injectivity on every element. Any error counts as failure.
pub fn verify_witness<G: GroupOracle + ?Sized, H: GroupOracle + ?Sized>(
    witness: &IsomorphismWitness,
    oracle_g: &mut G,
    oracle_h: &mut H,
    samples: usize,
    rng: &mut dyn RngCore,
) -> bool {
    verify_inner(witness, oracle_g, oracle_h, samples, rng).unwrap_or(false)
}

/// Largest order checked exhaustively by [`verify_witness`].
pub const EXHAUSTIVE_LIMIT: u64 = 256;

fn verify_inner<G: GroupOracle + ?Sized, H: GroupOracle + ?Sized>(
    w: &IsomorphismWitness,
    og: &mut G,
    oh: &mut H,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<bool> {
    let m = &w.invariant_factors;
    if &w.g.orders != m || &w.h.orders != m || w.g.basis.len() != m.len() || w.h.basis.len() != m.len() {
        return Ok(false);
    }
    for (i, &mi) in m.iter().enumerate() {
        if !has_order(og, w.g.identity, w.g.basis[i], mi)? || !has_order(oh, w.h.identity, w.h.basis[i], mi)? {
            return Ok(false);
        }
    }
    let mut dec = w.g.decomposer(og)?;
    for _ in 0..samples {
        let x = og.random_element(rng)?;
        let y = og.random_element(rng)?;
        let xy = og.op(x, y)?;
        let fx = w.map(&mut dec, og, oh, rng, x)?;
        let fy = w.map(&mut dec, og, oh, rng, y)?;
        if w.map(&mut dec, og, oh, rng, xy)? != oh.op(fx, fy)? {
            return Ok(false);
        }
    }
    if og.model() == Model::Fs && oh.model() == Model::Fs {
        let n = og.size()?;
        if n != oh.size()? {
            return Ok(false);
        }
        if n <= EXHAUSTIVE_LIMIT {
            let mut images = HashSet::new();
            for label in 0..n {
                let x = og.element_at(label)?;
                if !images.insert(w.map(&mut dec, og, oh, rng, x)?) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_group, CayleyOracle};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn oracle(factors: &[u64], seed: u64, model: Model) -> CayleyOracle {
        CayleyOracle::new(make_group(factors, seed).unwrap().into(), model)
    }

    /// Every exponent tuple over the basis, evaluated, hits each element once.
    fn basis_enumerates_group(o: &mut CayleyOracle, b: &BasisResult) {
        let n = o.spec().order();
        let total: u64 = b.orders.iter().product();
        assert_eq!(total, n);
        let mut seen = HashSet::new();
        for code in 0..total {
            let w = crate::deterministic::decode_mixed_radix(code, &b.orders);
            assert!(seen.insert(b.evaluate(o, &w).unwrap()));
        }
        assert_eq!(seen.len() as u64, n);
    }

    #[test]
    fn basis_examples() {
        for mode in [Mode::Det, Mode::Rand] {
            let mut o = oracle(&[12], 3, Model::Fs);
            let b = find_basis(&mut o, &mut rng(1), mode, 0.01).unwrap();
            assert_eq!(b.orders, vec![12]);
            basis_enumerates_group(&mut o, &b);

            let mut o = oracle(&[2, 4], 4, Model::Fs);
            let b = find_basis(&mut o, &mut rng(2), mode, 0.01).unwrap();
            assert_eq!(b.orders, vec![2, 4]);
            basis_enumerates_group(&mut o, &b);

            let mut o = oracle(&[], 4, Model::Fs);
            assert!(find_basis(&mut o, &mut rng(3), mode, 0.01).unwrap().basis.is_empty());
        }
    }

    #[test]
    fn canonical_forms_merge_coprime_factors() {
        let mut o = oracle(&[4, 3, 3], 5, Model::Fs);
        let b = find_basis(&mut o, &mut rng(4), Mode::Det, 0.01).unwrap();
        assert_eq!(b.orders, vec![3, 12]);
        basis_enumerates_group(&mut o, &b);
    }

    #[test]
    fn det_mode_needs_full_size() {
        let mut o = oracle(&[4], 1, Model::Ps);
        assert!(matches!(
            find_basis(&mut o, &mut rng(0), Mode::Det, 0.01),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn decomposition_round_trips() {
        for mode in [Mode::Det, Mode::Rand] {
            let mut o = oracle(&[2, 6, 12], 8, Model::Fs);
            let mut r = rng(5);
            let b = find_basis(&mut o, &mut r, mode, 0.01).unwrap();
            let mut dec = b.decomposer(&mut o).unwrap();
            for label in 0..o.spec().order() {
                let x = Element::new(label);
                let w = dec.coordinates(&mut o, &mut r, x).unwrap();
                assert_eq!(b.evaluate(&mut o, &w).unwrap(), x);
            }
        }
    }

    #[test]
    fn isomorphism_examples() {
        for (model, mode) in [(Model::Fs, Mode::Det), (Model::Fs, Mode::Rand), (Model::Ps, Mode::Rand)] {
            let mut r = rng(6);
            let mut g = oracle(&[4], 1, model);
            let mut h = oracle(&[2, 2], 2, model);
            assert!(!is_isomorphic(&mut g, &mut h, &mut r, mode, 0.01).unwrap().isomorphic);

            let mut g = oracle(&[6], 1, model);
            let mut h = oracle(&[2, 3], 2, model);
            let rep = is_isomorphic(&mut g, &mut h, &mut r, mode, 0.01).unwrap();
            assert!(rep.isomorphic);
            let w = rep.witness.unwrap();
            assert!(verify_witness(&w, &mut g, &mut h, 20, &mut r));

            let mut g = oracle(&[4, 4], 1, model);
            let mut h = oracle(&[4, 2, 2], 2, model);
            assert!(!is_isomorphic(&mut g, &mut h, &mut r, mode, 0.01).unwrap().isomorphic);

            let mut g = oracle(&[], 1, model);
            let mut h = oracle(&[], 2, model);
            let rep = is_isomorphic(&mut g, &mut h, &mut r, mode, 0.01).unwrap();
            assert!(rep.isomorphic);
            assert!(verify_witness(&rep.witness.unwrap(), &mut g, &mut h, 5, &mut r));
        }
    }

    #[test]
    fn size_mismatch_short_circuits() {
        let mut g = oracle(&[4], 1, Model::Fs);
        let mut h = oracle(&[8], 1, Model::Fs);
        let rep = is_isomorphic(&mut g, &mut h, &mut rng(7), Mode::Rand, 0.01).unwrap();
        assert!(!rep.isomorphic);
        assert_eq!(g.counters().total() + h.counters().total(), 0);
    }

    #[test]
    fn partial_model_halts_on_lopsided_sizes() {
        let mut g = oracle(&[2], 1, Model::Ps);
        let mut h = oracle(&[2; 16], 1, Model::Ps);
        let rep = is_isomorphic(&mut g, &mut h, &mut rng(8), Mode::Rand, 0.01).unwrap();
        assert!(!rep.isomorphic);
        assert!(rep.halted);
        assert_eq!(rep.invariant_factors_g, Some(vec![2]));
        assert_eq!(rep.invariant_factors_h, None);
    }

    #[test]
    fn corrupted_witness_is_rejected() {
        let mut r = rng(9);
        let mut g = oracle(&[2, 4], 1, Model::Fs);
        let mut h = oracle(&[4, 2], 2, Model::Fs);
        let mut w = is_isomorphic(&mut g, &mut h, &mut r, Mode::Det, 0.01).unwrap().witness.unwrap();
        assert!(verify_witness(&w, &mut g, &mut h, 20, &mut r));
        w.h.basis.swap(0, 1);
        assert!(!verify_witness(&w, &mut g, &mut h, 20, &mut r));
    }

    #[test]
    fn z6_witness_passes_full_enumeration() {
        let mut r = rng(10);
        let mut g = oracle(&[6], 3, Model::Fs);
        let mut h = oracle(&[2, 3], 4, Model::Fs);
        let w = is_isomorphic(&mut g, &mut h, &mut r, Mode::Det, 0.01).unwrap().witness.unwrap();
        let mut dec = w.g.decomposer(&mut g).unwrap();
        for x in 0..6 {
            for y in 0..6 {
                let (x, y) = (Element::new(x), Element::new(y));
                let xy = g.op(x, y).unwrap();
                let fx = w.map(&mut dec, &mut g, &mut h, &mut r, x).unwrap();
                let fy = w.map(&mut dec, &mut g, &mut h, &mut r, y).unwrap();
                assert_eq!(w.map(&mut dec, &mut g, &mut h, &mut r, xy).unwrap(), h.op(fx, fy).unwrap());
            }
        }
        assert!(verify_witness(&w, &mut g, &mut h, 0, &mut r));
    }
}
