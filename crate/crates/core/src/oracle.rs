//! Hidden Abelian groups behind a counted Cayley-table oracle.
//!
//! A [`GroupSpec`] fixes `Z_{m_1} x ... x Z_{m_s}` together with a seeded
//! random relabeling of its elements onto `0..n`. Algorithms never see the
//! tuple structure: they hold opaque [`Element`] labels and talk to a
//! [`GroupOracle`], which counts every product and every element access.
//!
//! Two access models are supported. In the fully specified model (FS) the
//! order is known and any label may be requested. In the partially specified
//! model (PS) the order is hidden, and products may only involve labels the
//! oracle has already handed out.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use bitvec::vec::BitVec;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported group order. Labels are stored as `u32`.
pub const MAX_ORDER: u64 = 1 << 32;

/// Opaque group element label in `0..n`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Element(u64);

impl Element {
    pub const fn new(label: u64) -> Self {
        Element(label)
    }

    pub const fn label(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Fully specified: order known, every element addressable.
    Fs,
    /// Partially specified: order hidden, only observed elements usable.
    Ps,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Fs => "fs",
            Model::Ps => "ps",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fs" => Ok(Model::Fs),
            "ps" => Ok(Model::Ps),
            other => Err(Error::Parse(format!("unknown model `{other}`"))),
        }
    }
}

/// Oracle access counters.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub products: u64,
    pub elements: u64,
}

impl Counters {
    pub fn total(&self) -> u64 {
        self.products + self.elements
    }
}

impl std::ops::Add for Counters {
    type Output = Counters;

    fn add(self, rhs: Counters) -> Counters {
        Counters {
            products: self.products + rhs.products,
            elements: self.elements + rhs.elements,
        }
    }
}

/// A hidden group `Z_{m_1} x ... x Z_{m_s}` with a bijective relabeling.
///
/// Tuples are packed into a mixed-radix index with the first factor least
/// significant; `label_of[index]` and `index_of[label]` realize the
/// bijection. No Cayley table is materialized.
#[derive(Clone)]
pub struct GroupSpec {
    factors: Vec<u64>,
    label_seed: Option<u64>,
    order: u64,
    label_of: Vec<u32>,
    index_of: Vec<u32>,
}

impl fmt::Debug for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupSpec")
            .field("factors", &self.factors)
            .field("label_seed", &self.label_seed)
            .field("order", &self.order)
            .finish()
    }
}

fn checked_order(factors: &[u64]) -> Result<u64> {
    let mut order: u64 = 1;
    for &m in factors {
        if m < 2 {
            return Err(Error::InvalidSpec(format!("factor {m} must be at least 2")));
        }
        order = order
            .checked_mul(m)
            .filter(|&o| o <= MAX_ORDER)
            .ok_or_else(|| Error::InvalidSpec(format!("order exceeds {MAX_ORDER}")))?;
    }
    Ok(order)
}

/// Builds the group `Z_{m_1} x ... x Z_{m_s}` under the relabeling given by a
/// Fisher-Yates shuffle seeded with `label_seed`.
pub fn make_group(factors: &[u64], label_seed: u64) -> Result<GroupSpec> {
    let order = checked_order(factors)?;
    let mut label_of: Vec<u32> = (0..order).map(|i| i as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(label_seed);
    label_of.shuffle(&mut rng);
    let mut index_of = vec![0u32; order as usize];
    for (idx, &label) in label_of.iter().enumerate() {
        index_of[label as usize] = idx as u32;
    }
    Ok(GroupSpec {
        factors: factors.to_vec(),
        label_seed: Some(label_seed),
        order,
        label_of,
        index_of,
    })
}

impl GroupSpec {
    /// Same group with label = mixed-radix tuple index. Handy for tests whose
    /// expected values are written in tuple coordinates.
    pub fn with_identity_labels(factors: &[u64]) -> Result<GroupSpec> {
        let order = checked_order(factors)?;
        let label_of: Vec<u32> = (0..order).map(|i| i as u32).collect();
        Ok(GroupSpec {
            factors: factors.to_vec(),
            label_seed: None,
            order,
            index_of: label_of.clone(),
            label_of,
        })
    }

    pub fn factors(&self) -> &[u64] {
        &self.factors
    }

    pub fn label_seed(&self) -> Option<u64> {
        self.label_seed
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    fn check(&self, a: Element) -> Result<usize> {
        if a.0 < self.order {
            Ok(a.0 as usize)
        } else {
            Err(Error::LabelOutOfRange {
                label: a.0,
                order: self.order,
            })
        }
    }

    /// Group law on labels. Does not touch any counter.
    pub fn product(&self, a: Element, b: Element) -> Result<Element> {
        let mut ia = self.index_of[self.check(a)?] as u64;
        let mut ib = self.index_of[self.check(b)?] as u64;
        let mut out = 0u64;
        let mut stride = 1u64;
        for &m in &self.factors {
            let mut d = ia % m + ib % m;
            if d >= m {
                d -= m;
            }
            out += d * stride;
            stride *= m;
            ia /= m;
            ib /= m;
        }
        Ok(Element(self.label_of[out as usize] as u64))
    }

    pub fn identity_element(&self) -> Element {
        Element(self.label_of[0] as u64)
    }

    /// Tuple coordinates of a label (ground truth, for tests and fixtures).
    pub fn tuple_of(&self, a: Element) -> Result<Vec<u64>> {
        let mut idx = self.index_of[self.check(a)?] as u64;
        Ok(self
            .factors
            .iter()
            .map(|&m| {
                let d = idx % m;
                idx /= m;
                d
            })
            .collect())
    }

    pub fn label_of_tuple(&self, tuple: &[u64]) -> Result<Element> {
        if tuple.len() != self.factors.len() {
            return Err(Error::InvalidSpec(format!(
                "tuple of length {} for {} factors",
                tuple.len(),
                self.factors.len()
            )));
        }
        let mut idx = 0u64;
        let mut stride = 1u64;
        for (&d, &m) in tuple.iter().zip(&self.factors) {
            idx += (d % m) * stride;
            stride *= m;
        }
        Ok(Element(self.label_of[idx as usize] as u64))
    }

    /// Textual form `m1xm2x...xms`, with `1` for the trivial group.
    pub fn spec_string(&self) -> String {
        format_factors(&self.factors)
    }
}

pub fn format_factors(factors: &[u64]) -> String {
    if factors.is_empty() {
        "1".to_string()
    } else {
        factors
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join("x")
    }
}

/// Parses `m1xm2x...xms`. `1` and the empty string denote the trivial group.
pub fn parse_factors(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if s.is_empty() || s == "1" {
        return Ok(Vec::new());
    }
    let factors = s
        .split(['x', 'X'])
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("bad factor `{p}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    checked_order(&factors)?;
    Ok(factors)
}

/// Counted access to a finite Abelian group.
///
/// `random_element` takes a trait-object rng so the trait stays object safe.
pub trait GroupOracle {
    fn model(&self) -> Model;

    /// One Cayley-table lookup. Increments the product counter.
    fn op(&mut self, a: Element, b: Element) -> Result<Element>;

    /// A uniformly random element. Increments the element counter.
    fn random_element(&mut self, rng: &mut dyn RngCore) -> Result<Element>;

    /// The identity. FS only. Increments the element counter.
    fn identity(&mut self) -> Result<Element>;

    /// Requests the element with the given label. FS only. Increments the
    /// element counter.
    fn element_at(&mut self, label: u64) -> Result<Element>;

    /// Group order. FS only.
    fn size(&self) -> Result<u64>;

    fn counters(&self) -> Counters;
}

impl<O: GroupOracle + ?Sized> GroupOracle for &mut O {
    fn model(&self) -> Model {
        (**self).model()
    }
    fn op(&mut self, a: Element, b: Element) -> Result<Element> {
        (**self).op(a, b)
    }
    fn random_element(&mut self, rng: &mut dyn RngCore) -> Result<Element> {
        (**self).random_element(rng)
    }
    fn identity(&mut self) -> Result<Element> {
        (**self).identity()
    }
    fn element_at(&mut self, label: u64) -> Result<Element> {
        (**self).element_at(label)
    }
    fn size(&self) -> Result<u64> {
        (**self).size()
    }
    fn counters(&self) -> Counters {
        (**self).counters()
    }
}

/// The honest oracle backed by a [`GroupSpec`].
#[derive(Debug, Clone)]
pub struct CayleyOracle {
    spec: Arc<GroupSpec>,
    model: Model,
    counters: Counters,
    // PS only: labels handed out so far.
    seen: Option<BitVec>,
}

impl CayleyOracle {
    pub fn new(spec: Arc<GroupSpec>, model: Model) -> Self {
        let seen = match model {
            Model::Fs => None,
            Model::Ps => Some(BitVec::repeat(false, spec.order() as usize)),
        };
        CayleyOracle {
            spec,
            model,
            counters: Counters::default(),
            seen,
        }
    }

    pub fn fs(spec: GroupSpec) -> Self {
        Self::new(Arc::new(spec), Model::Fs)
    }

    pub fn ps(spec: GroupSpec) -> Self {
        Self::new(Arc::new(spec), Model::Ps)
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn shared_spec(&self) -> Arc<GroupSpec> {
        Arc::clone(&self.spec)
    }

    fn observe(&mut self, a: Element) {
        if let Some(seen) = self.seen.as_mut() {
            seen.set(a.0 as usize, true);
        }
    }

    fn require_seen(&self, a: Element) -> Result<()> {
        self.spec.check(a)?;
        match &self.seen {
            Some(seen) if !seen[a.0 as usize] => Err(Error::ModelViolation(format!(
                "label {} has not been observed",
                a.0
            ))),
            _ => Ok(()),
        }
    }

    fn require_fs(&self, what: &str) -> Result<()> {
        match self.model {
            Model::Fs => Ok(()),
            Model::Ps => Err(Error::ModelViolation(format!(
                "{what} is not available in the PS model"
            ))),
        }
    }
}

impl GroupOracle for CayleyOracle {
    fn model(&self) -> Model {
        self.model
    }

    fn op(&mut self, a: Element, b: Element) -> Result<Element> {
        self.require_seen(a)?;
        self.require_seen(b)?;
        let c = self.spec.product(a, b)?;
        self.counters.products += 1;
        self.observe(c);
        Ok(c)
    }

    fn random_element(&mut self, rng: &mut dyn RngCore) -> Result<Element> {
        let a = Element(rng.gen_range(0..self.spec.order()));
        self.counters.elements += 1;
        self.observe(a);
        Ok(a)
    }

    fn identity(&mut self) -> Result<Element> {
        self.require_fs("identity()")?;
        self.counters.elements += 1;
        Ok(self.spec.identity_element())
    }

    fn element_at(&mut self, label: u64) -> Result<Element> {
        self.require_fs("element_at()")?;
        let a = Element(label);
        self.spec.check(a)?;
        self.counters.elements += 1;
        Ok(a)
    }

    fn size(&self) -> Result<u64> {
        self.require_fs("size()")?;
        Ok(self.spec.order())
    }

    fn counters(&self) -> Counters {
        self.counters
    }
}

/// `a` composed with itself `m` times by square-and-multiply, `a^0 = e`.
///
/// `m = 0` asks the oracle for the identity, which needs the FS model; the
/// PS-safe variant is [`pow_with_identity`].
pub fn pow<O: GroupOracle + ?Sized>(oracle: &mut O, a: Element, m: u64) -> Result<Element> {
    if m == 0 {
        return oracle.identity();
    }
    pow_nonzero(oracle, a, m)
}

pub fn pow_with_identity<O: GroupOracle + ?Sized>(
    oracle: &mut O,
    identity: Element,
    a: Element,
    m: u64,
) -> Result<Element> {
    if m == 0 {
        Ok(identity)
    } else {
        pow_nonzero(oracle, a, m)
    }
}

fn pow_nonzero<O: GroupOracle + ?Sized>(oracle: &mut O, a: Element, m: u64) -> Result<Element> {
    debug_assert!(m > 0);
    let top = 63 - m.leading_zeros();
    let mut acc = a;
    for bit in (0..top).rev() {
        acc = oracle.op(acc, acc)?;
        if (m >> bit) & 1 == 1 {
            acc = oracle.op(acc, a)?;
        }
    }
    Ok(acc)
}
