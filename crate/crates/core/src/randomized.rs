//! Randomized generator chains with `O~(sqrt n)` oracle accesses.
//!
//! The subgroup built so far is never enumerated. It is kept as a chain
//! prefix ([`SubgroupHandle`]) from which exact uniform samples are cheap, and
//! every question about it (membership, relative order, exponents of an
//! element) is answered by a birthday collision between a fixed set of known
//! elements of the subgroup and a stream of uniform samples.
//!
//! All collision tests are one-sided: an answer of "member" always comes
//! with an explicit certificate, so only "not a member" can be wrong, and
//! then only with probability at most the `delta` passed in.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::arith::factorize;
use crate::deterministic::{decode_mixed_radix, GeneratorChain};
use crate::error::{Error, Result};
use crate::monomial::Presentation;
use crate::oracle::{pow_with_identity, Element, GroupOracle, Model};

/// Upper bound on the number of subgroup elements kept in the lookup table.
const ENUMERATION_CAP: u64 = 1 << 22;

/// Hard cap on the number of draws made by [`estimate_size`].
pub const ESTIMATE_SAMPLE_CAP: u64 = 1_000_000_000;

/// Number of fresh samples used to confirm a computed identity.
pub const IDENTITY_CHECKS: usize = 16;

/// Iterations of the first phase of [`estimate_size`].
pub const ESTIMATE_ROUNDS: u64 = 6;

/// Chain prefix `a_1..a_r` describing `G_r = <a_1, ..., a_r>`.
///
/// Besides the chain itself the handle caches the squarings `a_i^(2^b)` and
/// the first few elements of `G_r` in mixed-radix order (`a_1` fastest),
/// keyed by their codes. Appending a generator keeps existing codes valid,
/// because the new digit is the most significant one.
#[derive(Clone, Debug)]
pub struct SubgroupHandle {
    identity: Element,
    generators: Vec<Element>,
    exponents: Vec<u64>,
    relations: Vec<Vec<u64>>,
    squarings: Vec<Vec<Element>>,
    /// `place[i] = k_1 * ... * k_i`.
    place: Vec<u64>,
    enumerated: Vec<Element>,
    index: HashMap<Element, u64>,
}

impl SubgroupHandle {
    /// The trivial subgroup `{e}`.
    pub fn new(identity: Element) -> Self {
        SubgroupHandle {
            identity,
            generators: Vec::new(),
            exponents: Vec::new(),
            relations: Vec::new(),
            squarings: Vec::new(),
            place: vec![1],
            enumerated: vec![identity],
            index: HashMap::from([(identity, 0)]),
        }
    }

    pub fn from_chain<O: GroupOracle + ?Sized>(chain: &GeneratorChain, oracle: &mut O) -> Result<Self> {
        let mut h = SubgroupHandle::new(chain.identity);
        for i in 0..chain.len() {
            h.push(oracle, chain.generators[i], chain.exponents[i], chain.relations[i].clone())?;
        }
        Ok(h)
    }

    /// Appends `a` with relative order `k` and relation row `lambda`
    /// (`a^k = a_1^{lambda_1} ... a_r^{lambda_r}`). The relation is trusted.
    pub fn push<O: GroupOracle + ?Sized>(&mut self, oracle: &mut O, a: Element, k: u64, lambda: Vec<u64>) -> Result<()> {
        if k < 2 {
            return Err(Error::Precondition(format!("relative order {k} is below 2")));
        }
        if lambda.len() != self.len() || lambda.iter().zip(&self.exponents).any(|(l, k)| l >= k) {
            return Err(Error::Precondition(format!("relation row {lambda:?} is not reduced")));
        }
        let order = self
            .order()
            .checked_mul(k)
            .ok_or_else(|| Error::Inconsistent("subgroup order overflows u64".into()))?;
        let bits = 64 - (k - 1).leading_zeros();
        let mut sq = vec![a];
        for _ in 1..bits {
            let last = *sq.last().unwrap();
            sq.push(oracle.op(last, last)?);
        }
        self.generators.push(a);
        self.exponents.push(k);
        self.relations.push(lambda);
        self.squarings.push(sq);
        self.place.push(order);
        Ok(())
    }

    pub fn identity(&self) -> Element {
        self.identity
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// `|G_r| = k_1 * ... * k_r`.
    pub fn order(&self) -> u64 {
        *self.place.last().unwrap()
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn presentation(&self) -> Presentation {
        Presentation::new(self.exponents.clone(), self.relations.clone())
            .expect("handle rows are validated on push")
    }

    pub fn to_chain(&self) -> GeneratorChain {
        GeneratorChain {
            identity: self.identity,
            generators: self.generators.clone(),
            exponents: self.exponents.clone(),
            relations: self.relations.clone(),
        }
    }

    /// Number of subgroup elements currently held in the lookup table.
    pub fn known_elements(&self) -> usize {
        self.enumerated.len()
    }

    /// Mixed-radix code of `a`, if `a` is among the known elements.
    pub fn known_code(&self, a: Element) -> Option<u64> {
        self.index.get(&a).copied()
    }

    /// `x * a_i^d` from the cached squarings.
    fn mul_power<O: GroupOracle + ?Sized>(&self, oracle: &mut O, mut x: Element, i: usize, d: u64) -> Result<Element> {
        for (b, &s) in self.squarings[i].iter().enumerate() {
            if (d >> b) & 1 == 1 {
                x = oracle.op(x, s)?;
            }
        }
        Ok(x)
    }

    /// `a_1^{e_1} ... a_r^{e_r}`; exponents must be reduced.
    pub fn evaluate<O: GroupOracle + ?Sized>(&self, oracle: &mut O, exps: &[u64]) -> Result<Element> {
        if exps.len() != self.len() || exps.iter().zip(&self.exponents).any(|(e, k)| e >= k) {
            return Err(Error::Precondition(format!("{exps:?} is not a reduced exponent vector")));
        }
        let mut x = self.identity;
        for (i, &d) in exps.iter().enumerate() {
            x = self.mul_power(oracle, x, i, d)?;
        }
        Ok(x)
    }

    /// Grows the lookup table to `min(target, |G_r|)` elements. Each new
    /// element costs one product: if `i` is the lowest nonzero digit of code
    /// `c`, then `element(c) = element(c - place[i]) * a_i`.
    fn extend_enumeration<O: GroupOracle + ?Sized>(&mut self, oracle: &mut O, target: u64) -> Result<()> {
        let target = target.min(self.order()).min(ENUMERATION_CAP);
        while (self.enumerated.len() as u64) < target {
            let c = self.enumerated.len() as u64;
            let i = (0..self.len())
                .find(|&i| !(c / self.place[i]).is_multiple_of(self.exponents[i]))
                .expect("nonzero code has a nonzero digit");
            let x = oracle.op(self.enumerated[(c - self.place[i]) as usize], self.generators[i])?;
            if self.index.insert(x, c).is_some() {
                return Err(Error::RandomizedFailure(format!(
                    "element {x} has two codes; the chain is not a unique representation"
                )));
            }
            self.enumerated.push(x);
        }
        Ok(())
    }

    /// Uniform element of `G_r` with its code. Low digits covered by the
    /// lookup table cost nothing; each remaining digit costs its popcount.
    fn sample_code<O: GroupOracle + ?Sized>(&self, oracle: &mut O, rng: &mut dyn RngCore) -> Result<(Element, u64)> {
        let code = rng.gen_range(0..self.order());
        if let Some(&x) = self.enumerated.get(code as usize) {
            return Ok((x, code));
        }
        let known = self.enumerated.len() as u64;
        let j = self.place.iter().rposition(|&p| p <= known).unwrap();
        let mut x = self.enumerated[(code % self.place[j]) as usize];
        for i in j..self.len() {
            let d = (code / self.place[i]) % self.exponents[i];
            x = self.mul_power(oracle, x, i, d)?;
        }
        Ok((x, code))
    }
}

/// Exactly uniform element of the subgroup together with the exponent
/// vector that produced it.
pub fn sample_subgroup<O: GroupOracle + ?Sized>(
    handle: &SubgroupHandle,
    oracle: &mut O,
    rng: &mut dyn RngCore,
) -> Result<(Element, Vec<u64>)> {
    let (x, code) = handle.sample_code(oracle, rng)?;
    Ok((x, decode_mixed_radix(code, &handle.exponents)))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("delta = {delta} is not in (0, 1)")))
    }
}

/// Sizes of the two sides of a collision search in a subgroup of order `h`:
/// `s1` known elements against `s2` uniform samples with
/// `s1 * s2 >= 2 h ln(2/delta)`. A miss then has probability below
/// `exp(-s1 s2 / h) <= (delta/2)^2`. Known elements are reused across calls
/// while samples are not, so `s1` is taken larger than `s2` by roughly the
/// square root of the per-sample cost.
fn collision_plan<O: GroupOracle + ?Sized>(
    handle: &mut SubgroupHandle,
    oracle: &mut O,
    budget_n: u64,
    delta: f64,
) -> Result<u64> {
    check_delta(delta)?;
    let h = handle.order();
    if budget_n < h {
        return Err(Error::Precondition(format!("budget {budget_n} is below the subgroup order {h}")));
    }
    let s_sq = 2.0 * h as f64 * (2.0 / delta).ln();
    let sample_cost = 1.0 + ((h as f64).log2() - 0.5 * s_sq.log2()).max(0.0) / 2.0;
    let s1 = (s_sq * sample_cost).sqrt().ceil() as u64;
    handle.extend_enumeration(oracle, s1)?;
    let known = handle.enumerated.len() as u64;
    if known >= h {
        return Ok(0);
    }
    Ok((s_sq / known as f64).ceil() as u64)
}

/// Searches for `a * y` (`y` uniform in `H`) among the known elements of `H`.
/// Returns the code of the hit and the code of `y`.
fn collide<O: GroupOracle + ?Sized>(
    a: Element,
    handle: &SubgroupHandle,
    oracle: &mut O,
    rng: &mut dyn RngCore,
    samples: u64,
) -> Result<Option<(u64, u64)>> {
    for _ in 0..samples {
        let (y, y_code) = handle.sample_code(oracle, rng)?;
        let z = oracle.op(a, y)?;
        if let Some(&x_code) = handle.index.get(&z) {
            return Ok(Some((x_code, y_code)));
        }
    }
    Ok(None)
}

/// Decides `a in H`. A `true` answer is always correct; for `a in H` the
/// answer is `false` with probability at most `delta`.
pub fn membership_test<O: GroupOracle + ?Sized>(
    a: Element,
    handle: &mut SubgroupHandle,
    oracle: &mut O,
    rng: &mut dyn RngCore,
    budget_n: u64,
    delta: f64,
) -> Result<bool> {
    if a == handle.identity || handle.index.contains_key(&a) {
        return Ok(true);
    }
    let samples = collision_plan(handle, oracle, budget_n, delta)?;
    if handle.index.contains_key(&a) {
        return Ok(true);
    }
    Ok(collide(a, handle, oracle, rng, samples)?.is_some())
}

/// Draws uniform elements of `G` until one tests outside `H`. Needs
/// `H != G`; otherwise (or on a run of bad luck of probability below
/// `delta`) reports a randomized failure.
pub fn find_outside<O: GroupOracle + ?Sized>(
    handle: &mut SubgroupHandle,
    oracle: &mut O,
    rng: &mut dyn RngCore,
    budget_n: u64,
    delta: f64,
) -> Result<Element> {
    check_delta(delta)?;
    // Each draw lands outside a proper subgroup with probability >= 1/2.
    let draws = (2.0 / delta).log2().ceil() as u64;
    let per_test = delta / (2 * draws) as f64;
    for _ in 0..draws {
        let a = oracle.random_element(rng)?;
        if !membership_test(a, handle, oracle, rng, budget_n, per_test)? {
            return Ok(a);
        }
    }
    Err(Error::RandomizedFailure(format!(
        "no element outside a subgroup of order {} in {draws} draws",
        handle.order()
    )))
}

/// Least `k` with `a^k in H`, given a known `multiple` with
/// `a^multiple in H` (in the full-size model, `|G| / |H|` works).
///
/// Membership of `a^(m/p^j)` is monotone in `j`, so each prime power of
/// `multiple` is peeled off by a binary search. `a` itself is assumed to lie
/// outside `H`.
pub fn find_min_exponent<O: GroupOracle + ?Sized>(
    a: Element,
    handle: &mut SubgroupHandle,
    oracle: &mut O,
    rng: &mut dyn RngCore,
    multiple: u64,
    delta: f64,
) -> Result<u64> {
    check_delta(delta)?;
    if multiple == 0 {
        return Err(Error::Precondition("multiple must be positive".into()));
    }
    if a == handle.identity {
        return Err(Error::Precondition("the identity lies in every subgroup".into()));
    }
    let primes = factorize(multiple);
    let tests: u32 = primes.iter().map(|&(_, e)| 32 - e.leading_zeros()).sum();
    let per_test = delta / tests.max(1) as f64;
    let budget = handle.order().max(1);

    let mut m = multiple;
    for (p, e) in primes {
        let (mut lo, mut hi) = (0u32, e);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            let x = m / p.pow(mid);
            let member = if x == 1 {
                false
            } else {
                let y = pow_with_identity(oracle, handle.identity, a, x)?;
                y == handle.identity || membership_test(y, handle, oracle, rng, budget, per_test)?
            };
            if member {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        m /= p.pow(lo);
    }
    if m == 1 {
        return Err(Error::Precondition("element lies in the subgroup".into()));
    }
    Ok(m)
}

/// Exponents `lambda` with `b = a_1^{lambda_1} ... a_r^{lambda_r}` for
/// `b in H`. A collision `b * y = x` gives `b = x * y^{-1}`, computed on
/// exponent vectors; the answer is re-evaluated before it is returned.
pub fn find_exponents<O: GroupOracle + ?Sized>(
    b: Element,
    handle: &mut SubgroupHandle,
    oracle: &mut O,
    rng: &mut dyn RngCore,
    budget_n: u64,
    delta: f64,
) -> Result<Vec<u64>> {
    let ks = handle.exponents.clone();
    if let Some(code) = handle.known_code(b) {
        return Ok(decode_mixed_radix(code, &ks));
    }
    let samples = collision_plan(handle, oracle, budget_n, delta)?;
    let hit = match handle.known_code(b) {
        Some(code) => Some((code, 0)),
        None => collide(b, handle, oracle, rng, samples)?,
    };
    let Some((x_code, y_code)) = hit else {
        return Err(Error::RandomizedFailure(format!(
            "no collision for {b} in a subgroup of order {}",
            handle.order()
        )));
    };
    let gamma = handle.presentation();
    let x = gamma.monomial(decode_mixed_radix(x_code, &ks))?;
    let y = gamma.monomial(decode_mixed_radix(y_code, &ks))?;
    let lambda = gamma.multiply(&x, &gamma.inverse(&y)).into_exponents();
    if handle.evaluate(oracle, &lambda)? != b {
        return Err(Error::RandomizedFailure(format!("exponents {lambda:?} do not evaluate to {b}")));
    }
    Ok(lambda)
}

/// Output of the birthday size estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeEstimate {
    /// `m^2` for the longest repeat-free run `m`.
    pub q: u64,
    pub samples_used: u64,
}

/// Birthday estimate of `|G|` from uniform samples alone.
///
/// A run draws until the first repeat; its length is the number of distinct
/// elements seen. After `c` runs the longest length `n'` fixes the number of
/// further runs, `c * log2 n'`, and `q` is the square of the longest run
/// overall.
pub fn estimate_size<O: GroupOracle + ?Sized>(oracle: &mut O, rng: &mut dyn RngCore) -> Result<SizeEstimate> {
    let mut samples = 0u64;
    let mut seen = std::collections::HashSet::new();
    let mut run = |oracle: &mut O, rng: &mut dyn RngCore| -> Result<u64> {
        seen.clear();
        loop {
            if samples >= ESTIMATE_SAMPLE_CAP {
                return Err(Error::RandomizedFailure("size estimator ran past its sample cap".into()));
            }
            samples += 1;
            if !seen.insert(oracle.random_element(rng)?) {
                return Ok(seen.len() as u64);
            }
        }
    };
    let mut first = 0;
    for _ in 0..ESTIMATE_ROUNDS {
        first = first.max(run(oracle, rng)?);
    }
    let rounds = ESTIMATE_ROUNDS * ((first as f64).log2().ceil() as u64).max(1);
    let mut longest = first;
    for _ in 0..rounds {
        longest = longest.max(run(oracle, rng)?);
    }
    Ok(SizeEstimate {
        q: longest * longest,
        samples_used: samples,
    })
}

/// Some `w >= 1` with `a^w = e`, from a collision among `a^j`,
/// `j` uniform in `[1, 2q]`. The result is checked through `f = a^w`,
/// `f * f = f`, which needs no known identity.
pub fn order_bound_ps<O: GroupOracle + ?Sized>(
    a: Element,
    oracle: &mut O,
    rng: &mut dyn RngCore,
    q: u64,
    delta: f64,
) -> Result<u64> {
    check_delta(delta)?;
    if q == 0 {
        return Err(Error::Precondition("q must be positive".into()));
    }
    let range = q.saturating_mul(2);
    let draws = (4.0 * q as f64 * (1.0 / delta).ln()).sqrt().ceil() as u64;
    let bits = 64 - range.leading_zeros();
    let mut squarings = vec![a];
    for _ in 1..bits {
        let last = *squarings.last().unwrap();
        squarings.push(oracle.op(last, last)?);
    }
    let power = |oracle: &mut O, j: u64| -> Result<Element> {
        let mut acc: Option<Element> = None;
        for (b, &s) in squarings.iter().enumerate() {
            if (j >> b) & 1 == 1 {
                acc = Some(match acc {
                    None => s,
                    Some(x) => oracle.op(x, s)?,
                });
            }
        }
        Ok(acc.expect("j >= 1"))
    };
    let mut seen: HashMap<Element, u64> = HashMap::new();
    for _ in 0..draws {
        let j = rng.gen_range(1..=range);
        let x = power(oracle, j)?;
        match seen.get(&x) {
            Some(&i) if i != j => {
                let w = i.abs_diff(j);
                let f = power(oracle, w)?;
                if oracle.op(f, f)? != f {
                    return Err(Error::RandomizedFailure(format!("a^{w} is not the identity")));
                }
                return Ok(w);
            }
            Some(_) => {}
            None => {
                seen.insert(x, j);
            }
        }
    }
    Err(Error::RandomizedFailure(format!("no power collision in {draws} draws")))
}

/// The identity as `a^w` for a random `a`, confirmed on fresh samples.
pub fn find_identity_ps<O: GroupOracle + ?Sized>(
    oracle: &mut O,
    rng: &mut dyn RngCore,
    q: u64,
    delta: f64,
) -> Result<Element> {
    let a = oracle.random_element(rng)?;
    let w = order_bound_ps(a, oracle, rng, q, delta)?;
    let e = pow_with_identity(oracle, a, a, w)?;
    for _ in 0..IDENTITY_CHECKS {
        let x = oracle.random_element(rng)?;
        if oracle.op(e, x)? != x {
            return Err(Error::RandomizedFailure(format!("{e} fails the identity check")));
        }
    }
    Ok(e)
}

/// Chain produced by [`random_generators_detailed`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomGenerators {
    pub chain: GeneratorChain,
    /// The size estimate, in the partial-size model only.
    pub estimate: Option<SizeEstimate>,
}

pub fn random_generators<O: GroupOracle + ?Sized>(
    oracle: &mut O,
    rng: &mut dyn RngCore,
    delta: f64,
) -> Result<GeneratorChain> {
    Ok(random_generators_detailed(oracle, rng, delta)?.chain)
}

/// Generator chain with triangular relations, correct with probability at
/// least `1 - delta`. Any subroutine failure is reported as a retryable
/// [`Error::RandomizedFailure`].
///
/// With a known size the loop stops once `k_1 ... k_i = |G|`. Without it
/// the size estimate `q` stands in for `|G|` in every budget and the loop
/// stops when [`find_outside`] finds nothing outside the current subgroup.
pub fn random_generators_detailed<O: GroupOracle + ?Sized>(
    oracle: &mut O,
    rng: &mut dyn RngCore,
    delta: f64,
) -> Result<RandomGenerators> {
    check_delta(delta)?;
    let model = oracle.model();
    let (n, estimate) = match model {
        Model::Fs => (oracle.size()?, None),
        Model::Ps => {
            let est = estimate_size(oracle, rng)?;
            (est.q, Some(est))
        }
    };
    // Per round: find_outside, find_min_exponent, find_exponents and (PS)
    // order_bound_ps; plus the identity search.
    let rounds = 64 - n.leading_zeros() as u64 + 1;
    let sub = delta / (4 * rounds + 2) as f64;
    let identity = match model {
        Model::Fs => oracle.identity()?,
        Model::Ps => find_identity_ps(oracle, rng, n, sub)?,
    };

    let mut handle = SubgroupHandle::new(identity);
    loop {
        if model == Model::Fs && handle.order() == n {
            break;
        }
        if handle.len() as u64 >= rounds {
            return Err(Error::RandomizedFailure("too many generators".into()));
        }
        let budget = n.max(handle.order());
        let a = match find_outside(&mut handle, oracle, rng, budget, sub) {
            Ok(a) => a,
            Err(Error::RandomizedFailure(_)) if model == Model::Ps => break,
            Err(e) => return Err(e),
        };
        let multiple = match model {
            Model::Fs => n / handle.order(),
            Model::Ps => order_bound_ps(a, oracle, rng, n, sub)?,
        };
        let k = find_min_exponent(a, &mut handle, oracle, rng, multiple, sub)?;
        if model == Model::Fs && n % (handle.order() * k) != 0 {
            return Err(Error::RandomizedFailure(format!(
                "relative order {k} does not fit a group of order {n}"
            )));
        }
        let b = pow_with_identity(oracle, identity, a, k)?;
        let lambda = find_exponents(b, &mut handle, oracle, rng, budget, sub)?;
        handle.push(oracle, a, k, lambda)?;
    }

    let chain = handle.to_chain();
    chain
        .verify_relations(oracle)
        .map_err(|e| Error::RandomizedFailure(format!("final chain check failed: {e}")))?;
    Ok(RandomGenerators { chain, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_group, CayleyOracle, GroupSpec};
    use crate::snf::invariant_factors;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z(factors: &[u64]) -> CayleyOracle {
        CayleyOracle::fs(GroupSpec::with_identity_labels(factors).unwrap())
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn handle(o: &mut CayleyOracle, gens: &[(u64, u64, Vec<u64>)]) -> SubgroupHandle {
        let mut h = SubgroupHandle::new(Element::new(0));
        for (a, k, l) in gens {
            h.push(o, Element::new(*a), *k, l.clone()).unwrap();
        }
        h
    }

    #[test]
    fn empty_handle_samples_identity() {
        let mut o = z(&[6]);
        let h = handle(&mut o, &[]);
        let mut r = rng(1);
        for _ in 0..20 {
            assert_eq!(sample_subgroup(&h, &mut o, &mut r).unwrap(), (Element::new(0), vec![]));
        }
    }

    #[test]
    fn z8_sampling_is_uniform() {
        let mut o = z(&[8]);
        let h = handle(&mut o, &[(1, 8, vec![])]);
        let mut r = rng(2);
        let mut counts = [0u32; 8];
        for _ in 0..8000 {
            let (x, exps) = sample_subgroup(&h, &mut o, &mut r).unwrap();
            assert_eq!(h.evaluate(&mut o, &exps).unwrap(), x);
            counts[x.label() as usize] += 1;
        }
        for c in counts {
            let f = c as f64 / 8000.0;
            assert!((0.10..=0.15).contains(&f), "frequency {f}");
        }
    }

    #[test]
    fn sampled_exponents_reevaluate() {
        let mut o = CayleyOracle::fs(make_group(&[4, 6], 9).unwrap());
        let mut r = rng(3);
        let chain = crate::deterministic::generator_plus(&mut o).unwrap().0;
        let h = SubgroupHandle::from_chain(&chain, &mut o).unwrap();
        for _ in 0..200 {
            let (x, exps) = sample_subgroup(&h, &mut o, &mut r).unwrap();
            assert_eq!(chain.evaluate(&mut o, &exps).unwrap(), x);
        }
    }

    #[test]
    fn membership_examples() {
        let mut r = rng(4);
        let mut o = z(&[8]);
        let mut h = handle(&mut o, &[(2, 4, vec![])]);
        assert!(membership_test(Element::new(0), &mut h, &mut o, &mut r, 8, 0.01).unwrap());
        assert!(membership_test(Element::new(4), &mut h, &mut o, &mut r, 8, 0.01).unwrap());
        assert!(!membership_test(Element::new(1), &mut h, &mut o, &mut r, 8, 0.01).unwrap());

        let mut o = z(&[6]);
        let mut h = handle(&mut o, &[]);
        assert!(membership_test(Element::new(0), &mut h, &mut o, &mut r, 6, 0.01).unwrap());
        for a in 1..6 {
            assert!(!membership_test(Element::new(a), &mut h, &mut o, &mut r, 6, 0.01).unwrap());
        }
    }

    #[test]
    fn membership_in_large_subgroup_uses_samples() {
        // |H| = 4096 is far above the lookup table built for delta = 0.01.
        let mut o = z(&[2, 4096]);
        let mut h = SubgroupHandle::new(Element::new(0));
        let g = o.spec().label_of_tuple(&[0, 1]).unwrap();
        h.push(&mut o, g, 4096, vec![]).unwrap();
        let mut r = rng(5);
        let inside = o.spec().label_of_tuple(&[0, 1234]).unwrap();
        let outside = o.spec().label_of_tuple(&[1, 1234]).unwrap();
        let mut misses = 0;
        for _ in 0..200 {
            if !membership_test(inside, &mut h, &mut o, &mut r, 8192, 0.01).unwrap() {
                misses += 1;
            }
            assert!(!membership_test(outside, &mut h, &mut o, &mut r, 8192, 0.01).unwrap());
        }
        assert!(h.known_elements() < 4096);
        assert!(misses <= 6, "{misses} false negatives");
    }

    #[test]
    fn find_outside_examples() {
        let mut r = rng(6);
        let mut o = z(&[2]);
        let mut h = handle(&mut o, &[]);
        assert_eq!(find_outside(&mut h, &mut o, &mut r, 2, 0.01).unwrap(), Element::new(1));

        let mut o = z(&[8]);
        let mut h = handle(&mut o, &[(2, 4, vec![])]);
        for _ in 0..20 {
            assert_eq!(find_outside(&mut h, &mut o, &mut r, 8, 0.01).unwrap().label() % 2, 1);
        }

        let mut h = handle(&mut o, &[(1, 8, vec![])]);
        assert!(matches!(
            find_outside(&mut h, &mut o, &mut r, 8, 0.01),
            Err(Error::RandomizedFailure(_))
        ));
    }

    #[test]
    fn min_exponent_examples() {
        let mut r = rng(7);
        let mut o = z(&[8]);
        let mut h = handle(&mut o, &[(4, 2, vec![])]);
        assert_eq!(find_min_exponent(Element::new(1), &mut h, &mut o, &mut r, 8, 0.01).unwrap(), 4);

        let mut o = z(&[6]);
        let mut h = handle(&mut o, &[]);
        assert_eq!(find_min_exponent(Element::new(2), &mut h, &mut o, &mut r, 6, 0.01).unwrap(), 3);

        let mut o = z(&[13]);
        let mut h = handle(&mut o, &[]);
        for a in 1..13 {
            assert_eq!(find_min_exponent(Element::new(a), &mut h, &mut o, &mut r, 13, 0.01).unwrap(), 13);
        }
        assert!(matches!(
            find_min_exponent(Element::new(0), &mut h, &mut o, &mut r, 13, 0.01),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn exponent_examples() {
        let mut r = rng(8);
        let mut o = z(&[4, 2]);
        let a1 = o.spec().label_of_tuple(&[1, 0]).unwrap();
        let a2 = o.spec().label_of_tuple(&[0, 1]).unwrap();
        let mut h = handle(&mut o, &[(a1.label(), 4, vec![]), (a2.label(), 2, vec![0])]);
        let e = Element::new(0);
        assert_eq!(find_exponents(e, &mut h, &mut o, &mut r, 8, 0.01).unwrap(), vec![0, 0]);
        let b = o.spec().label_of_tuple(&[2, 1]).unwrap();
        assert_eq!(find_exponents(b, &mut h, &mut o, &mut r, 8, 0.01).unwrap(), vec![2, 1]);

        let mut o = z(&[9]);
        let mut h = handle(&mut o, &[(1, 9, vec![])]);
        assert_eq!(find_exponents(Element::new(6), &mut h, &mut o, &mut r, 9, 0.01).unwrap(), vec![6]);
    }

    #[test]
    fn exponents_through_collisions() {
        // Z_2^14: the lookup table does not cover H, so answers come from
        // collisions and monomial division.
        let mut o = z(&[2; 14]);
        let mut h = SubgroupHandle::new(Element::new(0));
        for i in 0..14 {
            let mut t = vec![0; 14];
            t[i] = 1;
            let g = o.spec().label_of_tuple(&t).unwrap();
            h.push(&mut o, g, 2, vec![0; i]).unwrap();
        }
        let mut r = rng(9);
        for trial in 0..20u64 {
            let t: Vec<u64> = (0..14).map(|i| (trial >> (i % 5)) & 1 ^ (i as u64 & 1)).collect();
            let b = o.spec().label_of_tuple(&t).unwrap();
            let lambda = find_exponents(b, &mut h, &mut o, &mut r, 1 << 14, 0.01).unwrap();
            assert_eq!(lambda, t);
        }
        assert!(h.known_elements() < 1 << 14);
    }

    #[test]
    fn size_estimate_examples() {
        let mut r = rng(10);
        let mut o = CayleyOracle::ps(make_group(&[], 0).unwrap());
        for _ in 0..10 {
            let est = estimate_size(&mut o, &mut r).unwrap();
            assert_eq!(est.q, 1);
        }
        let mut good = 0;
        for seed in 0..100 {
            let mut o = CayleyOracle::ps(make_group(&[1024], seed).unwrap());
            let est = estimate_size(&mut o, &mut r).unwrap();
            let m = (est.q as f64).sqrt() as u64;
            assert_eq!(m * m, est.q);
            if (1024..=70 * 1024).contains(&est.q) {
                good += 1;
            }
        }
        assert!(good >= 95, "{good} of 100");
    }

    #[test]
    fn order_bound_examples() {
        let mut r = rng(11);
        let mut o = CayleyOracle::ps(GroupSpec::with_identity_labels(&[6]).unwrap());
        let mut saw = None;
        while saw.is_none() {
            let x = o.random_element(&mut r).unwrap();
            if x.label() == 2 {
                saw = Some(x);
            }
        }
        for _ in 0..20 {
            let w = order_bound_ps(Element::new(2), &mut o, &mut r, 6, 0.01).unwrap();
            assert_eq!(w % 3, 0);
        }
        let mut o = CayleyOracle::ps(GroupSpec::with_identity_labels(&[2]).unwrap());
        while o.random_element(&mut r).unwrap().label() != 1 {}
        for _ in 0..20 {
            assert_eq!(order_bound_ps(Element::new(1), &mut o, &mut r, 2, 0.01).unwrap() % 2, 0);
        }
    }

    #[test]
    fn identity_in_partial_model() {
        let mut r = rng(12);
        let mut o = CayleyOracle::ps(make_group(&[], 3).unwrap());
        assert_eq!(find_identity_ps(&mut o, &mut r, 1, 0.01).unwrap(), Element::new(0));
        let spec = make_group(&[12], 77).unwrap();
        let e = spec.identity_element();
        for seed in 0..100 {
            let mut o = CayleyOracle::ps(spec.clone());
            assert_eq!(find_identity_ps(&mut o, &mut rng(seed), 12, 0.01).unwrap(), e);
        }
    }

    #[test]
    fn random_generators_examples() {
        for model in [Model::Fs, Model::Ps] {
            let mut r = rng(13);
            let mut o = CayleyOracle::new(make_group(&[], 1).unwrap().into(), model);
            assert!(random_generators(&mut o, &mut r, 0.01).unwrap().is_empty());

            let mut o = CayleyOracle::new(make_group(&[7], 1).unwrap().into(), model);
            let c = random_generators(&mut o, &mut r, 0.01).unwrap();
            assert_eq!(c.exponents, vec![7]);
            assert_eq!(c.relations, vec![Vec::<u64>::new()]);

            let mut o = CayleyOracle::new(make_group(&[4, 2], 5).unwrap().into(), model);
            let c = random_generators(&mut o, &mut r, 0.01).unwrap();
            assert_eq!(c.order(), 8);
            assert_eq!(invariant_factors(&c.presentation().unwrap()), vec![2, 4]);
        }
    }

    #[test]
    fn partial_model_reports_estimate() {
        let mut o = CayleyOracle::ps(make_group(&[3, 9], 4).unwrap());
        let out = random_generators_detailed(&mut o, &mut rng(14), 0.01).unwrap();
        assert!(out.estimate.unwrap().q >= 1);
        assert_eq!(out.chain.order(), 27);
    }
}
