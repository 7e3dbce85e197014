//! Independent oracles and seeded property checks shared by the
//! `properties` and `acceptance` test targets.
#![allow(dead_code)]

use std::collections::HashSet;

use abelian_core::deterministic::generator_plus;
use abelian_core::isomorphism::{is_isomorphic, verify_witness, Mode};
use abelian_core::monomial::{evaluate_unreduced, psi, Presentation};
use abelian_core::oracle::{make_group, CayleyOracle, Element, GroupSpec, Model};
use abelian_core::randomized::{membership_test, random_generators, SubgroupHandle};
use abelian_core::snf::{basis_from_snf, build_relation_matrix, smith_normal_form, IntegerMatrix};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- oracles

pub fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Invariant factors of `Z_{f_1} x ... x Z_{f_k}` from determinantal
/// divisors of `diag(f)`: `d_j` is the gcd of all products of `j` factors.
pub fn diag_invariant_factors(factors: &[u64]) -> Vec<u64> {
    let k = factors.len();
    let mut out = Vec::new();
    let mut prev = 1u128;
    for j in 1..=k {
        let mut g = 0u128;
        for s in subsets(k, j) {
            g = gcd(g, s.iter().map(|&i| factors[i] as u128).product());
        }
        let m = g / prev;
        prev = g;
        if m > 1 {
            out.push(m as u64);
        }
    }
    out
}

fn det_i128(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    if n == 1 {
        return m[0][0];
    }
    let mut total = 0;
    for c in 0..n {
        if m[0][c] == 0 {
            continue;
        }
        let minor: Vec<Vec<i128>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &x)| x).collect())
            .collect();
        let sign = if c % 2 == 0 { 1 } else { -1 };
        total += sign * m[0][c] * det_i128(&minor);
    }
    total
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

/// Nonzero diagonal of the Smith form, from gcds of all `j x j` minors.
pub fn minor_diagonal(m: &[Vec<i128>]) -> Vec<u128> {
    let (rows, cols) = (m.len(), m.first().map_or(0, Vec::len));
    let mut out = Vec::new();
    let mut prev = 1u128;
    for j in 1..=rows.min(cols) {
        let mut g = 0u128;
        for rs in subsets(rows, j) {
            for cs in subsets(cols, j) {
                let sub: Vec<Vec<i128>> = rs.iter().map(|&r| cs.iter().map(|&c| m[r][c]).collect()).collect();
                g = gcd(g, det_i128(&sub).unsigned_abs());
            }
        }
        if g == 0 {
            break;
        }
        out.push(g / prev);
        prev = g;
    }
    out
}

pub fn to_i128(m: &IntegerMatrix) -> Vec<Vec<i128>> {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(|x| x.to_string().parse().unwrap()).collect())
        .collect()
}

pub fn mul_i128(a: &[Vec<i128>], b: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..cols).map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn det(m: &[Vec<i128>]) -> i128 {
    det_i128(m)
}

/// Subgroup generated by `gens`, by closure under the uncounted product.
pub fn closure(spec: &GroupSpec, gens: &[Element]) -> HashSet<Element> {
    let e = spec.identity_element();
    let mut set = HashSet::from([e]);
    let mut frontier = vec![e];
    while let Some(x) = frontier.pop() {
        for &g in gens {
            let y = spec.product(x, g).unwrap();
            if set.insert(y) {
                frontier.push(y);
            }
        }
    }
    set
}

/// Every divisibility chain `m_1 | ... | m_r` with `m_1 > 1` and product at
/// most `limit`, the empty chain included.
pub fn divisibility_chains(limit: u64) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    let mut stack: Vec<Vec<u64>> = (2..=limit).map(|m| vec![m]).collect();
    while let Some(chain) = stack.pop() {
        let prod: u64 = chain.iter().product();
        let last = *chain.last().unwrap();
        let mut next = last;
        while prod * next <= limit {
            let mut c = chain.clone();
            c.push(next);
            stack.push(c);
            next += last;
        }
        out.push(chain);
    }
    // Chains are stored smallest factor first.
    for c in out.iter_mut() {
        c.sort_unstable();
    }
    out.sort();
    out.dedup();
    out
}

// ---------------------------------------------------------------- strategies

/// Factor lists (each factor >= 2) with product at most `limit`.
pub fn factor_list(limit: u64, max_len: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(2u64..=limit.max(2), 0..=max_len).prop_filter_map("order too large", move |mut v| {
        let mut prod = 1u64;
        v.retain(|&f| {
            if prod * f <= limit {
                prod *= f;
                true
            } else {
                false
            }
        });
        Some(v)
    })
}

pub fn runner(cases: u32, seed: u64) -> TestRunner {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &bytes))
}

fn finish<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

fn chain_of(factors: &[u64], seed: u64) -> (CayleyOracle, abelian_core::deterministic::GeneratorChain) {
    let mut o = CayleyOracle::fs(make_group(factors, seed).unwrap());
    let chain = generator_plus(&mut o).unwrap().0;
    (o, chain)
}

// ---------------------------------------------------------------- properties

/// Group axioms for the oracle group and, exhaustively, for `Gamma(K, L)`
/// built from its chain (orders up to 64).
pub fn prop_group_axioms(seed: u64) -> Result<(), String> {
    finish(runner(24, seed).run(&(factor_list(64, 4), any::<u64>()), |(factors, s)| {
        let (o, chain) = chain_of(&factors, s);
        let spec = o.spec();
        let n = spec.order();
        let e = spec.identity_element();
        let mul = |a: Element, b: Element| spec.product(a, b).unwrap();
        for a in (0..n).map(Element::new) {
            prop_assert_eq!(mul(a, e), a);
            prop_assert_eq!((0..n).map(Element::new).filter(|&b| mul(a, b) == e).count(), 1);
            for b in (0..n).step_by(3).map(Element::new) {
                prop_assert_eq!(mul(a, b), mul(b, a));
                let c = Element::new((a.label() * 7 + b.label()) % n);
                prop_assert_eq!(mul(mul(a, b), c), mul(a, mul(b, c)));
            }
        }
        let p = chain.presentation().unwrap();
        let elems: Vec<_> = p.elements().collect();
        prop_assert_eq!(elems.len() as u64, n);
        let one = p.identity();
        for x in &elems {
            prop_assert_eq!(&p.multiply(x, &one), x);
            prop_assert_eq!(p.multiply(x, &p.inverse(x)), one.clone());
            for y in &elems {
                let xy = p.multiply(x, y);
                prop_assert_eq!(&xy, &p.multiply(y, x));
                for z in &elems {
                    prop_assert_eq!(p.multiply(&xy, z), p.multiply(x, &p.multiply(y, z)));
                }
            }
        }
        Ok(())
    }))
}

/// `Psi` is a bijective homomorphism (orders up to 256), agrees with
/// unreduced exponent evaluation, and reduction stays below `2 n^2`.
pub fn prop_psi(seed: u64) -> Result<(), String> {
    finish(runner(24, seed).run(
        &(factor_list(256, 5), any::<u64>(), any::<bool>(), prop::collection::vec(0u64..64, 8)),
        |(factors, s, rand_chain, raw)| {
            let (mut o, mut chain) = chain_of(&factors, s);
            if rand_chain {
                chain = random_generators(&mut o, &mut ChaCha8Rng::seed_from_u64(s), 0.01)
                    .map_err(|e| fail(e.to_string()))?;
            }
            let n = o.spec().order();
            let p = chain.presentation().unwrap();
            let elems: Vec<_> = p.elements().collect();
            let images: Vec<Element> = elems.iter().map(|x| psi(&p, &chain, &mut o, x).unwrap()).collect();
            let distinct: HashSet<_> = images.iter().copied().collect();
            prop_assert_eq!(distinct.len() as u64, n);
            let step = if n <= 64 { 1 } else { 7 };
            for i in (0..elems.len()).step_by(step) {
                for j in (0..elems.len()).step_by(step) {
                    let xy = p.multiply(&elems[i], &elems[j]);
                    let lhs = psi(&p, &chain, &mut o, &xy).unwrap();
                    prop_assert_eq!(lhs, o.spec().product(images[i], images[j]).unwrap());
                    let (_, peak) = p.reduce_traced(
                        &elems[i].exponents().iter().zip(elems[j].exponents()).map(|(a, b)| *a as i128 + *b as i128).collect::<Vec<_>>(),
                    );
                    prop_assert!(peak < 2 * (n as u128) * (n as u128), "peak {} for n = {}", peak, n);
                }
            }
            let l: Vec<u64> = raw.iter().take(p.rank()).copied().collect();
            if l.len() == p.rank() {
                let reduced = p.reduce(&l.iter().map(|&x| x as i128).collect::<Vec<_>>());
                prop_assert_eq!(psi(&p, &chain, &mut o, &reduced).unwrap(), evaluate_unreduced(&chain, &mut o, &l).unwrap());
            }
            Ok(())
        },
    ))
}

/// Smith form checks recomputed in test code: `U R V = D`, `|det U| =
/// |det V| = 1`, divisibility, agreement with gcd-of-minors, and a basis
/// that enumerates `Gamma` exactly once.
pub fn prop_snf(seed: u64) -> Result<(), String> {
    let matrices = (1usize..=4, 1usize..=4).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-12i64..=12, c), r));
    finish(runner(64, seed).run(&matrices, |rows| {
        let m = IntegerMatrix::from_rows(&rows).unwrap();
        let snf = smith_normal_form(&m);
        let (r, u, v, d) = (to_i128(&m), to_i128(&snf.u), to_i128(&snf.v), to_i128(&snf.d));
        prop_assert_eq!(mul_i128(&mul_i128(&u, &r), &v), d.clone());
        prop_assert_eq!(det(&u).abs(), 1);
        prop_assert_eq!(det(&v).abs(), 1);
        let diag: Vec<i128> = (0..d.len().min(d[0].len())).map(|i| d[i][i]).collect();
        for (i, row) in d.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                prop_assert!(i == j || x == 0);
            }
        }
        for w in diag.windows(2) {
            prop_assert!(w[0] >= 0 && (w[0] == 0 && w[1] == 0 || w[0] != 0 && w[1] % w[0] == 0));
        }
        let nonzero: Vec<u128> = diag.iter().filter(|&&x| x != 0).map(|&x| x as u128).collect();
        prop_assert_eq!(nonzero, minor_diagonal(&r));
        Ok(())
    }))?;
    finish(runner(24, seed ^ 1).run(&(factor_list(256, 5), any::<u64>()), |(factors, s)| {
        let (_, chain) = chain_of(&factors, s);
        let p = chain.presentation().unwrap();
        let snf = smith_normal_form(&build_relation_matrix(&p));
        let m = snf.invariant_factors();
        prop_assert_eq!(&m, &diag_invariant_factors(&factors));
        prop_assert_eq!(m.iter().product::<u64>(), p.order());
        let basis = basis_from_snf(&p, &snf).map_err(|e| fail(e.to_string()))?;
        let mut seen = HashSet::new();
        for code in 0..p.order() {
            let mut c = code;
            let mut x = p.identity();
            for (y, &mi) in basis.iter().zip(&m) {
                x = p.multiply(&x, &p.pow(y, (c % mi) as i128));
                c /= mi;
            }
            prop_assert!(seen.insert(x));
        }
        Ok(())
    }))
}

/// Membership over fixtures of order up to 64: never `true` outside `H`,
/// and the false-negative rate on members stays below `delta`.
pub fn prop_membership(seed: u64) -> Result<(), String> {
    const DELTA: f64 = 0.01;
    let misses = std::cell::Cell::new(0u64);
    let member_trials = std::cell::Cell::new(0u64);
    finish(runner(32, seed).run(&(factor_list(64, 4), any::<u64>(), 0usize..4), |(factors, s, prefix)| {
        let (mut o, chain) = chain_of(&factors, s);
        let r = prefix.min(chain.len());
        let h_set = closure(o.spec(), &chain.generators[..r]);
        let mut handle = SubgroupHandle::new(chain.identity);
        for i in 0..r {
            handle.push(&mut o, chain.generators[i], chain.exponents[i], chain.relations[i].clone()).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let n = o.spec().order();
        for a in 0..n {
            let a = Element::new(a);
            for _ in 0..8 {
                let got = membership_test(a, &mut handle, &mut o, &mut rng, n, DELTA).unwrap();
                if h_set.contains(&a) {
                    member_trials.set(member_trials.get() + 1);
                    if !got {
                        misses.set(misses.get() + 1);
                    }
                } else {
                    prop_assert!(!got, "{} reported inside a subgroup of order {}", a, h_set.len());
                }
            }
        }
        Ok(())
    }))?;
    let rate = misses.get() as f64 / member_trials.get().max(1) as f64;
    if rate > DELTA {
        return Err(format!("false-negative rate {rate} exceeds {DELTA}"));
    }
    Ok(())
}

/// Isomorphic relabelings produce a witness that verifies, and whose map is
/// checked here as a homomorphism on all pairs for small orders.
pub fn prop_witness(seed: u64) -> Result<(), String> {
    finish(runner(24, seed).run(
        &(factor_list(100, 4), any::<u64>(), any::<u64>(), prop::bool::ANY, prop::bool::ANY),
        |(factors, s1, s2, rand_mode, partial)| {
            let canon = diag_invariant_factors(&factors);
            let (mode, model) = match (rand_mode, partial) {
                (false, _) => (Mode::Det, Model::Fs),
                (true, false) => (Mode::Rand, Model::Fs),
                (true, true) => (Mode::Rand, Model::Ps),
            };
            let mut g = CayleyOracle::new(make_group(&factors, s1).unwrap().into(), model);
            let mut h = CayleyOracle::new(make_group(&canon, s2).unwrap().into(), model);
            let mut rng = ChaCha8Rng::seed_from_u64(s1 ^ s2);
            let rep = is_isomorphic(&mut g, &mut h, &mut rng, mode, 0.01).map_err(|e| fail(e.to_string()))?;
            prop_assert!(rep.isomorphic);
            let w = rep.witness.unwrap();
            prop_assert!(verify_witness(&w, &mut g, &mut h, 16, &mut rng));
            let n = g.spec().order();
            if model == Model::Fs && n <= 36 {
                let (gs, hs) = (g.spec().clone(), h.spec().clone());
                let mut dec = w.g.decomposer(&mut g).unwrap();
                let img: Vec<Element> = (0..n).map(|x| w.map(&mut dec, &mut g, &mut h, &mut rng, Element::new(x)).unwrap()).collect();
                for x in 0..n {
                    for y in 0..n {
                        let xy = gs.product(Element::new(x), Element::new(y)).unwrap();
                        prop_assert_eq!(img[xy.label() as usize], hs.product(img[x as usize], img[y as usize]).unwrap());
                    }
                }
            }
            Ok(())
        },
    ))
}

pub type Property = fn(u64) -> Result<(), String>;

/// The five suites, by name.
pub const SUITES: [(&str, Property); 5] = [
    ("group axioms", prop_group_axioms),
    ("psi bijective homomorphism", prop_psi),
    ("snf unimodular and diagonal", prop_snf),
    ("membership one-sided", prop_membership),
    ("witness verification", prop_witness),
];

/// Seed used by both test targets.
pub const PROPERTY_SEED: u64 = 0x0ab5_e1a7;

pub fn presentation_fixture() -> Presentation {
    "K=4,3,3; L[2,1]=3 L[3,1]=2 L[3,2]=1".parse().unwrap()
}
