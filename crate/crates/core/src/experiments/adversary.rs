//! Adversary against deterministic strategies that tell `D1 = Z_p^m` from
//! `D2 = Z_p^{m-2} x Z_{p^2}`.
//!
//! Both groups contain `W = Z_p^{m-2}` (the last two coordinates zero) with
//! the same group law. The adversary binds labels lazily and serves only
//! elements of `W`; since `W` is closed under products, nothing a strategy
//! sees distinguishes `D1` from `D2` until it asks for a `(p^{m-2}+1)`-th
//! distinct element. At that point the adversary commits to the group fixed
//! for the run and extends the labeling consistently.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::factorize;
use crate::deterministic::{decode_mixed_radix, encode_mixed_radix};
use crate::error::{Error, Result};
use crate::experiments::ground_truth::canonical_invariant_factors;
use crate::isomorphism::{find_basis, BudgetedOracle, Mode};
use crate::oracle::{Counters, Element, GroupOracle, Model, MAX_ORDER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Commitment {
    /// `Z_p^m`
    D1,
    /// `Z_p^{m-2} x Z_{p^2}`
    D2,
}

impl Commitment {
    pub fn radices(self, p: u64, m: u32) -> Vec<u64> {
        let mut r = vec![p; m as usize];
        if self == Commitment::D2 {
            r.truncate(m as usize - 2);
            r.push(p * p);
        }
        r
    }

    pub fn invariant_factors(self, p: u64, m: u32) -> Vec<u64> {
        canonical_invariant_factors(&self.radices(p, m))
    }
}

/// One answered query, in the order asked.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Query {
    ElementAt { label: u64, answer: Element },
    Identity { answer: Element },
    Random { answer: Element },
    Op { a: Element, b: Element, answer: Element },
}

pub struct AdversaryOracle {
    p: u64,
    m: u32,
    n: u64,
    threshold: u64,
    choice: Commitment,
    radices: Vec<u64>,
    code_of_label: Vec<Option<u64>>,
    label_of_code: Vec<Option<u64>>,
    served: u64,
    next_w: u64,
    next_label: u64,
    committed: bool,
    requests_at_commit: Option<u64>,
    accesses_at_commit: Option<u64>,
    pre_commit_bindings: Vec<(u64, u64)>,
    transcript: Vec<Query>,
    counters: Counters,
}

impl AdversaryOracle {
    pub fn new(p: u64, m: u32, choice: Commitment) -> Result<Self> {
        if m < 2 {
            return Err(Error::Precondition("the adversary needs m >= 2".into()));
        }
        if factorize(p) != [(p, 1)] {
            return Err(Error::Precondition(format!("{p} is not prime")));
        }
        let n = (p as u128).pow(m);
        if n > MAX_ORDER as u128 {
            return Err(Error::Precondition(format!("p^m = {n} is too large")));
        }
        let n = n as u64;
        Ok(AdversaryOracle {
            p,
            m,
            n,
            threshold: p.pow(m - 2),
            choice,
            radices: choice.radices(p, m),
            code_of_label: vec![None; n as usize],
            label_of_code: vec![None; n as usize],
            served: 0,
            next_w: 0,
            next_label: 0,
            committed: false,
            requests_at_commit: None,
            accesses_at_commit: None,
            pre_commit_bindings: Vec::new(),
            transcript: Vec::new(),
            counters: Counters::default(),
        })
    }

    /// The group the adversary reveals when forced.
    pub fn commitment(&self) -> Commitment {
        self.choice
    }

    /// `p^{m-2} = |W|`.
    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn committed(&self) -> bool {
        self.committed
    }

    /// Distinct elements served so far (before commitment these all lie in
    /// `W`).
    pub fn served(&self) -> u64 {
        self.served
    }

    /// Distinct-element requests at the moment of commitment, counting the
    /// request that forced it.
    pub fn requests_at_commit(&self) -> Option<u64> {
        self.requests_at_commit
    }

    pub fn accesses_at_commit(&self) -> Option<u64> {
        self.accesses_at_commit
    }

    /// Queries answered before commitment.
    pub fn transcript(&self) -> &[Query] {
        &self.transcript
    }

    /// `(label, code)` pairs bound before the commitment, or all bindings so
    /// far if it has not happened. Codes are mixed-radix over
    /// [`Commitment::radices`], least significant digit first.
    pub fn pre_commit_bindings(&self) -> Vec<(u64, u64)> {
        if self.committed {
            self.pre_commit_bindings.clone()
        } else {
            self.bindings()
        }
    }

    fn bind(&mut self, label: u64, code: u64) {
        self.code_of_label[label as usize] = Some(code);
        self.label_of_code[code as usize] = Some(label);
        self.served += 1;
    }

    fn fresh_label(&mut self) -> u64 {
        while self.code_of_label[self.next_label as usize].is_some() {
            self.next_label += 1;
        }
        self.next_label
    }

    /// Reveals the hidden group: every unbound label gets an unused element
    /// of the chosen group, both in increasing order.
    fn commit(&mut self) {
        self.requests_at_commit = Some(self.served + 1);
        self.accesses_at_commit = Some(self.counters.total());
        self.pre_commit_bindings = self.bindings();
        self.committed = true;
        let mut code = 0;
        for label in 0..self.n {
            if self.code_of_label[label as usize].is_some() {
                continue;
            }
            while self.label_of_code[code as usize].is_some() {
                code += 1;
            }
            self.bind(label, code);
        }
    }

    fn bindings(&self) -> Vec<(u64, u64)> {
        (0..self.n)
            .filter_map(|l| self.code_of_label[l as usize].map(|c| (l, c)))
            .collect()
    }

    fn check(&self, label: u64) -> Result<()> {
        if label >= self.n {
            Err(Error::LabelOutOfRange { label, order: self.n })
        } else {
            Ok(())
        }
    }

    /// Code behind `label`, serving a fresh element of `W` or committing if
    /// the label is new.
    fn resolve(&mut self, label: u64) -> Result<u64> {
        self.check(label)?;
        if let Some(c) = self.code_of_label[label as usize] {
            return Ok(c);
        }
        if self.served < self.threshold {
            while self.label_of_code[self.next_w as usize].is_some() {
                self.next_w += 1;
            }
            let c = self.next_w;
            self.bind(label, c);
            return Ok(c);
        }
        self.commit();
        Ok(self.code_of_label[label as usize].expect("commit binds every label"))
    }

    fn combine(&self, a: u64, b: u64) -> u64 {
        let (x, y) = (decode_mixed_radix(a, &self.radices), decode_mixed_radix(b, &self.radices));
        let sum: Vec<u64> = x.iter().zip(&y).zip(&self.radices).map(|((u, v), k)| (u + v) % k).collect();
        encode_mixed_radix(&sum, &self.radices)
    }

    fn label_for(&mut self, code: u64) -> u64 {
        match self.label_of_code[code as usize] {
            Some(l) => l,
            None => {
                let l = self.fresh_label();
                self.bind(l, code);
                l
            }
        }
    }

    fn log(&mut self, q: Query) {
        if !self.committed {
            self.transcript.push(q);
        }
    }

    /// Replays the pre-commitment transcript against an honest oracle for
    /// `group` whose labeling agrees with every binding made before the
    /// commitment (or so far, if none happened).
    pub fn replay_consistent(&self, group: Commitment) -> bool {
        let radices = group.radices(self.p, self.m);
        let bindings = self.pre_commit_bindings();
        let mut code_of_label = vec![None; self.n as usize];
        let mut used = vec![false; self.n as usize];
        for &(l, c) in &bindings {
            code_of_label[l as usize] = Some(c);
            used[c as usize] = true;
        }
        let mut next = 0;
        for slot in code_of_label.iter_mut().filter(|s| s.is_none()) {
            while used[next] {
                next += 1;
            }
            used[next] = true;
            *slot = Some(next as u64);
        }
        let code = |e: Element| code_of_label[e.label() as usize].unwrap();
        let add = |a: u64, b: u64| {
            let (x, y) = (decode_mixed_radix(a, &radices), decode_mixed_radix(b, &radices));
            let s: Vec<u64> = x.iter().zip(&y).zip(&radices).map(|((u, v), k)| (u + v) % k).collect();
            encode_mixed_radix(&s, &radices)
        };
        self.transcript.iter().all(|q| match *q {
            Query::ElementAt { label, answer } => answer.label() == label,
            Query::Identity { answer } => code(answer) == 0,
            Query::Random { answer } => answer.label() < self.n,
            Query::Op { a, b, answer } => code(answer) == add(code(a), code(b)),
        })
    }
}

impl GroupOracle for AdversaryOracle {
    fn model(&self) -> Model {
        Model::Fs
    }

    fn op(&mut self, a: Element, b: Element) -> Result<Element> {
        self.counters.products += 1;
        let ca = self.resolve(a.label())?;
        let cb = self.resolve(b.label())?;
        let c = self.combine(ca, cb);
        let answer = Element::new(self.label_for(c));
        self.log(Query::Op { a, b, answer });
        Ok(answer)
    }

    fn random_element(&mut self, rng: &mut dyn RngCore) -> Result<Element> {
        self.counters.elements += 1;
        let label = rng.gen_range(0..self.n);
        self.resolve(label)?;
        let answer = Element::new(label);
        self.log(Query::Random { answer });
        Ok(answer)
    }

    fn identity(&mut self) -> Result<Element> {
        self.counters.elements += 1;
        let answer = Element::new(self.label_for(0));
        self.log(Query::Identity { answer });
        Ok(answer)
    }

    fn element_at(&mut self, label: u64) -> Result<Element> {
        self.counters.elements += 1;
        self.resolve(label)?;
        let answer = Element::new(label);
        self.log(Query::ElementAt { label, answer });
        Ok(answer)
    }

    fn size(&self) -> Result<u64> {
        Ok(self.n)
    }

    fn counters(&self) -> Counters {
        self.counters
    }
}

/// A deterministic procedure that names the invariant factors of the group
/// behind an oracle.
pub trait Strategy: Sync {
    fn name(&self) -> &str;
    fn run(&self, oracle: &mut dyn GroupOracle) -> Result<Vec<u64>>;
}

/// The shipped pipeline: coset enumeration, Smith normal form, invariant
/// factors.
pub struct BasisStrategy;

impl Strategy for BasisStrategy {
    fn name(&self) -> &str {
        "basis-det"
    }

    fn run(&self, oracle: &mut dyn GroupOracle) -> Result<Vec<u64>> {
        // Deterministic mode draws no randomness; the stream is a formality.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(find_basis(oracle, &mut rng, Mode::Det, 0.5)?.orders)
    }
}

/// Looks at one element and guesses `D1`.
pub struct HastyStrategy {
    pub p: u64,
    pub m: u32,
}

impl Strategy for HastyStrategy {
    fn name(&self) -> &str {
        "hasty"
    }

    fn run(&self, oracle: &mut dyn GroupOracle) -> Result<Vec<u64>> {
        oracle.element_at(0)?;
        Ok(Commitment::D1.invariant_factors(self.p, self.m))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommitRun {
    pub commitment: Commitment,
    pub answer: Option<Vec<u64>>,
    pub correct: bool,
    pub committed: bool,
    pub requests_at_commit: Option<u64>,
    pub accesses_at_commit: Option<u64>,
    pub total_accesses: u64,
    pub replay_d1: bool,
    pub replay_d2: bool,
    pub budget_exceeded: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub p: u64,
    pub m: u32,
    pub threshold: u64,
    pub strategy: String,
    pub runs: Vec<CommitRun>,
    pub correct_on_both: bool,
    /// Every run pushed the adversary past `threshold` requests.
    pub forced_past_threshold: bool,
    /// Pre-commitment transcripts replay against both honest groups.
    pub transcripts_consistent: bool,
    /// Some run hit the access cap without answering.
    pub inconclusive: bool,
}

impl AdversaryReport {
    /// The lower bound: a strategy right on both commitments must have
    /// made more than `threshold` requests.
    pub fn lower_bound_holds(&self) -> bool {
        !self.correct_on_both || self.forced_past_threshold
    }
}

/// Runs `strategy` once against each commitment.
pub fn adversary_demo(p: u64, m: u32, strategy: &dyn Strategy, access_cap: u64) -> Result<AdversaryReport> {
    let mut runs = Vec::new();
    let mut threshold = 0;
    for commitment in [Commitment::D1, Commitment::D2] {
        let mut adv = AdversaryOracle::new(p, m, commitment)?;
        threshold = adv.threshold();
        let result = {
            let mut capped = BudgetedOracle::new(&mut adv, access_cap);
            strategy.run(&mut capped)
        };
        let (answer, budget_exceeded) = match result {
            Ok(f) => (Some(f), false),
            Err(Error::BudgetExceeded(_)) => (None, true),
            Err(e) => return Err(e),
        };
        runs.push(CommitRun {
            commitment,
            correct: answer.as_ref() == Some(&commitment.invariant_factors(p, m)),
            answer,
            committed: adv.committed(),
            requests_at_commit: adv.requests_at_commit(),
            accesses_at_commit: adv.accesses_at_commit(),
            total_accesses: adv.counters().total(),
            replay_d1: adv.replay_consistent(Commitment::D1),
            replay_d2: adv.replay_consistent(Commitment::D2),
            budget_exceeded,
        });
    }
    Ok(AdversaryReport {
        p,
        m,
        threshold,
        strategy: strategy.name().to_string(),
        correct_on_both: runs.iter().all(|r| r.correct),
        forced_past_threshold: runs.iter().all(|r| r.requests_at_commit.is_some_and(|q| q > threshold)),
        transcripts_consistent: runs.iter().all(|r| r.replay_d1 && r.replay_d2),
        inconclusive: runs.iter().any(|r| r.budget_exceeded),
        runs,
    })
}
