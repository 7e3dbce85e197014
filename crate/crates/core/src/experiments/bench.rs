//! Oracle-access scaling on elementary and homocyclic families.

use std::fmt;
use std::io::Write;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::factorize;
use crate::error::{Error, Result};
use crate::isomorphism::{find_basis, Mode};
use crate::oracle::{make_group, CayleyOracle, GroupOracle, Model, MAX_ORDER};

/// Attempts per trial before a randomized failure is given up on. Accesses
/// of failed attempts are kept in the count.
pub const MAX_ATTEMPTS: u32 = 8;

/// The ratio column counts as bounded when no point exceeds the first one
/// by more than this factor.
pub const RATIO_SLACK: f64 = 2.0;

/// `Z_q^m` for `q = 2`, a prime `p`, or a prime square `p^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Z2,
    Zp(u64),
    Zp2(u64),
}

impl Family {
    /// The cyclic factor `q`.
    pub fn base(self) -> u64 {
        match self {
            Family::Z2 => 2,
            Family::Zp(p) => p,
            Family::Zp2(p) => p * p,
        }
    }

    pub fn factors(self, m: u32) -> Vec<u64> {
        vec![self.base(); m as usize]
    }

    fn check(self) -> Result<()> {
        let p = match self {
            Family::Z2 => 2,
            Family::Zp(p) | Family::Zp2(p) => p,
        };
        if factorize(p) != [(p, 1)] {
            return Err(Error::Parse(format!("{p} is not prime")));
        }
        Ok(())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Z2 => write!(f, "z2"),
            Family::Zp(p) => write!(f, "zp:{p}"),
            Family::Zp2(p) => write!(f, "zp2:{p}"),
        }
    }
}

/// `z2`, `zp:<p>` or `zp2:<p>`.
impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let prime = |t: &str| t.parse::<u64>().map_err(|_| Error::Parse(format!("bad prime in family {s:?}")));
        let fam = match s.split_once(':') {
            None if s == "z2" => Family::Z2,
            Some(("zp", p)) => Family::Zp(prime(p)?),
            Some(("zp2", p)) => Family::Zp2(prime(p)?),
            _ => return Err(Error::Parse(format!("unknown family {s:?}; expected z2, zp:<p> or zp2:<p>"))),
        };
        fam.check()?;
        Ok(fam)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub m: u32,
    pub n: u64,
    pub median_accesses: f64,
    pub median_products: f64,
    pub median_elements: f64,
    /// `median_accesses / (sqrt(n) * log2(n)^3)`.
    pub ratio: f64,
    /// Attempts beyond the first, summed over trials.
    pub retries: u32,
    /// Trials that never succeeded.
    pub failures: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub family: String,
    pub mode: Mode,
    pub model: Model,
    pub delta: f64,
    pub trials: u32,
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln accesses` against `ln n`; absent for a
    /// single point.
    pub slope: Option<f64>,
    pub ratio_max: f64,
    pub ratio_bounded: bool,
}

pub fn normalized_ratio(accesses: f64, n: u64) -> f64 {
    let n = n as f64;
    let l = n.log2().max(1.0);
    accesses / (n.sqrt() * l * l * l)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        (values[k / 2 - 1] + values[k / 2]) / 2.0
    }
}

/// Least-squares slope of `y` on `x`, `None` below two distinct `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let k = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let den = k * sxx - sx * sx;
    (points.len() >= 2 && den.abs() > 1e-12).then(|| (k * sxy - sx * sy) / den)
}

struct TrialCost {
    products: u64,
    elements: u64,
    retries: u32,
    failed: bool,
}

fn one_trial(factors: &[u64], seed: u64, mode: Mode, model: Model, delta: f64) -> Result<TrialCost> {
    let mut oracle = CayleyOracle::new(make_group(factors, seed)?.into(), model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let mut retries = 0;
    let mut failed = true;
    for attempt in 0..MAX_ATTEMPTS {
        match find_basis(&mut oracle, &mut rng, mode, delta) {
            Ok(_) => {
                failed = false;
                retries = attempt;
                break;
            }
            Err(e) if e.is_retryable() => retries = attempt + 1,
            Err(e) => return Err(e),
        }
    }
    let c = oracle.counters();
    Ok(TrialCost {
        products: c.products,
        elements: c.elements,
        retries,
        failed,
    })
}

/// Median oracle accesses of the basis pipeline over `trials` seeded runs
/// per `m`, with a log-log fit against `n`.
pub fn bench_scaling(
    family: Family,
    ms: RangeInclusive<u32>,
    trials: u32,
    mode: Mode,
    model: Model,
    delta: f64,
) -> Result<ScalingReport> {
    family.check()?;
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is needed".into()));
    }
    let mut points = Vec::new();
    for m in ms {
        let n = (family.base() as u128).pow(m);
        if n > MAX_ORDER as u128 {
            return Err(Error::InvalidSpec(format!("{family} with m = {m} exceeds the supported order")));
        }
        let factors = family.factors(m);
        let costs: Vec<TrialCost> = (0..trials)
            .into_par_iter()
            .map(|t| one_trial(&factors, ((m as u64) << 32) | t as u64, mode, model, delta))
            .collect::<Result<_>>()?;
        let mut total: Vec<f64> = costs.iter().map(|c| (c.products + c.elements) as f64).collect();
        let mut products: Vec<f64> = costs.iter().map(|c| c.products as f64).collect();
        let mut elements: Vec<f64> = costs.iter().map(|c| c.elements as f64).collect();
        let median_accesses = median(&mut total);
        points.push(ScalingPoint {
            m,
            n: n as u64,
            median_accesses,
            median_products: median(&mut products),
            median_elements: median(&mut elements),
            ratio: normalized_ratio(median_accesses, n as u64),
            retries: costs.iter().map(|c| c.retries).sum(),
            failures: costs.iter().filter(|c| c.failed).count() as u32,
        });
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p.n as f64).ln(), p.median_accesses.max(1.0).ln()))
        .collect();
    let ratio_max = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let ratio_bounded = points.first().is_some_and(|p| ratio_max <= RATIO_SLACK * p.ratio);
    Ok(ScalingReport {
        family: family.to_string(),
        mode,
        model,
        delta,
        trials,
        slope: fit_slope(&logs),
        points,
        ratio_max,
        ratio_bounded,
    })
}

pub fn write_points_csv<W: Write>(report: &ScalingReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in &report.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
