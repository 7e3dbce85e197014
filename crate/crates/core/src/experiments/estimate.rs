//! Calibration of the birthday size estimator.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::bench::median;
use crate::oracle::{make_group, CayleyOracle, Model};
use crate::randomized::estimate_size;

/// Upper calibration constant: a trial is covered when `n <= q <= C n log2 n`.
pub const COVERAGE_CONSTANT: f64 = 70.0;

/// Calibration constant for the median sample count, in units of
/// `sqrt(n log2 n)`.
pub const SAMPLES_CONSTANT: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub trial: u32,
    pub q: u64,
    pub samples_used: u64,
    pub covered: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    pub spec: String,
    pub n: u64,
    pub rows: Vec<EstimateRow>,
    /// Quantiles 0.05, 0.5, 0.95 of `q / n`.
    pub q_over_n: [f64; 3],
    pub median_samples: f64,
    pub coverage: f64,
    /// `median_samples <= 30 sqrt(n log2 n)`.
    pub samples_within_bound: bool,
}

pub fn upper_bound(n: u64) -> f64 {
    COVERAGE_CONSTANT * n as f64 * (n as f64).log2().max(1.0)
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[i]
}

/// Runs the estimator `trials` times on fresh labelings of `factors` in the
/// partial-size model.
pub fn estimate_size_report(factors: &[u64], trials: u32, seed: u64) -> Result<EstimateReport> {
    let n: u64 = factors.iter().product();
    let rows: Vec<EstimateRow> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(t as u64);
            let mut oracle = CayleyOracle::new(make_group(factors, s)?.into(), Model::Ps);
            let est = estimate_size(&mut oracle, &mut ChaCha8Rng::seed_from_u64(s))?;
            Ok(EstimateRow {
                trial: t,
                q: est.q,
                samples_used: est.samples_used,
                covered: n <= est.q && (est.q as f64) <= upper_bound(n),
            })
        })
        .collect::<Result<_>>()?;
    let (q_over_n, median_samples, coverage) = if rows.is_empty() {
        ([f64::NAN; 3], f64::NAN, f64::NAN)
    } else {
        let mut ratios: Vec<f64> = rows.iter().map(|r| r.q as f64 / n as f64).collect();
        ratios.sort_by(f64::total_cmp);
        let mut samples: Vec<f64> = rows.iter().map(|r| r.samples_used as f64).collect();
        (
            [quantile(&ratios, 0.05), quantile(&ratios, 0.5), quantile(&ratios, 0.95)],
            median(&mut samples),
            rows.iter().filter(|r| r.covered).count() as f64 / rows.len() as f64,
        )
    };
    let nf = n as f64;
    Ok(EstimateReport {
        spec: crate::oracle::format_factors(factors),
        n,
        samples_within_bound: median_samples <= SAMPLES_CONSTANT * (nf * nf.log2().max(1.0)).sqrt(),
        rows,
        q_over_n,
        median_samples,
        coverage,
    })
}

pub fn write_rows_csv<W: Write>(report: &EstimateReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_group_always_one() {
        let r = estimate_size_report(&[], 100, 1).unwrap();
        assert!(r.rows.iter().all(|row| row.q == 1));
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn order_4096() {
        let r = estimate_size_report(&[4096], 200, 2).unwrap();
        assert!(r.coverage >= 0.95, "coverage {}", r.coverage);
        assert!(r.samples_within_bound, "median samples {}", r.median_samples);
    }
}
