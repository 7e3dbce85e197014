//! Invariant factors computed straight from a direct-product description,
//! independent of any oracle.

use std::collections::BTreeMap;

use crate::arith::factorize;

/// Invariant factors `m_1 | ... | m_r` (ascending, units dropped) of
/// `Z_{f_1} x ... x Z_{f_k}`.
///
/// Each factor splits into prime powers by the Chinese remainder theorem.
/// For every prime the powers are sorted largest first, and the `j`-th
/// largest invariant factor collects the `j`-th largest power of every
/// prime.
pub fn canonical_invariant_factors(factors: &[u64]) -> Vec<u64> {
    let mut by_prime: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    for &f in factors {
        for (p, e) in factorize(f) {
            by_prime.entry(p).or_default().push(e);
        }
    }
    let rank = by_prime.values().map(Vec::len).max().unwrap_or(0);
    let mut out = vec![1u64; rank];
    for (p, mut exps) in by_prime {
        exps.sort_unstable_by(|a, b| b.cmp(a));
        for (j, e) in exps.into_iter().enumerate() {
            out[j] *= p.pow(e);
        }
    }
    out.reverse();
    out
}

/// Every abelian group of order at most `limit`, once each, as its
/// invariant factors. The trivial group appears as the empty list.
pub fn all_groups_up_to(limit: u64) -> Vec<Vec<u64>> {
    fn extend(prefix: &mut Vec<u64>, product: u64, limit: u64, out: &mut Vec<Vec<u64>>) {
        out.push(prefix.clone());
        let last = prefix.last().copied().unwrap_or(1);
        // The next factor is a multiple of the last one and at least 2.
        let mut next = if last == 1 { 2 } else { last };
        while product * next <= limit {
            prefix.push(next);
            extend(prefix, product * next, limit, out);
            prefix.pop();
            next += last;
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), 1, limit, &mut out);
    out.sort_by_key(|f| (f.iter().product::<u64>(), f.clone()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crt_examples() {
        assert_eq!(canonical_invariant_factors(&[]), Vec::<u64>::new());
        assert_eq!(canonical_invariant_factors(&[1, 1]), Vec::<u64>::new());
        assert_eq!(canonical_invariant_factors(&[6]), vec![6]);
        assert_eq!(canonical_invariant_factors(&[2, 3]), vec![6]);
        assert_eq!(canonical_invariant_factors(&[4, 3, 3]), vec![3, 12]);
        assert_eq!(canonical_invariant_factors(&[2, 4]), vec![2, 4]);
        assert_eq!(canonical_invariant_factors(&[12, 18]), vec![6, 36]);
    }

    /// Number of abelian groups of order n is the product of partition
    /// counts of the prime exponents.
    #[test]
    fn group_counts_match_partition_formula() {
        let partitions = [1u64, 1, 2, 3, 5, 7, 11];
        let groups = all_groups_up_to(100);
        for n in 1..=100u64 {
            let expected: u64 = factorize(n).iter().map(|&(_, e)| partitions[e as usize]).product();
            let got = groups.iter().filter(|f| f.iter().product::<u64>() == n).count() as u64;
            assert_eq!(got, expected, "order {n}");
        }
        for f in &groups {
            assert_eq!(&canonical_invariant_factors(f), f);
        }
    }
}
