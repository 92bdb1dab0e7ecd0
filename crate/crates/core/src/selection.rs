//! Background-subset selection strategies.

use alloc::vec::Vec;

use rand::seq::index;

use crate::data::SubsetFamily;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Random selection: `m` independent size-`k` subsets of `0..q`, each drawn
/// uniformly without replacement. Subsets may repeat across draws.
pub fn random_selection(q: usize, k: usize, m: usize, seed: u64) -> Result<SubsetFamily> {
    if k == 0 || k >= q {
        return Err(Error::InvalidSubsetSize { k, q });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("random_selection needs m >= 1".into()));
    }
    let mut rng = stream(seed, Purpose::Subsets, 0);
    let subsets = (0..m)
        .map(|_| {
            let mut s: Vec<usize> = index::sample(&mut rng, q, k).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    SubsetFamily::new(q, subsets)
}

/// Consecutive disjoint blocks `{0..k}, {k..2k}, ...` covering `0..q`.
pub fn partition_selection(q: usize, k: usize) -> Result<SubsetFamily> {
    if k == 0 || k >= q || q % k != 0 {
        return Err(Error::Partition { q, k });
    }
    let subsets = (0..q / k).map(|b| (b * k..(b + 1) * k).collect()).collect();
    SubsetFamily::new(q, subsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn random_selection_contract() {
        let fam = random_selection(5, 2, 3, 11).unwrap();
        assert_eq!(fam.len(), 3);
        for s in fam.iter() {
            assert_eq!(s.len(), 2);
            assert!(s[0] < s[1] && s[1] < 5);
        }
    }

    #[test]
    fn two_choices_only() {
        let fam = random_selection(2, 1, 4, 3).unwrap();
        for s in fam.iter() {
            assert!(s == [0] || s == [1]);
        }
    }

    #[test]
    fn invalid_sizes() {
        assert_eq!(random_selection(5, 5, 1, 0).unwrap_err(), Error::InvalidSubsetSize { k: 5, q: 5 });
        assert_eq!(random_selection(5, 0, 1, 0).unwrap_err(), Error::InvalidSubsetSize { k: 0, q: 5 });
    }

    #[test]
    fn reproducible() {
        assert_eq!(random_selection(50, 7, 20, 42).unwrap(), random_selection(50, 7, 20, 42).unwrap());
        assert_ne!(random_selection(50, 7, 20, 42).unwrap(), random_selection(50, 7, 20, 43).unwrap());
    }

    #[test]
    fn inclusion_frequency_matches_k_over_q() {
        // Each index is included with probability k/q; check every index
        // against a 4-sigma binomial band over 10^5 subsets.
        let (q, k, m) = (12usize, 4usize, 100_000usize);
        let fam = random_selection(q, k, m, 2024).unwrap();
        let mut counts = vec![0usize; q];
        for s in fam.iter() {
            for &i in s {
                counts[i] += 1;
            }
        }
        let p = k as f64 / q as f64;
        let mean = m as f64 * p;
        let sd = (m as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 4.0 * sd, "count {c} vs {mean}±{sd}");
        }
    }

    #[test]
    fn all_pairs_equally_likely() {
        // q=4, k=2: six subsets, each with probability 1/6.
        let fam = random_selection(4, 2, 60_000, 5).unwrap();
        let mut counts = alloc::collections::BTreeMap::new();
        for s in fam.iter() {
            *counts.entry(s.to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let sd = (60_000.0 * (1.0 / 6.0) * (5.0 / 6.0f64)).sqrt();
        for (_, c) in counts {
            assert!((c as f64 - 10_000.0).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn partition_examples() {
        let fam = partition_selection(6, 2).unwrap();
        assert_eq!(fam.subsets(), &[vec![0, 1], vec![2, 3], vec![4, 5]]);
        assert_eq!(partition_selection(4, 4).unwrap_err(), Error::Partition { q: 4, k: 4 });
        assert_eq!(partition_selection(5, 2).unwrap_err(), Error::Partition { q: 5, k: 2 });
    }
}
