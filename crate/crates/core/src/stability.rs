//! The coefficient stability statistic
//!
//! `V(v_1..v_m) = 1 - |mean v|^2 / mean |v_j|^2`
//!
//! computed in the equivalent deviation form `mean |v_j - mean v|^2 / mean |v_j|^2`,
//! which is nonnegative by construction and loses no precision when the
//! vectors nearly agree.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// The per-subset coefficient vectors β̂(S_1)..β̂(S_m), all of length d.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    vectors: Vec<DVector<f64>>,
}

impl CoefficientSet {
    pub fn new(vectors: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::InvalidParameter("coefficient set is empty".into()));
        };
        let d = first.len();
        if d == 0 {
            return Err(Error::DimensionMismatch("coefficient vectors have length 0".into()));
        }
        if vectors.iter().any(|v| v.len() != d) {
            return Err(Error::DimensionMismatch("coefficient vectors differ in length".into()));
        }
        Ok(Self { vectors })
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for v in &self.vectors {
            acc += v;
        }
        acc / self.vectors.len() as f64
    }
}

/// Stability statistic of a coefficient set; lies in `[0, 1]`.
pub fn stability_statistic(coeffs: &CoefficientSet) -> Result<f64> {
    stability_of_columns(coeffs.vectors.iter().map(|v| v.as_slice()), coeffs.dim())
}

/// Same statistic over raw slices of equal length `d`.
pub(crate) fn stability_of_columns<'a, I>(vectors: I, d: usize) -> Result<f64>
where
    I: Iterator<Item = &'a [f64]> + Clone,
{
    let mut mean = alloc::vec![0.0; d];
    let mut m = 0usize;
    let mut sq_norms = 0.0;
    for v in vectors.clone() {
        for (acc, x) in mean.iter_mut().zip(v) {
            *acc += x;
        }
        sq_norms += v.iter().map(|x| x * x).sum::<f64>();
        m += 1;
    }
    if sq_norms == 0.0 {
        return Err(Error::UndefinedStatistic { replicate: None });
    }
    let mf = m as f64;
    mean.iter_mut().for_each(|x| *x /= mf);
    let spread: f64 = vectors
        .map(|v| v.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok((spread / sq_norms).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn set(vs: &[&[f64]]) -> CoefficientSet {
        CoefficientSet::new(vs.iter().map(|v| DVector::from_column_slice(v)).collect()).unwrap()
    }

    #[test]
    fn identical_vectors_give_zero() {
        assert_eq!(stability_statistic(&set(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]])).unwrap(), 0.0);
    }

    #[test]
    fn worked_examples() {
        let v = stability_statistic(&set(&[&[1.0, 1.0], &[1.0, -1.0], &[1.0, 0.0]])).unwrap();
        assert!((v - 0.4).abs() < 1e-15);
        let v = stability_statistic(&set(&[&[2.0, 2.0], &[2.0, -2.0], &[2.0, 0.0]])).unwrap();
        assert!((v - 0.4).abs() < 1e-15);
        let v = stability_statistic(&set(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_vector_is_zero() {
        assert_eq!(stability_statistic(&set(&[&[3.0, -1.0]])).unwrap(), 0.0);
    }

    #[test]
    fn all_zero_is_an_error() {
        let err = stability_statistic(&set(&[&[0.0, 0.0], &[0.0, 0.0]])).unwrap_err();
        assert_eq!(err, Error::UndefinedStatistic { replicate: None });
    }

    #[test]
    fn rejects_ragged_input() {
        let r = CoefficientSet::new(vec![DVector::zeros(2), DVector::zeros(3)]);
        assert!(r.is_err());
    }

    #[test]
    fn orthogonal_equal_norms() {
        for m in 2..8 {
            let vs: Vec<DVector<f64>> = (0..m)
                .map(|j| {
                    let mut v = DVector::zeros(m);
                    v[j] = 2.5;
                    v
                })
                .collect();
            let v = stability_statistic(&CoefficientSet::new(vs).unwrap()).unwrap();
            assert!((v - (1.0 - 1.0 / m as f64)).abs() < 1e-14);
        }
    }

    fn vectors_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..5, 1usize..8).prop_flat_map(|(d, m)| {
            proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, d), m)
        })
    }

    proptest! {
        #[test]
        fn bounded_permutation_and_scale_invariant(vs in vectors_strategy(), c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], rot in 0usize..8) {
            let d = vs[0].len();
            prop_assume!(vs.iter().flatten().any(|x| x.abs() > 1e-6));
            let base = CoefficientSet::new(vs.iter().map(|v| DVector::from_vec(v.clone())).collect()).unwrap();
            let v0 = stability_statistic(&base).unwrap();
            prop_assert!((0.0..=1.0).contains(&v0));

            let mut rotated = vs.clone();
            let len = rotated.len();
            rotated.rotate_left(rot % len);
            rotated.reverse();
            let v1 = stability_statistic(&CoefficientSet::new(rotated.into_iter().map(DVector::from_vec).collect()).unwrap()).unwrap();
            prop_assert!((v0 - v1).abs() < 1e-12);

            let scaled = CoefficientSet::new(vs.iter().map(|v| DVector::from_vec(v.clone()) * c).collect()).unwrap();
            let v2 = stability_statistic(&scaled).unwrap();
            prop_assert!((v0 - v2).abs() < 1e-12);

            // agrees with the ratio form 1 - |mean|^2 / mean |v|^2
            let mean = base.mean();
            let msq = vs.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / vs.len() as f64;
            let ratio_form = 1.0 - mean.norm_squared() / msq;
            prop_assert!((v0 - ratio_form).abs() < 1e-10);
            prop_assert_eq!(d, base.dim());
        }
    }
}
