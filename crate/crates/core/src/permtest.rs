//! Residual-permutation test on the stability statistic.
//!
//! Pseudo-responses are `Ŷ(π) = Wγ̂ + N̂^π` with `N̂ = Y - Wγ̂`. Each
//! replicate refits every subset regression on `Ŷ(π)`; since only the
//! response changes, the map `y -> β̂(S_j)` is factorised once per subset.
//!
//! Stable coefficients (small statistic) are the evidence for a causal
//! effect, so the p-value counts null replicates at or below the observed
//! statistic: `p = (#{i : V_i <= V_0} + 1) / (M + 1)`. Ties go against
//! rejection.
//!
//! Permutation `i` is drawn by Fisher-Yates from stream `(seed, Permutation, i)`,
//! so raising the number of permutations leaves earlier draws unchanged.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;

use crate::data::{Dataset, SubsetFamily};
use crate::error::{Error, Result};
use crate::linalg::{identity_perm, permuted, select, stack_design, LeastSquares};
use crate::regression::GammaEstimate;
use crate::rng::{stream, Purpose};
use crate::stability::stability_of_columns;

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationTestResult {
    pub v_observed: f64,
    pub v_null: Vec<f64>,
    pub p_value: f64,
    /// Number of coefficient vectors entering the statistic.
    pub m: usize,
    pub permutations: usize,
    pub seed: u64,
}

/// `(#{i : v_null[i] <= v_observed} + 1) / (M + 1)`.
pub fn p_value_from(v_observed: f64, v_null: &[f64]) -> f64 {
    let count = v_null.iter().filter(|v| **v <= v_observed).count();
    (count + 1) as f64 / (v_null.len() + 1) as f64
}

/// `(#{i : t_null[i] >= t_observed} + 1) / (M + 1)`, for statistics where
/// large values are evidence against the null.
pub fn p_value_upper(t_observed: f64, t_null: &[f64]) -> f64 {
    let count = t_null.iter().filter(|t| **t >= t_observed).count();
    (count + 1) as f64 / (t_null.len() + 1) as f64
}

/// Uniform permutation of `0..n` for replicate `index`.
pub fn random_permutation(n: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut perm = identity_perm(n);
    perm.shuffle(&mut stream(seed, Purpose::Permutation, index as u64));
    perm
}

fn check_gamma(w: &DMatrix<f64>, gamma_hat: &GammaEstimate) -> Result<()> {
    if gamma_hat.gamma_hat.len() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "gamma estimate has length {}, background has {} columns",
            gamma_hat.gamma_hat.len(),
            w.ncols()
        )));
    }
    Ok(())
}

/// `Wγ̂ + (Y - Wγ̂)[π]`.
pub fn permute_residual_response(
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    gamma_hat: &GammaEstimate,
    perm: &[usize],
) -> Result<DVector<f64>> {
    check_gamma(w, gamma_hat)?;
    if perm.len() != y.len() || w.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for {} rows",
            perm.len(),
            y.len()
        )));
    }
    let fitted = w * &gamma_hat.gamma_hat;
    let resid = y - &fitted;
    Ok(fitted + permuted(&resid, perm))
}

/// One coefficient vector of the statistic: OLS of Y on `[1, W_cols, X]`
/// restricted to `rows` (all rows when `None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub rows: Option<Vec<usize>>,
    pub cols: Vec<usize>,
}

impl Block {
    pub fn subset(cols: Vec<usize>) -> Self {
        Self { rows: None, cols }
    }
}

/// Precomputed linear maps `y -> β̂_j` for a list of blocks.
#[derive(Debug, Clone)]
pub struct StabilityEngine {
    maps: Vec<(Option<Vec<usize>>, DMatrix<f64>)>,
    d: usize,
}

impl StabilityEngine {
    pub fn from_family(data: &Dataset, family: &SubsetFamily) -> Result<Self> {
        if family.q() != data.n_background() {
            return Err(Error::DimensionMismatch(format!(
                "family is over {} features, data has {}",
                family.q(),
                data.n_background()
            )));
        }
        let blocks: Vec<Block> = family.iter().map(|s| Block::subset(s.to_vec())).collect();
        Self::from_blocks(data, &blocks)
    }

    pub fn from_blocks(data: &Dataset, blocks: &[Block]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("no blocks".into()));
        }
        let d = data.n_causes();
        let q = data.n_background();
        let maps = blocks
            .iter()
            .map(|b| {
                if b.cols.iter().any(|&c| c >= q) {
                    return Err(Error::InvalidSubset(format!("column index out of range 0..{q}")));
                }
                let sub = match &b.rows {
                    Some(rows) => data.select_rows(rows)?,
                    None => data.clone(),
                };
                let required = d + b.cols.len() + 2;
                if sub.rows() < required {
                    return Err(Error::InsufficientSamples { rows: sub.rows(), required });
                }
                let ws = sub.w().select_columns(&b.cols);
                let design = stack_design(sub.rows(), true, &[&ws, sub.x()]);
                let names: Vec<String> = b
                    .cols
                    .iter()
                    .map(|&c| data.names_w()[c].clone())
                    .chain(data.names_x().iter().cloned())
                    .collect();
                let ls = LeastSquares::new(&design, |j| {
                    if j == 0 { "intercept".into() } else { names[j - 1].clone() }
                })?;
                Ok((b.rows.clone(), ls.trailing_coefficient_map(d)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { maps, d })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// All coefficient vectors for response `y`, stacked column-wise (d×m).
    pub fn coefficients(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.d, self.maps.len());
        for (j, (rows, g)) in self.maps.iter().enumerate() {
            let b = match rows {
                Some(rows) => g * select(y, rows),
                None => g * y,
            };
            out.set_column(j, &b);
        }
        out
    }

    pub fn statistic(&self, y: &DVector<f64>) -> Result<f64> {
        let c = self.coefficients(y);
        stability_of_columns(c.as_slice().chunks(self.d), self.d)
    }
}

/// Stability statistic of the observed data over the family.
pub fn observed_stability(data: &Dataset, family: &SubsetFamily) -> Result<f64> {
    StabilityEngine::from_family(data, family)?.statistic(data.y())
}

/// The permutation test over a subset family with a supplied γ̂.
pub fn permutation_test(
    data: &Dataset,
    family: &SubsetFamily,
    gamma_hat: &GammaEstimate,
    permutations: usize,
    seed: u64,
) -> Result<PermutationTestResult> {
    let engine = StabilityEngine::from_family(data, family)?;
    run_engine(&engine, data, gamma_hat, permutations, seed)
}

/// The permutation test over arbitrary (row group, column set) blocks.
pub fn block_permutation_test(
    data: &Dataset,
    blocks: &[Block],
    gamma_hat: &GammaEstimate,
    permutations: usize,
    seed: u64,
) -> Result<PermutationTestResult> {
    let engine = StabilityEngine::from_blocks(data, blocks)?;
    run_engine(&engine, data, gamma_hat, permutations, seed)
}

fn run_engine(
    engine: &StabilityEngine,
    data: &Dataset,
    gamma_hat: &GammaEstimate,
    permutations: usize,
    seed: u64,
) -> Result<PermutationTestResult> {
    if permutations == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    check_gamma(data.w(), gamma_hat)?;
    let v_observed = engine.statistic(data.y())?;
    let fitted = data.w() * &gamma_hat.gamma_hat;
    let resid = data.y() - &fitted;
    let n = data.rows();
    let replicate = |i: usize| -> Result<f64> {
        let perm = random_permutation(n, seed, i);
        let y_pi = &fitted + permuted(&resid, &perm);
        engine.statistic(&y_pi).map_err(|e| match e {
            Error::UndefinedStatistic { .. } => Error::UndefinedStatistic { replicate: Some(i) },
            other => other,
        })
    };
    let v_null = collect_indexed(permutations, replicate)?;
    Ok(PermutationTestResult {
        p_value: p_value_from(v_observed, &v_null),
        v_observed,
        v_null,
        m: engine.len(),
        permutations,
        seed,
    })
}

#[cfg(feature = "parallel")]
fn collect_indexed<F: Fn(usize) -> Result<f64> + Sync + Send>(n: usize, f: F) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect::<Vec<_>>().into_iter().collect()
}

#[cfg(not(feature = "parallel"))]
fn collect_indexed<F: Fn(usize) -> Result<f64>>(n: usize, f: F) -> Result<Vec<f64>> {
    (0..n).map(f).collect()
}

/// Type-I inflation term `√M ‖W(γ - γ̂)‖ / (2σ_y)`.
pub fn type1_bound_estimate(
    w: &DMatrix<f64>,
    gamma: &DVector<f64>,
    gamma_hat: &GammaEstimate,
    sigma_y: f64,
    permutations: usize,
) -> Result<f64> {
    check_gamma(w, gamma_hat)?;
    if gamma.len() != w.ncols() {
        return Err(Error::DimensionMismatch("gamma length differs from background width".into()));
    }
    if !(sigma_y > 0.0) {
        return Err(Error::InvalidParameter("sigma_y must be positive".into()));
    }
    let gap = w * (gamma - &gamma_hat.gamma_hat);
    Ok((permutations as f64).sqrt() * gap.norm() / (2.0 * sigma_y))
}
