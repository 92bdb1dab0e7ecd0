//! Ridge-based residual permutation tests used as comparison methods.
//!
//! Both residualise Y and every X column on W by ridge regression (with an
//! unpenalised intercept) and use the statistic `Σ_j corr(r_Y, r_{X_j})²`.
//! Freedman-Lane permutes the ridge residual of Y, rebuilds
//! `Ŷ(π) = 1ĉ + Wγ̂ + N̂^π` and residualises again; double residualisation
//! permutes `r_Y` directly.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;
#[allow(unused_imports)]
use num_traits::Float;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{center, permuted};
use crate::permtest::{p_value_upper, random_permutation};
use crate::regression::{default_ridge_grid, Ridge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    FreedmanLane,
    DoubleResidualization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: BaselineMethod,
    /// Ridge penalty actually used.
    pub lambda: f64,
    pub null: Vec<f64>,
}

const DEGENERATE_TOL: f64 = 1e-8;

struct Residualized<'a> {
    ridge: Ridge,
    lambda: f64,
    r_x: Vec<DVector<f64>>,
    data: &'a Dataset,
}

impl<'a> Residualized<'a> {
    fn new(data: &'a Dataset, lambda: Option<f64>) -> Result<Self> {
        let required = data.n_causes() + 3;
        if data.rows() < required {
            return Err(Error::InsufficientSamples { rows: data.rows(), required });
        }
        let ridge = Ridge::new(data.w())?;
        let lambda = match lambda {
            Some(l) => l,
            None => ridge.gcv_lambda(data.y(), &default_ridge_grid())?,
        };
        let op = ridge.residual_operator(lambda)?;
        let r_x = data
            .x()
            .column_iter()
            .enumerate()
            .map(|(j, col)| {
                let col = col.into_owned();
                let r = op.apply(&col);
                check_residual(&r, &col, &data.names_x()[j])?;
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ridge, lambda, r_x, data })
    }

    fn statistic(&self, r_y: &DVector<f64>) -> f64 {
        let ny = r_y.norm();
        self.r_x
            .iter()
            .map(|rx| {
                let c = r_y.dot(rx) / (ny * rx.norm());
                c * c
            })
            .sum()
    }
}

fn check_residual(r: &DVector<f64>, original: &DVector<f64>, name: &str) -> Result<()> {
    let scale = center(original).0.norm();
    if !(r.norm() > DEGENERATE_TOL * scale) || scale == 0.0 {
        return Err(Error::DegenerateResiduals(format!("residual of {name} on the background has no variance")));
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn replicate_stats<F: Fn(usize) -> f64 + Sync + Send>(n: usize, f: F) -> Vec<f64> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn replicate_stats<F: Fn(usize) -> f64>(n: usize, f: F) -> Vec<f64> {
    (0..n).map(f).collect()
}

fn check_permutations(permutations: usize) -> Result<()> {
    if permutations == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    Ok(())
}

/// Freedman-Lane test with ridge nuisance fit; `lambda = None` picks the
/// penalty by GCV on the default grid.
pub fn freedman_lane_test(data: &Dataset, lambda: Option<f64>, permutations: usize, seed: u64) -> Result<BaselineResult> {
    check_permutations(permutations)?;
    let res = Residualized::new(data, lambda)?;
    let op = res.ridge.residual_operator(res.lambda)?;
    let y = data.y();
    let r_y = op.apply(y);
    check_residual(&r_y, y, "the response")?;
    let statistic = res.statistic(&r_y);
    let fit = res.ridge.fit(y, res.lambda)?;
    let fitted = (data.w() * &fit.gamma_hat).add_scalar(fit.intercept);
    let resid = y - &fitted;
    let null = replicate_stats(permutations, |i| {
        let perm = random_permutation(data.rows(), seed, i);
        let y_pi = &fitted + permuted(&resid, &perm);
        res.statistic(&op.apply(&y_pi))
    });
    Ok(BaselineResult {
        p_value: p_value_upper(statistic, &null),
        statistic,
        method: BaselineMethod::FreedmanLane,
        lambda: res.lambda,
        null,
    })
}

/// Double residualisation: permute the ridge residual of Y against the
/// fixed ridge residuals of X.
pub fn double_residualization_test(
    data: &Dataset,
    lambda: Option<f64>,
    permutations: usize,
    seed: u64,
) -> Result<BaselineResult> {
    check_permutations(permutations)?;
    let res = Residualized::new(data, lambda)?;
    let y = data.y();
    let r_y = res.ridge.residualize(y, res.lambda)?;
    check_residual(&r_y, y, "the response")?;
    let statistic = res.statistic(&r_y);
    let null = replicate_stats(permutations, |i| {
        let perm = random_permutation(res.data.rows(), seed, i);
        res.statistic(&permuted(&r_y, &perm))
    });
    Ok(BaselineResult {
        p_value: p_value_upper(statistic, &null),
        statistic,
        method: BaselineMethod::DoubleResidualization,
        lambda: res.lambda,
        null,
    })
}
