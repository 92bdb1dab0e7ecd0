//! End-to-end tests: random selection, nuisance estimation by model
//! averaging, then the permutation test; and the multi-environment variant
//! where each environment contributes one coefficient vector.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::data::{Dataset, SubsetFamily};
use crate::error::{Error, Result};
use crate::permtest::{block_permutation_test, permutation_test, Block, PermutationTestResult};
use crate::regression::{
    gamma_hat_submodel, model_average_gamma, xic_average_gamma, GammaEstimate, GammaMethod,
    InformationCriterion, Weighting,
};
use crate::selection::random_selection;

/// How γ̂ is obtained for the permutation null.
#[derive(Debug, Clone, PartialEq)]
pub enum Nuisance {
    Uniform,
    SmoothedAic,
    SmoothedBic,
    /// A fixed estimate, e.g. the true γ on synthetic data.
    Given(GammaEstimate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsOptions {
    pub m: usize,
    pub k: usize,
    pub permutations: usize,
    pub nuisance: Nuisance,
    /// Drives both the subset draw and the permutations.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsOutcome {
    pub test: PermutationTestResult,
    pub gamma_hat: GammaEstimate,
    pub family: SubsetFamily,
}

pub fn estimate_nuisance(data: &Dataset, family: &SubsetFamily, nuisance: &Nuisance) -> Result<GammaEstimate> {
    let (y, w) = (data.y(), data.w());
    match nuisance {
        Nuisance::Uniform => model_average_gamma(y, w, family, &Weighting::Uniform),
        Nuisance::SmoothedAic => xic_average_gamma(y, w, family, InformationCriterion::Aic),
        Nuisance::SmoothedBic => xic_average_gamma(y, w, family, InformationCriterion::Bic),
        Nuisance::Given(g) => Ok(g.clone()),
    }
}

/// Random-selection test on a single dataset.
pub fn rs_test(data: &Dataset, opts: &RsOptions) -> Result<RsOutcome> {
    let q = data.n_background();
    if q == 0 {
        return Err(Error::InvalidParameter("no observed background features to select from".into()));
    }
    let family = random_selection(q, opts.k, opts.m, opts.seed)?;
    let gamma_hat = estimate_nuisance(data, &family, &opts.nuisance)?;
    let test = permutation_test(data, &family, &gamma_hat, opts.permutations, opts.seed)?;
    Ok(RsOutcome { test, gamma_hat, family })
}

/// One coefficient vector per environment (row group), each fitted on all
/// background columns. γ̂ is the mean of the per-environment OLS fits of Y
/// on `[1, W]`; residuals are permuted across the pooled rows.
pub fn environment_test(
    data: &Dataset,
    environments: &[Vec<usize>],
    permutations: usize,
    seed: u64,
) -> Result<(PermutationTestResult, GammaEstimate)> {
    if environments.is_empty() {
        return Err(Error::InvalidParameter("no environments".into()));
    }
    let q = data.n_background();
    let all: Vec<usize> = (0..q).collect();
    let mut gamma_hat = DVector::zeros(q);
    let mut intercept = 0.0;
    for rows in environments {
        let sub = data.select_rows(rows)?;
        let est = gamma_hat_submodel(sub.y(), sub.w(), &all)?;
        gamma_hat += est.gamma_hat;
        intercept += est.intercept;
    }
    let e = environments.len() as f64;
    let gamma_hat = GammaEstimate { gamma_hat: gamma_hat / e, intercept: intercept / e, method: GammaMethod::UniformAverage };
    let blocks: Vec<Block> =
        environments.iter().map(|rows| Block { rows: Some(rows.clone()), cols: all.clone() }).collect();
    let test = block_permutation_test(data, &blocks, &gamma_hat, permutations, seed)?;
    Ok((test, gamma_hat))
}
