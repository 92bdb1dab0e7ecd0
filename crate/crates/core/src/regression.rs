//! Finite-sample estimation: OLS fits, per-subset coefficients β̂(S),
//! submodel nuisance fits γ̂(S), model averaging, information-criterion
//! weights and ridge regression.
//!
//! Every fit carries an unpenalised intercept, so all estimates are
//! invariant to shifting the data by a constant.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SVD};
#[allow(unused_imports)]
use num_traits::Float;

use crate::data::{Dataset, SubsetFamily};
use crate::error::{Error, Result};
use crate::linalg::{center, center_columns, stack_design, LeastSquares};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Intercept first (when fitted), then regressors in design order.
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Residual degrees of freedom `n - p`.
    pub dof: usize,
    /// `‖residuals‖² / dof`, NaN when `dof == 0`.
    pub sigma2_hat: f64,
    pub stderr: Option<DVector<f64>>,
    pub t_stats: Option<DVector<f64>>,
    /// Two-sided p-values from the t distribution with `dof` degrees of
    /// freedom. Needs the `std` feature.
    pub p_values: Option<DVector<f64>>,
}

/// OLS of `y` on `design` (plus an intercept column when requested).
pub fn ols_fit(y: &DVector<f64>, design: &DMatrix<f64>, with_intercept: bool) -> Result<OlsFit> {
    let labels: Vec<String> = (1..=design.ncols()).map(|j| format!("column {j}")).collect();
    ols_fit_labeled(y, design, with_intercept, &labels)
}

pub fn ols_fit_labeled(
    y: &DVector<f64>,
    design: &DMatrix<f64>,
    with_intercept: bool,
    labels: &[String],
) -> Result<OlsFit> {
    let n = y.len();
    if design.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, response has {n}",
            design.nrows()
        )));
    }
    let full = stack_design(n, with_intercept, &[design]);
    let offset = usize::from(with_intercept);
    let ls = LeastSquares::new(&full, |j| {
        if with_intercept && j == 0 {
            "intercept".into()
        } else {
            labels.get(j - offset).cloned().unwrap_or_else(|| format!("column {}", j - offset + 1))
        }
    })?;
    let coefficients = ls.solve(y);
    let residuals = y - &full * &coefficients;
    let p = full.ncols();
    let dof = n - p;
    let sigma2_hat = if dof > 0 { residuals.norm_squared() / dof as f64 } else { f64::NAN };
    let (stderr, t_stats) = if dof > 0 {
        let gram_inv = ls.gram_inverse();
        let se = DVector::from_fn(p, |j, _| (sigma2_hat * gram_inv[(j, j)]).sqrt());
        let t = coefficients.component_div(&se);
        (Some(se), Some(t))
    } else {
        (None, None)
    };
    let p_values = t_stats.as_ref().and_then(|t| two_sided_t_p_values(t, dof));
    Ok(OlsFit { coefficients, residuals, dof, sigma2_hat, stderr, t_stats, p_values })
}

#[cfg(feature = "std")]
fn two_sided_t_p_values(t: &DVector<f64>, dof: usize) -> Option<DVector<f64>> {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let dist = StudentsT::new(0.0, 1.0, dof as f64).ok()?;
    Some(t.map(|v| if v.is_finite() { (2.0 * dist.sf(v.abs())).min(1.0) } else { 0.0 }))
}

#[cfg(not(feature = "std"))]
fn two_sided_t_p_values(_t: &DVector<f64>, _dof: usize) -> Option<DVector<f64>> {
    None
}

/// Labels `[X names..., W_S names...]`.
fn subset_labels(data: &Dataset, s: &[usize]) -> Vec<String> {
    data.names_x().iter().cloned().chain(s.iter().map(|&i| data.names_w()[i].clone())).collect()
}

fn check_subset(s: &[usize], q: usize) -> Result<()> {
    if s.windows(2).any(|p| p[0] >= p[1]) || s.last().is_some_and(|&i| i >= q) {
        return Err(Error::InvalidSubset(format!("subset {s:?} is not a sorted subset of 0..{q}")));
    }
    Ok(())
}

/// β̂(S): the X-coefficients of the OLS of Y on `[1, X, W_S]`.
pub fn beta_hat_subset(data: &Dataset, s: &[usize]) -> Result<DVector<f64>> {
    check_subset(s, data.n_background())?;
    let d = data.n_causes();
    let required = d + s.len() + 2;
    if data.rows() < required {
        return Err(Error::InsufficientSamples { rows: data.rows(), required });
    }
    let ws = data.w().select_columns(s);
    let design = stack_design(data.rows(), false, &[data.x(), &ws]);
    let fit = ols_fit_labeled(data.y(), &design, true, &subset_labels(data, s))?;
    Ok(fit.coefficients.rows(1, d).into_owned())
}

/// Which estimator produced a [`GammaEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GammaMethod {
    SingleSubset,
    UniformAverage,
    WeightedAverage,
    SmoothedAic,
    SmoothedBic,
    Ridge,
    /// The true γ, for calibration runs on synthetic data.
    Oracle,
}

/// Estimated background coefficients over the full background space
/// (zeros where no submodel contributes).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    pub gamma_hat: DVector<f64>,
    pub intercept: f64,
    pub method: GammaMethod,
}

impl GammaEstimate {
    pub fn oracle(gamma: DVector<f64>) -> Self {
        Self { gamma_hat: gamma, intercept: 0.0, method: GammaMethod::Oracle }
    }

    pub fn zeros(q: usize) -> Self {
        Self { gamma_hat: DVector::zeros(q), intercept: 0.0, method: GammaMethod::Oracle }
    }
}

/// γ̂(S): OLS of Y on `[1, W_S]`, coefficients placed at S, zero elsewhere.
pub fn gamma_hat_submodel(y: &DVector<f64>, w: &DMatrix<f64>, s: &[usize]) -> Result<GammaEstimate> {
    Ok(submodel_fit(y, w, s)?.0)
}

fn submodel_fit(y: &DVector<f64>, w: &DMatrix<f64>, s: &[usize]) -> Result<(GammaEstimate, DVector<f64>)> {
    let q = w.ncols();
    check_subset(s, q)?;
    if y.len() != w.nrows() {
        return Err(Error::DimensionMismatch("y and w row counts differ".into()));
    }
    let required = s.len() + 2;
    if y.len() < required {
        return Err(Error::InsufficientSamples { rows: y.len(), required });
    }
    let ws = w.select_columns(s);
    let labels: Vec<String> = s.iter().map(|i| format!("w{}", i + 1)).collect();
    let fit = ols_fit_labeled(y, &ws, true, &labels)?;
    let mut gamma_hat = DVector::zeros(q);
    for (k, &i) in s.iter().enumerate() {
        gamma_hat[i] = fit.coefficients[k + 1];
    }
    let est = GammaEstimate { gamma_hat, intercept: fit.coefficients[0], method: GammaMethod::SingleSubset };
    Ok((est, fit.residuals))
}

/// Submodel weights for [`model_average_gamma`].
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    Uniform,
    Explicit(Vec<f64>),
}

/// `Σ_j w_j γ̂(S_j)` over the family.
pub fn model_average_gamma(
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    family: &SubsetFamily,
    weights: &Weighting,
) -> Result<GammaEstimate> {
    let m = family.len();
    if family.q() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "family is over {} features, w has {}",
            family.q(),
            w.ncols()
        )));
    }
    let (weights, method) = match weights {
        Weighting::Uniform => (alloc::vec![1.0 / m as f64; m], GammaMethod::UniformAverage),
        Weighting::Explicit(v) => {
            check_simplex(v, m)?;
            (v.clone(), GammaMethod::WeightedAverage)
        }
    };
    let mut gamma_hat = DVector::zeros(w.ncols());
    let mut intercept = 0.0;
    for (s, wj) in family.iter().zip(&weights) {
        if *wj == 0.0 {
            continue;
        }
        let est = gamma_hat_submodel(y, w, s)?;
        gamma_hat.axpy(*wj, &est.gamma_hat, 1.0);
        intercept += wj * est.intercept;
    }
    Ok(GammaEstimate { gamma_hat, intercept, method })
}

fn check_simplex(v: &[f64], m: usize) -> Result<()> {
    if v.len() != m {
        return Err(Error::InvalidWeights(format!("{} weights for {m} submodels", v.len())));
    }
    if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InformationCriterion {
    Aic,
    Bic,
}

/// Per-submodel scores `ℓ log σ̂_j² + 2 k_j` (AIC) or `ℓ log σ̂_j² + 2 k_j log ℓ`
/// (BIC), with `σ̂_j² = ‖residual_j‖² / ℓ` and `k_j = |S_j|`.
pub fn xic_scores(
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    family: &SubsetFamily,
    kind: InformationCriterion,
) -> Result<Vec<f64>> {
    let n = y.len() as f64;
    let scale = center(y).0.norm_squared();
    family
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let (_, resid) = submodel_fit(y, w, s)?;
            let rss = resid.norm_squared();
            let sigma2 = rss / n;
            if !(rss > 1e-24 * scale) || rss == 0.0 {
                return Err(Error::DegenerateFit(j));
            }
            let k = s.len() as f64;
            let penalty = match kind {
                InformationCriterion::Aic => 2.0 * k,
                InformationCriterion::Bic => 2.0 * k * n.ln(),
            };
            Ok(n * sigma2.ln() + penalty)
        })
        .collect()
}

/// `exp(-score/2)` normalised to the simplex, shifted by the minimum score
/// so large scores cannot overflow.
pub fn weights_from_scores(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = scores.iter().map(|s| (-(s - min) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Smoothed-AIC / smoothed-BIC weights over the family.
pub fn xic_weights(
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    family: &SubsetFamily,
    kind: InformationCriterion,
) -> Result<Vec<f64>> {
    Ok(weights_from_scores(&xic_scores(y, w, family, kind)?))
}

/// Model average with S-AIC or S-BIC weights.
pub fn xic_average_gamma(
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    family: &SubsetFamily,
    kind: InformationCriterion,
) -> Result<GammaEstimate> {
    let weights = xic_weights(y, w, family, kind)?;
    let mut est = model_average_gamma(y, w, family, &Weighting::Explicit(weights))?;
    est.method = match kind {
        InformationCriterion::Aic => GammaMethod::SmoothedAic,
        InformationCriterion::Bic => GammaMethod::SmoothedBic,
    };
    Ok(est)
}

/// Ridge regression of a response on centred background columns via the
/// thin SVD of the centred design; the intercept is unpenalised.
#[derive(Debug, Clone)]
pub struct Ridge {
    u: DMatrix<f64>,
    singular: DVector<f64>,
    v_t: DMatrix<f64>,
    means: DVector<f64>,
    rows: usize,
}

impl Ridge {
    pub fn new(w: &DMatrix<f64>) -> Result<Self> {
        let rows = w.nrows();
        if rows < 2 {
            return Err(Error::InsufficientSamples { rows, required: 2 });
        }
        let (wc, means) = center_columns(w);
        if w.ncols() == 0 {
            return Ok(Self {
                u: DMatrix::zeros(rows, 0),
                singular: DVector::zeros(0),
                v_t: DMatrix::zeros(0, 0),
                means,
                rows,
            });
        }
        let svd = SVD::new(wc, true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        Ok(Self { u, singular: svd.singular_values, v_t, means, rows })
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    fn shrink(&self, lambda: f64) -> Result<DVector<f64>> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("ridge penalty must be finite and >= 0, got {lambda}")));
        }
        let smax = self.singular.max();
        self.singular
            .iter()
            .map(|&s| {
                if lambda == 0.0 && s <= 1e-10 * smax {
                    Err(Error::InvalidParameter("rank-deficient background with zero ridge penalty".into()))
                } else {
                    Ok(s / (s * s + lambda))
                }
            })
            .collect::<Result<Vec<f64>>>()
            .map(DVector::from_vec)
    }

    /// Coefficients at penalty `lambda`.
    pub fn fit(&self, y: &DVector<f64>, lambda: f64) -> Result<GammaEstimate> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch("y and w row counts differ".into()));
        }
        let (yc, ymean) = center(y);
        let gamma_hat = if self.n_features() == 0 {
            DVector::zeros(0)
        } else {
            let f = self.shrink(lambda)?;
            let uty = self.u.tr_mul(&yc);
            self.v_t.tr_mul(&uty.component_mul(&f))
        };
        let intercept = ymean - self.means.dot(&gamma_hat);
        Ok(GammaEstimate { gamma_hat, intercept, method: GammaMethod::Ridge })
    }

    /// Hat-matrix diagonal weights `s²/(s²+λ)`.
    fn smoother_weights(&self, lambda: f64) -> Result<DVector<f64>> {
        let f = self.shrink(lambda)?;
        Ok(self.singular.component_mul(&f))
    }

    /// Ridge residual of `v`: `(I - H_λ)(v - mean v)`.
    pub fn residualize(&self, v: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
        let (vc, _) = center(v);
        if self.n_features() == 0 {
            return Ok(vc);
        }
        let h = self.smoother_weights(lambda)?;
        let coef = self.u.tr_mul(&vc).component_mul(&h);
        Ok(vc - &self.u * coef)
    }

    /// Precomputed residual operator for repeated use at a fixed λ.
    pub fn residual_operator(&self, lambda: f64) -> Result<RidgeResidualizer<'_>> {
        let h = if self.n_features() == 0 { DVector::zeros(0) } else { self.smoother_weights(lambda)? };
        Ok(RidgeResidualizer { ridge: self, h })
    }

    /// Generalised cross-validation score
    /// `n ‖(I - H)y‖² / (n - 1 - tr H)²`, the `1` counting the intercept.
    pub fn gcv(&self, y: &DVector<f64>, lambda: f64) -> Result<f64> {
        let resid = self.residualize(y, lambda)?;
        let tr = if self.n_features() == 0 { 0.0 } else { self.smoother_weights(lambda)?.sum() };
        let n = self.rows as f64;
        let denom = n - 1.0 - tr;
        if denom <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(n * resid.norm_squared() / (denom * denom))
    }

    /// The grid point minimising GCV (first one on ties).
    pub fn gcv_lambda(&self, y: &DVector<f64>, grid: &[f64]) -> Result<f64> {
        let mut best = (f64::INFINITY, f64::NAN);
        for &lambda in grid {
            let score = self.gcv(y, lambda)?;
            if score < best.0 {
                best = (score, lambda);
            }
        }
        if best.1.is_nan() {
            return Err(Error::InvalidParameter("empty or degenerate ridge grid".into()));
        }
        Ok(best.1)
    }
}

/// See [`Ridge::residual_operator`].
#[derive(Debug, Clone)]
pub struct RidgeResidualizer<'a> {
    ridge: &'a Ridge,
    h: DVector<f64>,
}

impl RidgeResidualizer<'_> {
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let (vc, _) = center(v);
        if self.ridge.n_features() == 0 {
            return vc;
        }
        let coef = self.ridge.u.tr_mul(&vc).component_mul(&self.h);
        vc - &self.ridge.u * coef
    }
}

/// `argmin ‖Y - 1c - Wγ‖² + λ‖γ‖²`.
pub fn ridge_fit(y: &DVector<f64>, w: &DMatrix<f64>, lambda: f64) -> Result<GammaEstimate> {
    Ridge::new(w)?.fit(y, lambda)
}

/// Log-spaced GCV grid `10^-3 ..= 10^3` in quarter decades.
pub fn default_ridge_grid() -> Vec<f64> {
    (0..=24).map(|i| 10f64.powf(-3.0 + 0.25 * i as f64)).collect()
}

/// A labelled row of the classical OLS summary.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRow {
    pub name: String,
    pub coef: f64,
    pub stderr: f64,
    pub t: f64,
    pub p: f64,
}

/// Classical OLS summary of Y on `[1, X, W]`.
#[cfg(feature = "std")]
pub fn ols_inference_table(data: &Dataset) -> Result<Vec<InferenceRow>> {
    let design = stack_design(data.rows(), false, &[data.x(), data.w()]);
    let labels: Vec<String> = data.names_x().iter().chain(data.names_w()).cloned().collect();
    let fit = ols_fit_labeled(data.y(), &design, true, &labels)?;
    let (Some(se), Some(t), Some(p)) = (&fit.stderr, &fit.t_stats, &fit.p_values) else {
        return Err(Error::InsufficientSamples { rows: data.rows(), required: design.ncols() + 2 });
    };
    let names = core::iter::once(String::from("intercept")).chain(labels);
    Ok(names
        .enumerate()
        .map(|(j, name)| InferenceRow { name, coef: fit.coefficients[j], stderr: se[j], t: t[j], p: p[j] })
        .collect())
}
