//! Population (infinite-sample) quantities of the SEM.
//!
//! With `L = [B; A] diag(σ_z)` the joint covariance of `(X, W)` is
//! `L L' + diag(σ_x², σ_w²)` and `Cov((X, W), Y) = Var(X, W) [β; γ]`.
//! The population β̂(S) is the top-d block of the normal-equation solution on
//! `(X, W_S)`; the confounding map `C(S)` is the linear map `γ -> β̂(S) - β`,
//! whose columns at indices in S vanish.
//!
//! The single-latent closed forms use precision weights:
//! `‖b‖_x² = Σ b_i²/σ_{x,i}²`, `‖a_S‖_S² = Σ_{i∈S} a_i²/σ_{w,i}²` and the
//! direction `(b_i/σ_{x,i}²)_i`, with σ_z folded into a and b.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use crate::data::SubsetFamily;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::sem::{normal, SemParams};

/// Second moments of `(X, W)` for given parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationModel {
    pub params: SemParams,
    /// `(d+q)×(d+q)` covariance of `(X, W)`, X first.
    pub cov_xw: DMatrix<f64>,
}

impl PopulationModel {
    /// `Cov((X, W), Y)` for coefficients `(β, γ)`.
    pub fn cov_xw_y(&self, beta: &DVector<f64>, gamma: &DVector<f64>) -> DVector<f64> {
        &self.cov_xw * stack(beta, gamma)
    }
}

fn stack(beta: &DVector<f64>, gamma: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(beta.len() + gamma.len(), beta.iter().chain(gamma.iter()).copied())
}

/// `[B; A] diag(σ_z)`.
fn loadings(p: &SemParams) -> DMatrix<f64> {
    let (d, q, r) = (p.d(), p.q(), p.r());
    let mut l = DMatrix::zeros(d + q, r);
    l.rows_mut(0, d).copy_from(&p.b);
    l.rows_mut(d, q).copy_from(&p.a);
    for (k, s) in p.sigma_z.iter().enumerate() {
        l.column_mut(k).scale_mut(*s);
    }
    l
}

fn noise_variances(p: &SemParams) -> DVector<f64> {
    DVector::from_iterator(p.d() + p.q(), p.sigma_x.iter().chain(p.sigma_w.iter()).map(|s| s * s))
}

/// Rows `idx` of the `(X, W)` covariance, without forming the full matrix.
fn cov_rows(l: &DMatrix<f64>, noise: &DVector<f64>, idx: &[usize]) -> DMatrix<f64> {
    let l_idx = l.select_rows(idx);
    let mut out = &l_idx * l.transpose();
    for (row, &i) in idx.iter().enumerate() {
        out[(row, i)] += noise[i];
    }
    out
}

pub fn population_covariance(params: &SemParams) -> Result<PopulationModel> {
    params.validate()?;
    let l = loadings(params);
    let mut cov_xw = &l * l.transpose();
    for (i, v) in noise_variances(params).iter().enumerate() {
        cov_xw[(i, i)] += v;
    }
    Ok(PopulationModel { params: params.clone(), cov_xw })
}

fn check_subset(s: &[usize], q: usize) -> Result<()> {
    if s.windows(2).any(|w| w[0] >= w[1]) || s.last().is_some_and(|&i| i >= q) {
        return Err(Error::InvalidSubset(format!("subset {s:?} is not a sorted subset of 0..{q}")));
    }
    Ok(())
}

/// Index set `X ∪ W_S` within the joint `(X, W)` ordering.
fn joint_index(d: usize, s: &[usize]) -> Vec<usize> {
    (0..d).chain(s.iter().map(|i| d + i)).collect()
}

/// The factorised normal equations for `(X, W_S)`.
struct SubsetSystem {
    chol: Cholesky<f64, nalgebra::Dyn>,
    /// Rows `X ∪ W_S` of the joint covariance.
    rows: DMatrix<f64>,
}

impl SubsetSystem {
    fn new(params: &SemParams, s: &[usize]) -> Result<Self> {
        params.validate()?;
        check_subset(s, params.q())?;
        let d = params.d();
        let idx = joint_index(d, s);
        let rows = cov_rows(&loadings(params), &noise_variances(params), &idx);
        let var_sub = rows.select_columns(&idx);
        let chol = Cholesky::new(var_sub).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { chol, rows })
    }
}

/// β̂(S) = top-d block of `Var(X, W_S)^{-1} Cov((X, W_S), Y)`.
pub fn population_beta_hat(params: &SemParams, s: &[usize]) -> Result<DVector<f64>> {
    let sys = SubsetSystem::new(params, s)?;
    let rhs = &sys.rows * stack(&params.beta, &params.gamma);
    Ok(sys.chol.solve(&rhs).rows(0, params.d()).into_owned())
}

/// `C(S)` together with its subset.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfoundingMap {
    pub s: Vec<usize>,
    /// d×q.
    pub c_matrix: DMatrix<f64>,
}

/// `C(S)` from the covariance solve: column k is β̂(S) for β = 0, γ = e_k.
pub fn confounding_matrix(params: &SemParams, s: &[usize]) -> Result<ConfoundingMap> {
    let sys = SubsetSystem::new(params, s)?;
    let (d, q) = (params.d(), params.q());
    let cross = sys.rows.columns(d, q).into_owned();
    let mut c_matrix = sys.chol.solve(&cross).rows(0, d).into_owned();
    for &i in s {
        c_matrix.column_mut(i).fill(0.0);
    }
    Ok(ConfoundingMap { s: s.to_vec(), c_matrix })
}

/// Folded single-latent quantities: `a σ_z`, `b σ_z`.
struct SingleLatent {
    a: DVector<f64>,
    /// `(b_i / σ_{x,i}²)_i`.
    direction: DVector<f64>,
    /// `1 + ‖b‖_x²`.
    base: f64,
    /// `a_i² / σ_{w,i}²`.
    a_prec: DVector<f64>,
}

impl SingleLatent {
    fn new(p: &SemParams) -> Result<Self> {
        p.validate()?;
        if p.r() != 1 {
            return Err(Error::RequiresSingleLatent(p.r()));
        }
        let sz = p.sigma_z[0];
        let a = p.a.column(0) * sz;
        let b = p.b.column(0) * sz;
        let direction = b.component_div(&p.sigma_x.component_mul(&p.sigma_x));
        let base = 1.0 + b.dot(&direction);
        let a_prec = DVector::from_fn(a.len(), |i, _| a[i] * a[i] / (p.sigma_w[i] * p.sigma_w[i]));
        Ok(Self { a, direction, base, a_prec })
    }

    fn denominator(&self, s: &[usize]) -> f64 {
        self.base + s.iter().map(|&i| self.a_prec[i]).sum::<f64>()
    }

    fn masked_a(&self, s: &[usize]) -> DVector<f64> {
        let mut a = self.a.clone();
        for &i in s {
            a[i] = 0.0;
        }
        a
    }
}

/// Single-latent closed form
/// `C(S) = Dx⁻¹b (a_{S^c})' / (1 + ‖b‖_x² + ‖a_S‖_S²)`.
pub fn confounding_matrix_r1(params: &SemParams, s: &[usize]) -> Result<ConfoundingMap> {
    check_subset(s, params.q())?;
    let sl = SingleLatent::new(params)?;
    let c_matrix = &sl.direction * sl.masked_a(s).transpose() / sl.denominator(s);
    Ok(ConfoundingMap { s: s.to_vec(), c_matrix })
}

/// `Σ_ij = ‖a_{S_i^c ∩ S_j^c}‖² / (den_i den_j)`, single latent only.
pub fn sigma_matrix(params: &SemParams, family: &SubsetFamily) -> Result<DMatrix<f64>> {
    check_family(params, family)?;
    let sl = SingleLatent::new(params)?;
    let masked: Vec<DVector<f64>> = family.iter().map(|s| sl.masked_a(s)).collect();
    let dens: Vec<f64> = family.iter().map(|s| sl.denominator(s)).collect();
    let m = family.len();
    Ok(DMatrix::from_fn(m, m, |i, j| masked[i].dot(&masked[j]) / (dens[i] * dens[j])))
}

/// `v_j = a_{S_j^c}' γ_{S_j^c} / den_j`, so that `C(S_j) γ = v_j Dx⁻¹b`.
pub fn v_vector(params: &SemParams, family: &SubsetFamily, gamma: &DVector<f64>) -> Result<DVector<f64>> {
    check_family(params, family)?;
    if gamma.len() != params.q() {
        return Err(Error::DimensionMismatch("gamma length differs from q".into()));
    }
    let sl = SingleLatent::new(params)?;
    Ok(DVector::from_iterator(
        family.len(),
        family.iter().map(|s| sl.masked_a(s).dot(gamma) / sl.denominator(s)),
    ))
}

fn check_family(params: &SemParams, family: &SubsetFamily) -> Result<()> {
    if family.q() != params.q() {
        return Err(Error::DimensionMismatch(format!(
            "family is over {} features, model has {}",
            family.q(),
            params.q()
        )));
    }
    Ok(())
}

fn family_maps(params: &SemParams, family: &SubsetFamily) -> Result<Vec<DMatrix<f64>>> {
    check_family(params, family)?;
    family.iter().map(|s| confounding_matrix(params, s).map(|c| c.c_matrix)).collect()
}

/// `1 - tr(C_m'C_m) / tr(C̃_m)` with `C_m` the mean of `C(S_j)` and
/// `C̃_m` the mean of `C(S_j)'C(S_j)`.
pub fn limit_constant_null(params: &SemParams, family: &SubsetFamily) -> Result<f64> {
    let maps = family_maps(params, family)?;
    let m = maps.len() as f64;
    let mut mean = DMatrix::zeros(params.d(), params.q());
    let mut tr_tilde = 0.0;
    for c in &maps {
        mean += c;
        tr_tilde += c.norm_squared();
    }
    mean /= m;
    tr_tilde /= m;
    if !(tr_tilde > 0.0) {
        return Err(Error::UndefinedLimit);
    }
    Ok((1.0 - mean.norm_squared() / tr_tilde).max(0.0))
}

/// Single-latent form `1 - e'Σe / tr(Σ)` with `e = 1/√m`.
pub fn limit_constant_null_r1(params: &SemParams, family: &SubsetFamily) -> Result<f64> {
    let sigma = sigma_matrix(params, family)?;
    let tr = sigma.trace();
    if !(tr > 0.0) {
        return Err(Error::UndefinedLimit);
    }
    Ok((1.0 - sigma.sum() / family.len() as f64 / tr).max(0.0))
}

/// `((1/m) Σ ‖C(S_j)‖_F², tr(Σ)/m)`, the second only for a single latent.
pub fn condition_strength(params: &SemParams, family: &SubsetFamily) -> Result<(f64, Option<f64>)> {
    let maps = family_maps(params, family)?;
    let m = maps.len() as f64;
    let first = maps.iter().map(|c| c.norm_squared()).sum::<f64>() / m;
    let second = if params.r() == 1 { Some(sigma_matrix(params, family)?.trace() / m) } else { None };
    Ok((first, second))
}

/// Population stability statistic and the closed form
/// `1 - γ'C_m'C_mγ / γ'C̃_mγ` for β = 0.
pub fn stability_identity(params: &SemParams, family: &SubsetFamily, gamma: &DVector<f64>) -> Result<(f64, f64)> {
    if params.beta.iter().any(|b| *b != 0.0) {
        return Err(Error::InvalidParameter("stability identity needs beta = 0".into()));
    }
    let p = params.with_gamma(gamma.clone())?;
    let maps = family_maps(&p, family)?;
    let coeffs: Vec<DVector<f64>> = family.iter().map(|s| population_beta_hat(&p, s)).collect::<Result<_>>()?;
    let set = crate::stability::CoefficientSet::new(coeffs)?;
    let v_pop = crate::stability::stability_statistic(&set)?;
    let m = maps.len() as f64;
    let mut mean = DVector::zeros(p.d());
    let mut quad = 0.0;
    for c in &maps {
        let cg = c * gamma;
        quad += cg.norm_squared();
        mean += cg;
    }
    mean /= m;
    quad /= m;
    if !(quad > 0.0) {
        return Err(Error::UndefinedStatistic { replicate: None });
    }
    Ok((v_pop, 1.0 - mean.norm_squared() / quad))
}

/// Draws of the null stability statistic in the single-latent model,
/// `1 - (Σ c_i λ_i^{1/2} g_i)² / Σ λ_i g_i²` with `Σ = P Λ P'`,
/// `c = e'P` and standard Gaussian g from stream `(seed, Diagnostics, 0)`.
pub fn sample_null_v_r1(params: &SemParams, family: &SubsetFamily, n_draws: usize, seed: u64) -> Result<Vec<f64>> {
    let sigma = sigma_matrix(params, family)?;
    let m = sigma.nrows();
    let eig = SymmetricEigen::new(sigma);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::RankDeficient { min_eigenvalue: min });
    }
    let e = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let c = eig.eigenvectors.tr_mul(&e);
    let sqrt_l = eig.eigenvalues.map(|l| l.sqrt());
    let mut rng = stream(seed, Purpose::Diagnostics, 0);
    Ok((0..n_draws)
        .map(|_| {
            let g = DVector::from_fn(m, |_, _| normal(&mut rng));
            let num: f64 = (0..m).map(|i| c[i] * sqrt_l[i] * g[i]).sum();
            let den: f64 = (0..m).map(|i| eig.eigenvalues[i] * g[i] * g[i]).sum();
            (1.0 - num * num / den).clamp(0.0, 1.0)
        })
        .collect())
}

/// `Cov(R_Y, R_X)` for the population residuals of Y and X after projecting
/// out the intercept and `W_T` (Schur complement of `Var(W_T)`).
pub fn population_residual_cross_covariance(params: &SemParams, conditioning: &[usize]) -> Result<DVector<f64>> {
    params.validate()?;
    check_subset(conditioning, params.q())?;
    let d = params.d();
    let l = loadings(params);
    let noise = noise_variances(params);
    let theta = stack(&params.beta, &params.gamma);
    let x_idx: Vec<usize> = (0..d).collect();
    let t_idx: Vec<usize> = conditioning.iter().map(|i| d + i).collect();
    let x_rows = cov_rows(&l, &noise, &x_idx);
    let cov_xy = &x_rows * &theta;
    if t_idx.is_empty() {
        return Ok(cov_xy);
    }
    let t_rows = cov_rows(&l, &noise, &t_idx);
    let var_t = t_rows.select_columns(&t_idx);
    let cov_ty = &t_rows * &theta;
    let cov_xt = x_rows.select_columns(&t_idx);
    let chol = Cholesky::new(var_t).ok_or(Error::NotPositiveDefinite)?;
    Ok(cov_xy - cov_xt * chol.solve(&cov_ty))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{partition_selection, random_selection};
    use crate::sem::{generate_sem_params, PriorKind};
    use alloc::vec;

    fn r1(a: &[f64], b: &[f64], beta: &[f64], gamma: &[f64]) -> SemParams {
        SemParams::with_unit_noise(
            DMatrix::from_column_slice(a.len(), 1, a),
            DMatrix::from_column_slice(b.len(), 1, b),
            DVector::from_column_slice(beta),
            DVector::from_column_slice(gamma),
        )
        .unwrap()
    }

    #[test]
    fn covariance_examples() {
        let p = r1(&[1.0], &[1.0], &[0.0], &[0.0]);
        let m = population_covariance(&p).unwrap();
        assert_eq!(m.cov_xw, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let p0 = r1(&[0.0, 0.0], &[0.0], &[0.0], &[0.0, 0.0]);
        assert_eq!(population_covariance(&p0).unwrap().cov_xw, DMatrix::identity(3, 3));
    }

    #[test]
    fn beta_hat_hand_examples() {
        let p = r1(&[1.0, 1.0], &[1.0], &[0.0], &[0.0, 1.0]);
        let b = population_beta_hat(&p, &[0]).unwrap();
        assert!((b[0] - 1.0 / 3.0).abs() < 1e-14);
        // q = 1, S = ∅: β + γab/(1+b²)
        let (a, bb, g, beta) = (0.7, 1.3, -0.4, 0.25);
        let p = r1(&[a], &[bb], &[beta], &[g]);
        let v = population_beta_hat(&p, &[]).unwrap()[0];
        assert!((v - (beta + g * a * bb / (1.0 + bb * bb))).abs() < 1e-14);
    }

    #[test]
    fn blocked_path_returns_beta() {
        let mut p = generate_sem_params(3, 6, 2, 1.0, 1.0, PriorKind::Sphere, 5).unwrap();
        for i in [0, 2, 3] {
            p.gamma[i] = 0.0;
        }
        let b = population_beta_hat(&p, &[1, 4, 5]).unwrap();
        assert!((b - &p.beta).amax() < 1e-12);
    }

    #[test]
    fn linearity_and_zero_columns() {
        for seed in 0..20 {
            let p = generate_sem_params(2, 7, 3, 1.0, 2.0, PriorKind::Gaussian, seed).unwrap();
            let s = random_selection(7, 3, 1, seed).unwrap().subsets()[0].clone();
            let c = confounding_matrix(&p, &s).unwrap();
            for &i in &s {
                assert!(c.c_matrix.column(i).iter().all(|v| *v == 0.0));
            }
            let lhs = population_beta_hat(&p, &s).unwrap();
            let rhs = &p.beta + &c.c_matrix * &p.gamma;
            assert!((lhs - rhs).amax() < 1e-10);
        }
    }

    #[test]
    fn single_unobserved_feature() {
        let p = generate_sem_params(2, 5, 2, 1.0, 1.0, PriorKind::Sphere, 2).unwrap();
        for j in 0..5 {
            let s: Vec<usize> = (0..5).filter(|&i| i != j).collect();
            let c = confounding_matrix(&p, &s).unwrap().c_matrix;
            for k in 0..5 {
                assert_eq!(c.column(k).iter().all(|v| *v == 0.0), k != j);
            }
        }
    }

    #[test]
    fn no_confounding_channel() {
        let p = r1(&[0.0, 0.0, 0.0], &[1.0], &[0.5], &[1.0, 1.0, 1.0]);
        assert_eq!(confounding_matrix(&p, &[1]).unwrap().c_matrix, DMatrix::zeros(1, 3));
        assert_eq!(condition_strength(&p, &partition_selection(3, 1).unwrap()).unwrap(), (0.0, Some(0.0)));
        assert_eq!(limit_constant_null(&p, &partition_selection(3, 1).unwrap()), Err(Error::UndefinedLimit));
    }

    #[test]
    fn closed_form_with_nonunit_scales() {
        for seed in 0..30 {
            let mut p = generate_sem_params(3, 6, 1, 1.0, 1.0, PriorKind::Sphere, seed).unwrap();
            p.sigma_x = DVector::from_vec(vec![0.5, 1.7, 1.1]);
            p.sigma_w = DVector::from_fn(6, |i, _| 0.4 + 0.3 * i as f64);
            p.sigma_z[0] = 1.4;
            let s = [0usize, 3];
            let a = confounding_matrix(&p, &s).unwrap().c_matrix;
            let b = confounding_matrix_r1(&p, &s).unwrap().c_matrix;
            assert!((a - b).amax() < 1e-10);
        }
    }

    #[test]
    fn sigma_two_disjoint_subsets() {
        let p = r1(&[1.0, 1.0], &[1.0], &[0.0], &[0.0, 0.0]);
        let fam = partition_selection(2, 1).unwrap();
        let sigma = sigma_matrix(&p, &fam).unwrap();
        assert!((sigma - DMatrix::from_row_slice(2, 2, &[1.0 / 9.0, 0.0, 0.0, 1.0 / 9.0])).amax() < 1e-15);
        assert!((limit_constant_null(&p, &fam).unwrap() - 0.5).abs() < 1e-14);
        assert!((limit_constant_null_r1(&p, &fam).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn sigma_requires_single_latent() {
        let p = generate_sem_params(1, 4, 2, 1.0, 1.0, PriorKind::Sphere, 1).unwrap();
        let fam = partition_selection(4, 2).unwrap();
        assert_eq!(sigma_matrix(&p, &fam), Err(Error::RequiresSingleLatent(2)));
        assert_eq!(condition_strength(&p, &fam).unwrap().1, None);
    }

    #[test]
    fn two_limit_forms_agree_and_strength_scales() {
        for seed in 0..20 {
            let p = generate_sem_params(2, 12, 1, 1.0, 1.0, PriorKind::Sphere, seed).unwrap();
            let fam = random_selection(12, 4, 5, seed).unwrap();
            let a = limit_constant_null(&p, &fam).unwrap();
            let b = limit_constant_null_r1(&p, &fam).unwrap();
            assert!((a - b).abs() < 1e-10);
            let (c_strength, sigma_strength) = condition_strength(&p, &fam).unwrap();
            let sl = SingleLatent::new(&p).unwrap();
            assert!((c_strength - sl.direction.norm_squared() * sigma_strength.unwrap()).abs() < 1e-10);
            let sigma = sigma_matrix(&p, &fam).unwrap();
            assert!((sigma.clone() - sigma.transpose()).amax() == 0.0);
            assert!(SymmetricEigen::new(sigma).eigenvalues.min() > -1e-12);
        }
    }

    #[test]
    fn identical_subsets_limit_zero() {
        let p = generate_sem_params(2, 6, 2, 1.0, 1.0, PriorKind::Sphere, 3).unwrap();
        let fam = SubsetFamily::new(6, vec![vec![1, 2]; 4]).unwrap();
        assert!(limit_constant_null(&p, &fam).unwrap().abs() < 1e-12);
    }

    #[test]
    fn stability_identity_cases() {
        for seed in 0..20 {
            let mut p = generate_sem_params(2, 9, 3, 0.0, 1.0, PriorKind::Sphere, seed).unwrap();
            p.beta.fill(0.0);
            let fam = random_selection(9, 3, 4, seed).unwrap();
            let (v, c) = stability_identity(&p, &fam, &p.gamma).unwrap();
            assert!((v - c).abs() < 1e-10);
        }
        let mut p = generate_sem_params(1, 4, 1, 0.0, 1.0, PriorKind::Sphere, 1).unwrap();
        p.beta.fill(0.0);
        let one = SubsetFamily::new(4, vec![vec![0]]).unwrap();
        let (v, c) = stability_identity(&p, &one, &p.gamma).unwrap();
        assert!(v.abs() < 1e-12 && c.abs() < 1e-12);
        // γ supported only on indices in every subset: zero bias everywhere
        let fam = SubsetFamily::new(4, vec![vec![0, 1], vec![0, 2]]).unwrap();
        let g = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(stability_identity(&p, &fam, &g).is_err());
    }

    #[test]
    fn isotropic_sigma_null_mean() {
        // subsets leaving out one feature each, equal a: the unobserved sets
        // are disjoint, so Σ = c I and the mean of draws is ≈ 1 - 1/m
        let p = r1(&[0.5; 6], &[1.0], &[0.0], &[0.0; 6]);
        let fam = SubsetFamily::new(6, (0..6).map(|j| (0..6).filter(|&i| i != j).collect()).collect()).unwrap();
        let draws = sample_null_v_r1(&p, &fam, 20_000, 4).unwrap();
        assert!(draws.iter().all(|v| (0.0..=1.0).contains(v)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - (1.0 - 1.0 / 6.0)).abs() < 0.01, "{mean}");
    }

    #[test]
    fn rank_deficient_sigma() {
        let p = r1(&[1.0, 1.0, 1.0], &[1.0], &[0.0], &[0.0; 3]);
        let fam = SubsetFamily::new(3, vec![vec![0], vec![0]]).unwrap();
        assert!(matches!(sample_null_v_r1(&p, &fam, 5, 0), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn residual_cross_covariance() {
        let p = r1(&[2.0], &[1.0], &[0.0], &[0.5]);
        assert!((population_residual_cross_covariance(&p, &[]).unwrap()[0] - 1.0).abs() < 1e-14);
        let p = r1(&[0.0, 1.0], &[1.0], &[0.0], &[0.5, 1.0]);
        assert!(population_residual_cross_covariance(&p, &[1]).unwrap()[0].abs() < 1e-14);
        let p = r1(&[2.0, 1.0], &[1.0], &[0.0], &[0.0, 1.0]);
        assert!(population_residual_cross_covariance(&p, &[1]).unwrap()[0].abs() < 1e-14);
        // with other confounded features the value is a₁γ₁ / (1 + ‖a_{-1}‖²)
        let p = r1(&[2.0, 1.0, 0.5], &[1.0], &[0.0], &[0.5, -0.3, 0.8]);
        let v = population_residual_cross_covariance(&p, &[1, 2]).unwrap()[0];
        assert!((v - 1.0 / 2.25).abs() < 1e-12);
    }
}
