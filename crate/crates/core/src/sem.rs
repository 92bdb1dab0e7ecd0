//! Linear structural equation model with latent confounders:
//!
//! ```text
//! Z = N_z                     (r)
//! W = A Z + N_w               (q)
//! X = B Z + N_x               (d)
//! Y = β'X + γ'W + N_y
//! ```
//!
//! with independent Gaussian noises of diagonal covariance.
//!
//! Seed mapping for [`generate_sem_params`]: A, B, β, γ come from streams
//! `(seed, Params, 0..4)` respectively. [`sample_dataset`] draws all rows from
//! stream `(seed, Noise, 0)`, row by row, in the order z, n_w, n_x, n_y.

use alloc::format;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// One standard Gaussian draw.
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Full generative description of the SEM.
#[derive(Debug, Clone, PartialEq)]
pub struct SemParams {
    /// q×r loadings of Z on W.
    pub a: DMatrix<f64>,
    /// d×r loadings of Z on X.
    pub b: DMatrix<f64>,
    /// Causal coefficients (d).
    pub beta: DVector<f64>,
    /// Background coefficients (q).
    pub gamma: DVector<f64>,
    pub sigma_z: DVector<f64>,
    pub sigma_w: DVector<f64>,
    pub sigma_x: DVector<f64>,
    pub sigma_y: f64,
}

impl SemParams {
    /// Parameters with unit noise scales.
    pub fn with_unit_noise(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        beta: DVector<f64>,
        gamma: DVector<f64>,
    ) -> Result<Self> {
        let (q, r) = a.shape();
        let d = b.nrows();
        let p = Self {
            a,
            b,
            beta,
            gamma,
            sigma_z: DVector::from_element(r, 1.0),
            sigma_w: DVector::from_element(q, 1.0),
            sigma_x: DVector::from_element(d, 1.0),
            sigma_y: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (q, r) = self.a.shape();
        let d = self.b.nrows();
        if d == 0 || q == 0 || r == 0 {
            return Err(Error::InvalidParameter(format!("need d, q, r >= 1, got d={d} q={q} r={r}")));
        }
        let shapes_ok = self.b.ncols() == r
            && self.beta.len() == d
            && self.gamma.len() == q
            && self.sigma_z.len() == r
            && self.sigma_w.len() == q
            && self.sigma_x.len() == d;
        if !shapes_ok {
            return Err(Error::DimensionMismatch("inconsistent SEM parameter shapes".into()));
        }
        let positive = |v: &DVector<f64>| v.iter().all(|s| *s > 0.0 && s.is_finite());
        if !positive(&self.sigma_z) || !positive(&self.sigma_w) || !positive(&self.sigma_x) || !(self.sigma_y > 0.0) {
            return Err(Error::InvalidParameter("noise scales must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.b.nrows()
    }
    pub fn q(&self) -> usize {
        self.a.nrows()
    }
    pub fn r(&self) -> usize {
        self.a.ncols()
    }
    /// ρ_β = ‖β‖
    pub fn rho_beta(&self) -> f64 {
        self.beta.norm()
    }
    /// ρ_γ = ‖γ‖
    pub fn rho_gamma(&self) -> f64 {
        self.gamma.norm()
    }

    pub fn with_beta(&self, beta: DVector<f64>) -> Result<Self> {
        let mut p = self.clone();
        p.beta = beta;
        p.validate()?;
        Ok(p)
    }

    pub fn with_gamma(&self, gamma: DVector<f64>) -> Result<Self> {
        let mut p = self.clone();
        p.gamma = gamma;
        p.validate()?;
        Ok(p)
    }
}

/// Prior used for drawing β or γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorKind {
    /// Uniform on the sphere of radius ρ.
    Sphere,
    /// i.i.d. N(0, ρ²/dim) entries; the norm is random.
    Gaussian,
    /// Student-t direction rescaled to norm ρ.
    StudentT { df: f64 },
}

impl PriorKind {
    pub const DEFAULT_STUDENT_DF: f64 = 2.2;

    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, radius: f64, rng: &mut R) -> Result<DVector<f64>> {
        match *self {
            PriorKind::Sphere => sample_sphere_with(dim, radius, rng),
            PriorKind::Gaussian => sample_gaussian_prior_with(dim, radius, rng),
            PriorKind::StudentT { df } => sample_student_prior_with(dim, df, radius, rng),
        }
    }
}

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| normal(rng))
}

fn rescale_to_radius<R: Rng + ?Sized>(
    dim: usize,
    radius: f64,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> DVector<f64>,
) -> Result<DVector<f64>> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be finite and >= 0, got {radius}")));
    }
    if radius == 0.0 {
        return Ok(DVector::zeros(dim));
    }
    loop {
        let v = draw(rng);
        let n = v.norm();
        if n > 0.0 && n.is_finite() {
            return Ok(v.map(|x| x / n * radius));
        }
    }
}

fn sample_sphere_with<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Result<DVector<f64>> {
    rescale_to_radius(dim, radius, rng, |r| gaussian_vector(dim, r))
}

fn sample_gaussian_prior_with<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Result<DVector<f64>> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be >= 0, got {radius}")));
    }
    let sd = radius / (dim as f64).sqrt();
    Ok(gaussian_vector(dim, rng) * sd)
}

fn sample_student_prior_with<R: Rng + ?Sized>(dim: usize, df: f64, radius: f64, rng: &mut R) -> Result<DVector<f64>> {
    if !(df > 2.0) {
        return Err(Error::InvalidParameter(format!("Student-t prior needs df > 2, got {df}")));
    }
    let t = StudentT::new(df).map_err(|_| Error::InvalidParameter(format!("bad df {df}")))?;
    rescale_to_radius(dim, radius, rng, |r| DVector::from_fn(dim, |_, _| t.sample(r)))
}

/// Uniform draw from the sphere of radius `radius` in `dim` dimensions
/// (normalised standard Gaussian), stream `(seed, Prior, 0)`.
pub fn sample_sphere(dim: usize, radius: f64, seed: u64) -> Result<DVector<f64>> {
    sample_sphere_with(dim, radius, &mut stream(seed, Purpose::Prior, 0))
}

/// γ ~ N(0, (ρ²/q) I_q), stream `(seed, Prior, 0)`.
pub fn sample_gaussian_prior(q: usize, radius: f64, seed: u64) -> Result<DVector<f64>> {
    sample_gaussian_prior_with(q, radius, &mut stream(seed, Purpose::Prior, 0))
}

/// Heavy-tailed direction with fixed norm: `ρ γ'/‖γ'‖` with γ' i.i.d. t(df).
pub fn sample_student_prior(dim: usize, df: f64, radius: f64, seed: u64) -> Result<DVector<f64>> {
    sample_student_prior_with(dim, df, radius, &mut stream(seed, Purpose::Prior, 0))
}

/// Recipe for synthetic SEM parameters. Loading entries are i.i.d.
/// N(0, `a_variance`) for A and N(0, `b_variance`) for B; the defaults
/// are 1/d and 1/q respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct SemDesign {
    pub d: usize,
    pub q: usize,
    pub r: usize,
    pub rho_beta: f64,
    pub rho_gamma: f64,
    pub beta_prior: PriorKind,
    pub gamma_prior: PriorKind,
    pub a_variance: Option<f64>,
    pub b_variance: Option<f64>,
}

impl SemDesign {
    pub fn new(d: usize, q: usize, r: usize, rho_beta: f64, rho_gamma: f64) -> Self {
        Self {
            d,
            q,
            r,
            rho_beta,
            rho_gamma,
            beta_prior: PriorKind::Sphere,
            gamma_prior: PriorKind::Sphere,
            a_variance: None,
            b_variance: None,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<SemParams> {
        let (d, q, r) = (self.d, self.q, self.r);
        if d == 0 || q == 0 || r == 0 {
            return Err(Error::InvalidParameter(format!("need d, q, r >= 1, got d={d} q={q} r={r}")));
        }
        let a_var = self.a_variance.unwrap_or(1.0 / d as f64);
        let b_var = self.b_variance.unwrap_or(1.0 / q as f64);
        if !(a_var >= 0.0) || !(b_var >= 0.0) {
            return Err(Error::InvalidParameter("loading variances must be >= 0".into()));
        }
        let a = {
            let mut rng = stream(seed, Purpose::Params, 0);
            let sd = a_var.sqrt();
            DMatrix::from_fn(q, r, |_, _| sd * normal(&mut rng))
        };
        let b = {
            let mut rng = stream(seed, Purpose::Params, 1);
            let sd = b_var.sqrt();
            DMatrix::from_fn(d, r, |_, _| sd * normal(&mut rng))
        };
        let beta = self.beta_prior.sample(d, self.rho_beta, &mut stream(seed, Purpose::Params, 2))?;
        let gamma = self.gamma_prior.sample(q, self.rho_gamma, &mut stream(seed, Purpose::Params, 3))?;
        SemParams::with_unit_noise(a, b, beta, gamma)
    }
}

/// A, B with entries N(0, 1/d), N(0, 1/q); β, γ from `prior` with radii
/// ρ_β, ρ_γ; unit noise everywhere.
pub fn generate_sem_params(
    d: usize,
    q: usize,
    r: usize,
    rho_beta: f64,
    rho_gamma: f64,
    prior: PriorKind,
    seed: u64,
) -> Result<SemParams> {
    let mut design = SemDesign::new(d, q, r, rho_beta, rho_gamma);
    design.beta_prior = prior;
    design.gamma_prior = prior;
    design.generate(seed)
}

/// ℓ i.i.d. rows from the SEM.
pub fn sample_dataset(params: &SemParams, rows: usize, seed: u64) -> Result<Dataset> {
    params.validate()?;
    if rows == 0 {
        return Err(Error::InsufficientSamples { rows, required: 1 });
    }
    let (d, q, r) = (params.d(), params.q(), params.r());
    let mut rng = stream(seed, Purpose::Noise, 0);
    let mut x = DMatrix::zeros(rows, d);
    let mut w = DMatrix::zeros(rows, q);
    let mut y = DVector::zeros(rows);
    let mut z = DVector::zeros(r);
    let mut wi = DVector::zeros(q);
    let mut xi = DVector::zeros(d);
    for i in 0..rows {
        for k in 0..r {
            z[k] = params.sigma_z[k] * normal(&mut rng);
        }
        wi.gemv(1.0, &params.a, &z, 0.0);
        for k in 0..q {
            wi[k] += params.sigma_w[k] * normal(&mut rng);
        }
        xi.gemv(1.0, &params.b, &z, 0.0);
        for k in 0..d {
            xi[k] += params.sigma_x[k] * normal(&mut rng);
        }
        let ny: f64 = normal(&mut rng);
        y[i] = params.beta.dot(&xi) + params.gamma.dot(&wi) + params.sigma_y * ny;
        x.row_mut(i).tr_copy_from(&xi);
        w.row_mut(i).tr_copy_from(&wi);
    }
    Dataset::new(y, x, w)
}

/// `y - Xβ - Wγ`, the realised target noise.
pub fn structural_residual(params: &SemParams, data: &Dataset) -> DVector<f64> {
    data.y() - data.x() * &params.beta - data.w() * &params.gamma
}

/// Convenience for tests and diagnostics: mean and covariance of the
/// columns of a matrix (population normalisation `1/n`).
pub fn column_moments(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows() as f64;
    let mean = m.row_mean().transpose();
    let mut centered = m.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let cov = centered.transpose() * &centered / n;
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_norm_and_dim_one() {
        for seed in 0..20 {
            let v = sample_sphere(3, 2.0, seed).unwrap();
            assert!((v.norm() - 2.0).abs() < 1e-12);
            let u = sample_sphere(1, 1.0, seed).unwrap();
            assert!(u[0] == 1.0 || u[0] == -1.0);
        }
        assert_eq!(sample_sphere(4, 0.0, 1).unwrap(), DVector::zeros(4));
        assert!(sample_sphere(0, 1.0, 1).is_err());
    }

    #[test]
    fn sphere_first_coordinate_moments() {
        // U_1 for U uniform on the unit sphere in R^d has mean 0 and E U_1^2 = 1/d.
        let (dim, rho, n) = (5usize, 3.0, 100_000u64);
        let mut rng = stream(99, Purpose::Prior, 0);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = sample_sphere_with(dim, rho, &mut rng).unwrap();
            s1 += v[0] / rho;
            s2 += (v[0] / rho).powi(2);
        }
        let mean = s1 / n as f64;
        let second = s2 / n as f64;
        // Var U_1 = 1/d; Var U_1^2 = E U_1^4 - 1/d^2 = 3/(d(d+2)) - 1/d^2.
        let var_u2 = 3.0 / (dim * (dim + 2)) as f64 - 1.0 / (dim * dim) as f64;
        assert!(mean.abs() < 5.0 * (1.0 / dim as f64 / n as f64).sqrt());
        assert!((second - 1.0 / dim as f64).abs() < 5.0 * (var_u2 / n as f64).sqrt());
    }

    #[test]
    fn gaussian_prior_moments() {
        assert_eq!(sample_gaussian_prior(7, 0.0, 3).unwrap(), DVector::zeros(7));
        // E‖γ‖² = ρ² exactly; Var ‖γ‖² = 2ρ⁴/q.
        let (q, rho, n) = (40usize, 2.0, 10_000u64);
        let mut rng = stream(5, Purpose::Prior, 0);
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        let mut norms = 0.0;
        for _ in 0..n {
            let g = sample_gaussian_prior_with(q, rho, &mut rng).unwrap();
            norms += g.norm_squared();
            let head = g.rows(0, 3);
            cov += head * head.transpose();
        }
        let mean_norm = norms / n as f64;
        let sd = (2.0 * rho.powi(4) / q as f64 / n as f64).sqrt();
        assert!((mean_norm - rho * rho).abs() < 5.0 * sd);
        cov /= n as f64;
        let s2 = rho * rho / q as f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { s2 } else { 0.0 };
                // se of a product-moment: sqrt(2 s2^2 / n) on diagonal, s2/sqrt(n) off it
                let se = if i == j { (2.0f64).sqrt() * s2 } else { s2 } / (n as f64).sqrt();
                assert!((cov[(i, j)] - target).abs() < 5.0 * se, "({i},{j}) {}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn student_prior_norm_and_dominance() {
        let v = sample_student_prior(10, 2.2, 1.5, 1).unwrap();
        assert!((v.norm() - 1.5).abs() < 1e-12);
        let u = sample_student_prior(1, 2.2, 1.5, 2).unwrap();
        assert!((u[0].abs() - 1.5).abs() < 1e-15);
        assert!(sample_student_prior(3, 2.0, 1.0, 0).is_err());

        // Heavy tails concentrate the mass on a few coordinates.
        let dim = 500;
        let ratio = |v: &DVector<f64>| v.amax() / v.norm();
        let mut rng_t = stream(17, Purpose::Prior, 1);
        let mut rng_s = stream(17, Purpose::Prior, 2);
        let mut rt: Vec<f64> = (0..201).map(|_| ratio(&sample_student_prior_with(dim, 2.2, 1.0, &mut rng_t).unwrap())).collect();
        let mut rs: Vec<f64> = (0..201).map(|_| ratio(&sample_sphere_with(dim, 1.0, &mut rng_s).unwrap())).collect();
        rt.sort_by(f64::total_cmp);
        rs.sort_by(f64::total_cmp);
        assert!(rt[100] > rs[100], "student median {} vs sphere median {}", rt[100], rs[100]);
    }

    #[test]
    fn generated_params_shapes_and_variances() {
        let p = generate_sem_params(2, 400, 50, 0.0, 1.0, PriorKind::Sphere, 8).unwrap();
        assert_eq!(p.a.shape(), (400, 50));
        assert_eq!(p.b.shape(), (2, 50));
        assert_eq!(p.beta, DVector::zeros(2));
        assert!((p.rho_gamma() - 1.0).abs() < 1e-12);
        // A entries ~ N(0, 1/d) = N(0, 0.5); 20000 entries.
        let n = p.a.len() as f64;
        let var = p.a.iter().map(|v| v * v).sum::<f64>() / n;
        assert!((var - 0.5).abs() < 5.0 * 0.5 * (2.0 / n).sqrt());
        // B entries ~ N(0, 1/q)
        let vb = p.b.iter().map(|v| v * v).sum::<f64>() / p.b.len() as f64;
        assert!((vb - 1.0 / 400.0).abs() < 5.0 * (1.0 / 400.0) * (2.0 / 100.0f64).sqrt());
    }

    #[test]
    fn dataset_reproducible_and_noise_isolated() {
        let p = generate_sem_params(2, 6, 3, 1.0, 2.0, PriorKind::Sphere, 4).unwrap();
        let a = sample_dataset(&p, 200, 9).unwrap();
        let b = sample_dataset(&p, 200, 9).unwrap();
        assert_eq!(a, b);
        let big = sample_dataset(&p, 50_000, 10).unwrap();
        let e = structural_residual(&p, &big);
        let var = e.map(|v| v * v).sum() / e.len() as f64;
        assert!((var - 1.0).abs() < 5.0 * (2.0 / 50_000.0f64).sqrt());
    }

    #[test]
    fn pure_noise_target() {
        let mut p = generate_sem_params(1, 3, 2, 0.0, 0.0, PriorKind::Sphere, 4).unwrap();
        p.sigma_y = 2.0;
        let data = sample_dataset(&p, 40_000, 1).unwrap();
        let (_, cov) = column_moments(&DMatrix::from_column_slice(data.rows(), 1, data.y().as_slice()));
        assert!((cov[(0, 0)] - 4.0).abs() < 5.0 * 4.0 * (2.0 / 40_000.0f64).sqrt());
    }

    #[test]
    fn no_loadings_gives_identity_x_covariance() {
        let mut p = generate_sem_params(3, 2, 2, 0.5, 0.5, PriorKind::Sphere, 4).unwrap();
        p.a.fill(0.0);
        p.b.fill(0.0);
        let data = sample_dataset(&p, 100_000, 2).unwrap();
        let (_, cov) = column_moments(data.x());
        let se = (1.0 / 100_000.0f64).sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let t = if i == j { 1.0 } else { 0.0 };
                let tol = if i == j { 5.0 * (2.0f64).sqrt() * se } else { 5.0 * se };
                assert!((cov[(i, j)] - t).abs() < tol);
            }
        }
    }
}
