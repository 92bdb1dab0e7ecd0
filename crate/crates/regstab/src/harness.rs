//! Type-I error and power studies over synthetic SEM data.
//!
//! Per experiment, A, B and γ are drawn once from `(seed, Params, ..)`.
//! Each arm freezes its own β (zero for the null arm). Replicate `i` gets
//! the seed `derive_seed(seed, Replicate, i)`, which fixes its subsets and
//! permutations; the arms then differ only through β and the noise
//! stream index. Reps run in parallel and are aggregated by index, so the
//! report does not depend on the number of threads.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use regstab_core::baselines::{double_residualization_test, freedman_lane_test};
use regstab_core::data::{Dataset, SubsetFamily};
use regstab_core::oracle::{condition_strength, limit_constant_null};
use regstab_core::permtest::type1_bound_estimate;
use regstab_core::pipeline::{rs_test, Nuisance, RsOptions};
use regstab_core::regression::GammaEstimate;
use regstab_core::rng::{derive_seed, stream, Purpose};
use regstab_core::sem::{sample_dataset, PriorKind, SemDesign, SemParams};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpec {
    Sphere,
    Gaussian,
    StudentT { df: f64 },
}

impl From<PriorSpec> for PriorKind {
    fn from(p: PriorSpec) -> Self {
        match p {
            PriorSpec::Sphere => PriorKind::Sphere,
            PriorSpec::Gaussian => PriorKind::Gaussian,
            PriorSpec::StudentT { df } => PriorKind::StudentT { df },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Random selection, uniform model averaging, permutation test.
    Rs,
    /// As `Rs` but with the true γ as nuisance estimate.
    RsOracle,
    RsAic,
    RsBic,
    Fl,
    Dr,
    /// External methods that are not implemented; reported as unavailable.
    Js,
    Bm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rs => "rs",
            Method::RsOracle => "rs_oracle",
            Method::RsAic => "rs_aic",
            Method::RsBic => "rs_bic",
            Method::Fl => "fl",
            Method::Dr => "dr",
            Method::Js => "js",
            Method::Bm => "bm",
        }
    }

    pub fn available(self) -> bool {
        !matches!(self, Method::Js | Method::Bm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub q: usize,
    pub r: usize,
    pub ell: usize,
    pub rho_beta: f64,
    pub rho_gamma: f64,
    pub beta_prior: PriorSpec,
    pub gamma_prior: PriorSpec,
    pub m: usize,
    pub k: usize,
    pub permutations: usize,
    pub alphas: Vec<f64>,
    pub reps: usize,
    /// W columns (0-based) that exist in the model but are never observed.
    pub hidden: Vec<usize>,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Entry variance of A (default 1/d).
    #[serde(default)]
    pub a_variance: Option<f64>,
    /// Entry variance of B (default 1/q).
    #[serde(default)]
    pub b_variance: Option<f64>,
    /// Ridge penalty for FL/DR (default GCV).
    #[serde(default)]
    pub ridge_lambda: Option<f64>,
}

impl ExperimentConfig {
    /// Desk-scale defaults for the comparison study with all of W observed.
    pub fn table1_setting1() -> Self {
        Self {
            d: 1,
            q: 300,
            r: 5,
            ell: 100,
            rho_beta: 1.5,
            rho_gamma: 10.0,
            beta_prior: PriorSpec::Sphere,
            gamma_prior: PriorSpec::Sphere,
            m: 200,
            k: 10,
            permutations: 199,
            alphas: vec![0.05, 0.01],
            reps: 200,
            hidden: Vec::new(),
            methods: vec![Method::Rs],
            seed: 0,
            threads: None,
            a_variance: None,
            b_variance: None,
            ridge_lambda: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AppError::Config(msg));
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        if self.d == 0 || self.q == 0 || self.r == 0 || self.ell == 0 {
            return bad("d, q, r and ell must be >= 1".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha {a} is not in (0, 1)"));
        }
        if let Some(h) = self.hidden.iter().find(|h| **h >= self.q) {
            return bad(format!("hidden column {h} is outside 0..{}", self.q));
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.permutations == 0 || self.m == 0 {
            return bad("m and permutations must be >= 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        Ok(())
    }

    /// Observed W columns in increasing order.
    pub fn visible(&self) -> Vec<usize> {
        let mut hidden = self.hidden.clone();
        hidden.sort_unstable();
        hidden.dedup();
        (0..self.q).filter(|i| hidden.binary_search(i).is_err()).collect()
    }

    fn design(&self) -> SemDesign {
        let mut design = SemDesign::new(self.d, self.q, self.r, 0.0, self.rho_gamma);
        design.beta_prior = self.beta_prior.into();
        design.gamma_prior = self.gamma_prior.into();
        design.a_variance = self.a_variance;
        design.b_variance = self.b_variance;
        design
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub alpha: f64,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub available: bool,
    /// One entry per rep; `None` for a quarantined (failed) rep.
    pub p_values: Vec<Option<f64>>,
    pub failures: usize,
    /// First error message among failed reps.
    pub first_error: Option<String>,
    /// Fraction of successful reps with `p <= alpha`.
    pub rates: Vec<RateEntry>,
}

impl MethodReport {
    pub fn successful(&self) -> usize {
        self.p_values.iter().flatten().count()
    }

    pub fn rate(&self, alpha: f64) -> Option<f64> {
        self.rates.iter().find(|r| r.alpha == alpha).map(|r| r.rejection_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    /// `null` or `power`.
    pub setting: String,
    pub rho_beta: f64,
    pub methods: Vec<MethodReport>,
    /// Mean over reps of `√M ‖W(γ - γ̂)‖ / (2σ_y)` for the uniform-average γ̂.
    pub mean_type1_bound: Option<f64>,
}

impl ArmReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDiagnostics {
    /// `(1/m) Σ ‖C(S_j)‖_F²` for the first rep's subsets (lifted to all of W).
    pub condition_strength: Option<f64>,
    /// `tr(Σ)/m`, single latent only.
    pub sigma_strength: Option<f64>,
    pub limit_constant_null: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub arms: Vec<ArmReport>,
    pub diagnostics: OracleDiagnostics,
    pub elapsed_secs: f64,
}

impl ExperimentReport {
    pub fn arm(&self, setting: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.setting == setting)
    }
}

/// Random selection + model averaging + permutation test on one dataset,
/// restricted to the visible background columns.
pub fn run_rs_pipeline(data: &Dataset, config: &ExperimentConfig, seed: u64) -> Result<f64> {
    let visible = config.visible();
    if visible.is_empty() {
        return Err(AppError::Config("every background column is hidden".into()));
    }
    let observed = data.select_background(&visible)?;
    let opts = RsOptions { m: config.m, k: config.k, permutations: config.permutations, nuisance: Nuisance::Uniform, seed };
    Ok(rs_test(&observed, &opts)?.test.p_value)
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

struct RepOutcome {
    p: Vec<std::result::Result<f64, String>>,
    bound: Option<f64>,
}

fn run_rep(
    config: &ExperimentConfig,
    params: &SemParams,
    visible: &[usize],
    arm_index: u64,
    rep: usize,
) -> RepOutcome {
    let rep_seed = derive_seed(config.seed, Purpose::Replicate, rep as u64);
    let noise_seed = derive_seed(rep_seed, Purpose::Noise, arm_index);
    let full = match sample_dataset(params, config.ell, noise_seed) {
        Ok(d) => d,
        Err(e) => {
            return RepOutcome { p: config.methods.iter().map(|_| Err(e.to_string())).collect(), bound: None };
        }
    };
    let data = match full.select_background(visible) {
        Ok(d) => d,
        Err(e) => {
            return RepOutcome { p: config.methods.iter().map(|_| Err(e.to_string())).collect(), bound: None };
        }
    };
    let gamma_visible = DVector::from_iterator(visible.len(), visible.iter().map(|&i| params.gamma[i]));
    let mut bound = None;
    let p = config
        .methods
        .iter()
        .map(|&method| {
            let rs = |nuisance: Nuisance| {
                rs_test(&data, &RsOptions { m: config.m, k: config.k, permutations: config.permutations, nuisance, seed: rep_seed })
            };
            let result = match method {
                Method::Rs => rs(Nuisance::Uniform).map(|out| {
                    let mut lifted = DVector::zeros(config.q);
                    for (j, &i) in visible.iter().enumerate() {
                        lifted[i] = out.gamma_hat.gamma_hat[j];
                    }
                    bound = type1_bound_estimate(
                        full.w(),
                        &params.gamma,
                        &GammaEstimate::oracle(lifted),
                        params.sigma_y,
                        config.permutations,
                    )
                    .ok();
                    out.test.p_value
                }),
                Method::RsOracle => rs(Nuisance::Given(GammaEstimate::oracle(gamma_visible.clone()))).map(|o| o.test.p_value),
                Method::RsAic => rs(Nuisance::SmoothedAic).map(|o| o.test.p_value),
                Method::RsBic => rs(Nuisance::SmoothedBic).map(|o| o.test.p_value),
                Method::Fl => freedman_lane_test(&data, config.ridge_lambda, config.permutations, rep_seed).map(|r| r.p_value),
                Method::Dr => {
                    double_residualization_test(&data, config.ridge_lambda, config.permutations, rep_seed).map(|r| r.p_value)
                }
                Method::Js | Method::Bm => return Err("method not available".to_string()),
            };
            result.map_err(|e| e.to_string())
        })
        .collect();
    RepOutcome { p, bound }
}

fn rates(p_values: &[Option<f64>], alphas: &[f64]) -> Vec<RateEntry> {
    let ok: Vec<f64> = p_values.iter().flatten().copied().collect();
    alphas
        .iter()
        .map(|&alpha| RateEntry {
            alpha,
            rejection_rate: if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().filter(|p| **p <= alpha).count() as f64 / ok.len() as f64
            },
        })
        .collect()
}

fn run_arm(config: &ExperimentConfig, params: &SemParams, setting: &str, arm_index: u64) -> ArmReport {
    let visible = config.visible();
    let outcomes: Vec<RepOutcome> =
        (0..config.reps).into_par_iter().map(|rep| run_rep(config, params, &visible, arm_index, rep)).collect();
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            if !method.available() {
                return MethodReport {
                    method,
                    available: false,
                    p_values: Vec::new(),
                    failures: 0,
                    first_error: None,
                    rates: Vec::new(),
                };
            }
            let p_values: Vec<Option<f64>> = outcomes.iter().map(|o| o.p[mi].as_ref().ok().copied()).collect();
            let first_error = outcomes.iter().find_map(|o| o.p[mi].as_ref().err().cloned());
            MethodReport {
                method,
                available: true,
                failures: p_values.iter().filter(|p| p.is_none()).count(),
                rates: rates(&p_values, &config.alphas),
                p_values,
                first_error,
            }
        })
        .collect();
    let bounds: Vec<f64> = outcomes.iter().filter_map(|o| o.bound).collect();
    ArmReport {
        setting: setting.to_string(),
        rho_beta: params.rho_beta(),
        methods,
        mean_type1_bound: (!bounds.is_empty()).then(|| bounds.iter().sum::<f64>() / bounds.len() as f64),
    }
}

fn diagnostics(config: &ExperimentConfig, params: &SemParams) -> OracleDiagnostics {
    let visible = config.visible();
    let empty = OracleDiagnostics { condition_strength: None, sigma_strength: None, limit_constant_null: None };
    let rep_seed = derive_seed(config.seed, Purpose::Replicate, 0);
    let Ok(family) = regstab_core::selection::random_selection(visible.len(), config.k, config.m, rep_seed) else {
        return empty;
    };
    let Ok(lifted) = SubsetFamily::lift(&family, &visible, config.q) else {
        return empty;
    };
    let strength = condition_strength(params, &lifted).ok();
    OracleDiagnostics {
        condition_strength: strength.map(|s| s.0),
        sigma_strength: strength.and_then(|s| s.1),
        limit_constant_null: limit_constant_null(params, &lifted).ok(),
    }
}

/// Null arm (β = 0) and, when `rho_beta > 0`, a power arm with β drawn
/// once from the β prior.
pub fn run_type1_power_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let base = config.design().generate(derive_seed(config.seed, Purpose::Params, 0))?;
    let null = base.with_beta(DVector::zeros(config.d))?;
    let mut arms_params = vec![("null", null)];
    if config.rho_beta > 0.0 {
        let prior: PriorKind = config.beta_prior.into();
        let beta = prior.sample(config.d, config.rho_beta, &mut stream(config.seed, Purpose::Arm, 1))?;
        arms_params.push(("power", base.with_beta(beta)?));
    }
    let (arms, diagnostics) = with_pool(config.threads, || {
        let arms: Vec<ArmReport> = arms_params
            .iter()
            .enumerate()
            .map(|(i, (setting, params))| run_arm(config, params, setting, i as u64))
            .collect();
        (arms, diagnostics(config, &arms_params[0].1))
    })?;
    Ok(ExperimentReport { config: config.clone(), arms, diagnostics, elapsed_secs: start.elapsed().as_secs_f64() })
}

/// One experiment per `q`, everything else fixed.
pub fn run_q_sweep(config: &ExperimentConfig, q_list: &[usize]) -> Result<Vec<ExperimentReport>> {
    if q_list.is_empty() {
        return Err(AppError::Config("empty q list".into()));
    }
    if q_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AppError::Config("q list must be strictly increasing".into()));
    }
    q_list
        .iter()
        .map(|&q| run_type1_power_experiment(&ExperimentConfig { q, ..config.clone() }))
        .collect()
}
