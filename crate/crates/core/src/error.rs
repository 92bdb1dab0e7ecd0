use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid subset size k={k} for q={q}: need 1 <= k < q")]
    InvalidSubsetSize { k: usize, q: usize },

    #[error("cannot partition {q} features into proper blocks of size {k}")]
    Partition { q: usize, k: usize },

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    /// Every coefficient vector was zero, so the statistic is 0/0.
    /// `replicate` is `None` for the observed data and `Some(i)` for the
    /// i-th permutation replicate (0-based).
    #[error("stability statistic undefined (all coefficient vectors are zero){}", replicate_suffix(*.replicate))]
    UndefinedStatistic { replicate: Option<usize> },

    #[error("singular design: column `{column}` is linearly dependent on earlier columns")]
    SingularDesign { column: String },

    #[error("insufficient samples: have {rows} rows, need at least {required}")]
    InsufficientSamples { rows: usize, required: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("degenerate fit: residual variance of submodel {0} is zero")]
    DegenerateFit(usize),

    #[error("degenerate residuals: {0}")]
    DegenerateResiduals(String),

    #[error("limit constant undefined: no confounding through any subset")]
    UndefinedLimit,

    #[error("Sigma matrix is rank deficient (min eigenvalue {min_eigenvalue:e})")]
    RankDeficient { min_eigenvalue: f64 },

    #[error("operation requires a single latent confounder (r = 1), got r = {0}")]
    RequiresSingleLatent(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("population covariance is not positive definite")]
    NotPositiveDefinite,
}

fn replicate_suffix(replicate: Option<usize>) -> String {
    match replicate {
        Some(i) => alloc::format!(" in permutation replicate {i}"),
        None => String::new(),
    }
}
