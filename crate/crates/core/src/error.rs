use thiserror::Error;

/// Errors raised by the reduction engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operation requires the two-sphere (n = 2), got n = {0}")]
    UnsupportedDimension(usize),

    #[error("harmonic index (k = {k}, m = {m}) lies outside its eigenspace")]
    InvalidHarmonic { k: usize, m: i64 },

    #[error("potential is not real-valued: coefficient at l = {l:?}, k = {k}, m = {m} has no matching conjugate partner")]
    NonRealPotential { l: Vec<i32>, k: usize, m: i64 },

    #[error("potential has {found} forcing frequencies, expected {expected}")]
    FrequencyCount { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(
        "series did not reach tolerance {tol:e} within {terms} terms (last term norm {last:e})"
    )]
    SeriesDivergence { tol: f64, terms: usize, last: f64 },

    #[error("operator has diagonal blocks of size {norm:e} above tolerance {tol:e}")]
    DiagonalNotFree { norm: f64, tol: f64 },

    #[error("smallness condition violated: {what} = {value:e} exceeds {bound:e}")]
    Smallness {
        what: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("normal form hypothesis violated: beta norm {norm:e} exceeds gamma/4 = {bound:e}")]
    NormalFormTooLarge { norm: f64, bound: f64 },

    #[error("resonant divisor {divisor:e} below {threshold:e} at l = {l:?}, k = {k}, k' = {k_prime}, j = {j}, j' = {j_prime}")]
    Resonant {
        l: Vec<i32>,
        k: usize,
        k_prime: usize,
        j: usize,
        j_prime: usize,
        divisor: f64,
        threshold: f64,
    },

    #[error("KAM iteration did not converge in {steps} steps (last eps = {last_eps:e})")]
    NotConverged { steps: usize, last_eps: f64 },

    #[error("time step {dt:e} violates the stability bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },

    #[error("non-finite state at t = {0}")]
    NonFinite(f64),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
