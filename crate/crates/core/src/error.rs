use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("history lookup at t = {query} outside buffered range [{start}, {end}]")]
    Lookup { query: f64, start: f64, end: f64 },

    #[error("simulation diverged at t = {t}: {what}")]
    Divergence { t: f64, what: String },

    #[error("estimate left the projection set: |theta_hat| = {norm} > {limit}")]
    ProjectionViolation { norm: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
