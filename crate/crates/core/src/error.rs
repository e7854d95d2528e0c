use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("matrix has a non-finite entry")]
    NonFinite,
    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:.3e})")]
    NotHermitian { max_asymmetry: f64 },
    #[error("declared trace {declared} does not match computed trace {computed}")]
    TraceMismatch { declared: f64, computed: f64 },
    #[error("negative trace {0}")]
    NegativeTrace(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("parameter {name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("filter annihilates the state (success probability {0:.3e})")]
    FilterAnnihilates(f64),
    #[error("filter has rank 0")]
    ZeroFilter,
    #[error("condition violated: {0}")]
    Condition(String),
    #[error("{count} deterministic strategies exceed the enumeration limit {limit}")]
    TooManyStrategies { count: f64, limit: usize },
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("conic solver failed: {0}")]
    Solver(String),
    #[error("problem infeasible: {0}")]
    Infeasible(String),
    #[error("certificate rejected: {0}")]
    Rejected(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    range: &'static str,
) -> Result<()> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(Error::OutOfRange { name, value, range });
    }
    Ok(())
}
