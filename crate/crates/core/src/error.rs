use thiserror::Error;

/// Failure modes of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("resource guard: {what} with N={n} exceeds the supported maximum N={max}")]
    ResourceGuard { what: &'static str, n: usize, max: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("reflection symmetry violated: block leakage {leakage:.3e} exceeds tolerance {tol:.1e}")]
    SymmetryViolation { leakage: f64, tol: f64 },
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("operator has zero norm")]
    ZeroNorm,
    #[error("operator has no weight in size sector {0}")]
    EmptySector(usize),
    #[error("steady state is not unique: {0} eigenvalues at zero")]
    DegenerateSteadyState(usize),
    #[error("no realization for seed {0}")]
    MissingSeed(u64),
    #[error("fixture parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("integrator step size underflow (dt = {0:.3e})")]
    StepUnderflow(f64),
    #[error("cache format error: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
