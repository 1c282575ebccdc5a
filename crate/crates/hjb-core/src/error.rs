use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure modes of the
/// individual modules so callers can match on what actually went wrong.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("monotonicity violation: {0}")]
    MonotonicityViolation(String),

    #[error("improper shift {shift}: properness requires shift <= -gamma = {minus_gamma}")]
    ImproperShift { shift: f64, minus_gamma: f64 },

    #[error("linear solve failure: {0}")]
    LinearSolveFailure(String),

    #[error("sub/super pair not ordered: {0}")]
    NotOrdered(String),

    #[error("not a sub/super-solution pair: {0}")]
    NotSubSuper(String),

    #[error("no convergence after {iters} iterations ({what})")]
    NoConvergence { what: String, iters: usize },

    #[error("iterate lost interior sign-definiteness at node {node}")]
    SignLoss { node: usize },

    #[error("right-hand side is (numerically) a multiple of the principal eigenfunction")]
    DegenerateRHS,

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("declared asymptotic bound violated: {0}")]
    BoundViolated(String),

    #[error("no branch seed found: {0}")]
    NoSeed(String),

    #[error("continuation stalled: {0}")]
    Stalled(String),

    #[error("unsupported operator for this oracle: {0}")]
    UnsupportedOperator(String),

    #[error("degenerate differences in Richardson estimate")]
    DegenerateDifferences,

    #[error("non-monotone solvability scan: {0}")]
    NonMonotoneScan(String),

    #[error("configuration error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("expression error: {0}")]
    Expr(String),
}

pub type Result<T> = std::result::Result<T, Error>;
