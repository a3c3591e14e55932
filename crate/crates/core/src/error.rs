use alloc::boxed::Box;
use alloc::string::String;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong while building or solving a problem.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two objects that must agree in shape do not.
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        /// Which quantity disagreed.
        what: &'static str,
        /// Expected size.
        expected: usize,
        /// Actual size.
        found: usize,
    },

    /// A grid description violates its own invariants.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A policy row is not a probability distribution.
    #[error("invalid policy at state {state}: {reason}")]
    InvalidPolicy {
        /// Offending state.
        state: usize,
        /// What is wrong with the row.
        reason: &'static str,
    },

    /// A configuration value is out of range. The field name is reported verbatim.
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig {
        /// Name of the offending field.
        field: &'static str,
        /// Human-readable reason.
        reason: String,
    },

    /// The chain is not strongly connected.
    #[error("chain is reducible (not strongly connected)")]
    Reducible,

    /// The chain is irreducible but periodic, or the Wielandt bound was exceeded.
    #[error("matrix is imprimitive (period {period})")]
    Imprimitive {
        /// Period of the chain, 0 when reducible.
        period: usize,
    },

    /// Projective diameter is infinite because the matrix has a zero entry.
    #[error("projective diameter is infinite: matrix has a zero entry at ({row}, {col})")]
    InfiniteDiameter {
        /// Row of the first zero found.
        row: usize,
        /// Column of the first zero found.
        col: usize,
    },

    /// A vector that must be strictly positive and finite is not.
    #[error("non-positive or non-finite entry {value} at index {index} in {what}")]
    NonPositive {
        /// Which quantity failed.
        what: &'static str,
        /// Index of the bad entry.
        index: usize,
        /// Its value.
        value: f64,
    },

    /// An iterative method ran out of iterations.
    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged {
        /// Which solver.
        what: &'static str,
        /// Iterations performed.
        iterations: usize,
        /// Residual at the last iterate.
        residual: f64,
    },

    /// Inverse temperature outside the range where the fixed point is a contraction.
    #[error("inverse temperature {0} is below 1")]
    BetaBelowOne(f64),

    /// The eigenvalue ratio `(uᵀP̃)_j / u_j` is not constant, so `u` is not an eigenvector.
    #[error("eigenvalue ratio spread {spread:e} exceeds {limit:e}")]
    RatioSpread {
        /// Relative spread `(max - min) / mean`.
        spread: f64,
        /// Allowed spread.
        limit: f64,
    },

    /// A failure inside posterior policy iteration, tagged with the outer iteration.
    #[error("posterior policy iteration failed at t = {iteration}: {source}")]
    Ppi {
        /// Outer iteration (1-based) at which the failure happened.
        iteration: usize,
        /// Underlying error.
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}
