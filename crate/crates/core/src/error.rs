//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by geometry, collision, solver, harness and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Refined and unrefined quadratures disagree by more than the tolerance.
    #[error("quadrature error: {what} (coarse {coarse:.17e}, refined {refined:.17e}, tolerance {tolerance:e})")]
    Quadrature {
        what: String,
        coarse: f64,
        refined: f64,
        tolerance: f64,
    },
    /// A turning-point root could not be isolated.
    #[error("root error: {0}")]
    Root(String),
    /// A potential profile failed shape validation at construction.
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    /// A grid is malformed (odd cell count, misaligned separatrix, non-positive widths).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    /// Transport or Vlasov Courant number above the admissible bound.
    #[error("CFL violation: {0}")]
    Cfl(String),
    /// The implicit relaxation solve did not reach its residual target.
    #[error("implicit solve did not converge: {0}")]
    NonConvergence(String),
    /// The fine tangential grid does not resolve the potential oscillation.
    #[error("resolution error: {0}")]
    Resolution(String),
    /// Explicit diffusion time step above the stability bound.
    #[error("stability error: {0}")]
    Stability(String),
    /// Two profiles compared on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    /// Syntax error in a configuration file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// One or more semantic violations in a configuration.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    /// Filesystem failure, with the path or stage at fault.
    #[error("I/O error ({context}): {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
