//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A layer stack failed validation (ordering, positivity, emptiness).
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),

    /// A job configuration failed validation.
    #[error("invalid job: {0}")]
    InvalidJob(String),

    /// A scale factor was asked to materialize outside the representable band.
    #[error("scale factor out of representable range (log magnitude {0:.3})")]
    ScaleOutOfRange(f64),

    /// The 2x2 interface system was numerically singular at a quadrature node
    /// even after the one-time node nudge.
    #[error("singular interface system at k_z = {0:?} (|det| = {1:.3e})")]
    SingularInterfaceSystem(num_complex::Complex64, f64),

    /// A 2x2 matrix inversion hit a vanishing determinant.
    #[error("singular 2x2 matrix (|det| = {0:.3e})")]
    SingularMatrix(f64),

    /// The truncation search for the standard path never saw the integrand
    /// decay below the cutoff ratio; the bent path must be used instead.
    #[error("standard-path probe never decays (last half-width {0:.6e}); use the bent path")]
    ProbeNeverDecays(f64),

    /// The adaptive refinement loop exhausted its iteration budget.
    #[error(
        "no convergence after {iterations} refinements (last relative change {last_err:.3e}, \
         tolerance {tol:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        last_err: f64,
        tol: f64,
    },

    /// A quadrature node landed exactly on a radial-wavenumber branch
    /// point; the integration path must keep clear of these.
    #[error("quadrature node at k_z = {0:?} coincides with a branch point")]
    BranchPointNode(num_complex::Complex64),

    /// Job-file syntax or schema problem.
    #[error("job file: {0}")]
    JobFile(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
