//! Error types shared across the toolkit.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone)]
pub enum Error {
    /// A diagonal entry of the symbol matrix is (numerically) zero, so the
    /// resolvent of the free operator does not exist at this momentum.
    #[error("singular free operator: diagonal entry of D_k has magnitude {magnitude:.3e} at mode ({m},{n})")]
    SingularDk { m: i64, n: i64, magnitude: f64 },

    /// Requested a restriction to a larger cutoff than the operator carries.
    #[error("bad truncation: target cutoff {target} exceeds operator cutoff {actual}")]
    BadTruncation { target: usize, actual: usize },

    /// Iterative solver failed to reach the requested residual tolerance.
    #[error("solver did not converge: best residuals {best_residuals:?} (tol {tol:.3e})")]
    NotConverged { best_residuals: Vec<f64>, tol: f64 },

    /// Shift-invert was asked to factor at (numerically) an eigenvalue.
    #[error("shift {shift:?} coincides with an eigenvalue to working precision")]
    SingularShift { shift: (f64, f64) },

    /// Fewer data points available than requested.
    #[error("insufficient data: requested {requested}, found {found}")]
    InsufficientData { requested: usize, found: usize },

    /// The scan objective has no interior peak over the search window.
    #[error("flat objective over [{lo}, {hi}]: log-variation {variation:.3e}")]
    FlatObjective { lo: f64, hi: f64, variation: f64 },

    /// Two near-zero singular values make the kernel sector projection ambiguous.
    #[error("degenerate kernel: two smallest singular values {s0:.3e}, {s1:.3e}")]
    DegenerateKernel { s0: f64, s1: f64 },

    /// A theta-quotient pole coincides with an evaluation node.
    #[error("denominator pole on evaluation grid near z = {z:?}")]
    PoleOnGrid { z: (f64, f64) },

    /// The Green's function was evaluated at a lattice point.
    #[error("evaluation point z = {z:?} lies on the lattice")]
    PoleAtLattice { z: (f64, f64) },

    /// The lattice sum K is not defined at gamma = 0.
    #[error("lattice sum requested at gamma = 0")]
    ZeroGamma,

    /// Truncation parameter outside the validity domain of a bound.
    #[error("bad truncation parameter N = {n}: {reason}")]
    BadN { n: usize, reason: String },

    /// Theta functions require Im tau > 0.
    #[error("invalid theta modulus: Im tau = {im_tau} must be positive")]
    BadTau { im_tau: f64 },

    /// Another eigenvalue intrudes into the localization disc.
    #[error("eigenvalue not isolated: second eigenvalue at distance {distance:.3e} < 2*eps = {two_eps:.3e}")]
    EigenvalueNotIsolated { distance: f64, two_eps: f64 },

    /// One of the certification inequalities failed.
    #[error("certification failed: {inequality} (lhs {lhs:.6e} >= rhs {rhs:.6e})")]
    CertificationFailed {
        inequality: String,
        lhs: f64,
        rhs: f64,
    },

    /// Precondition violation that does not fit a more specific variant.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
