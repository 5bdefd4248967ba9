//! Error type shared by every module of the toolkit.

use thiserror::Error;

/// Failure modes reported by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BarkleyError {
    /// A parameter violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A bracketed root search found no sign change.
    #[error("no root: {0}")]
    NoRoot(String),
    /// The state sits on the pole `u = c` of the slow equation.
    #[error("state is at the wave-speed pole: |u - c| = {gap:e}")]
    PoleAtWaveSpeed { gap: f64 },
    /// A 3x3 spectrum contains a genuinely complex pair.
    #[error("complex eigenvalue pair with imaginary part {imag:e}")]
    ComplexSpectrum { imag: f64 },
    /// An eigenvalue vanishes to tolerance.
    #[error("eigenvalue {value:e} is within tolerance of zero")]
    NotHyperbolic { value: f64 },
    /// The point is not a zero of the reaction terms.
    #[error("({q}, {u}) is not a zero of the reaction terms")]
    NotAnEquilibrium { q: f64, u: f64 },
    /// Adaptive quadrature hit its subdivision limit.
    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),
    /// The integrand did not decay inside the truncation limit.
    #[error("integrand does not decay within |x| <= {limit}")]
    NonDecaying { limit: f64 },
    /// A sign probe could not reach a stable verdict.
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    /// The trajectory left every bounded region.
    #[error("trajectory blew up at xi = {xi}")]
    BlowUp { xi: f64 },
    /// The adaptive integrator could not keep the step size above its floor.
    #[error("step size underflow at xi = {xi}")]
    StepSizeUnderflow { xi: f64 },
    /// A Newton or secant iteration failed to converge.
    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),
    /// Principal eigenvalue ratios must exceed one.
    #[error("eigenvalue ratios must exceed 1 (beta1 = {beta1}, beta2 = {beta2})")]
    InvalidRatios { beta1: f64, beta2: f64 },
    /// The N-front gap parameter must lie in (0, 1).
    #[error("rho must lie in (0, 1), got {0}")]
    InvalidRho(f64),
    /// The PDE grid does not resolve the front.
    #[error("grid too coarse: dx = {dx} exceeds {limit}")]
    GridTooCoarse { dx: f64, limit: f64 },
    /// The explicit time step breaks the stability bound.
    #[error("CFL number {cfl} exceeds {limit}")]
    CflViolation { cfl: f64, limit: f64 },
    /// A field value became NaN or infinite.
    #[error("non-finite value in field at t = {t}")]
    NonFinite { t: f64 },
    /// The tracked level crossing vanished or left the domain.
    #[error("front lost: {0}")]
    LostFront(String),
    /// The base profile still changes shape too quickly.
    #[error("profile not settled: shape change rate {rate:e}")]
    NotSettled { rate: f64 },
}

impl BarkleyError {
    /// True for errors caused by malformed or out-of-range input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            BarkleyError::InvalidInput(_)
                | BarkleyError::InvalidRatios { .. }
                | BarkleyError::InvalidRho(_)
                | BarkleyError::GridTooCoarse { .. }
                | BarkleyError::CflViolation { .. }
        )
    }
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, BarkleyError>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(BarkleyError::InvalidInput(format!("{name} must be finite, got {value}")))
    }
}
