use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(
        "integration did not converge after {panels} panels (residual {residual:e}, partial value {partial})"
    )]
    Integration {
        partial: Complex64,
        residual: f64,
        panels: usize,
    },

    #[error("spinor vanishes at this point; Cayley-Klein angles are undefined")]
    Node,

    #[error("Theta is 0 or pi: Bohmian momentum and energy are infinite")]
    InfiniteMomentum,

    #[error("Omega is +-pi/2: secant is undefined")]
    UndefinedSecant,

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("no sign change in bracket [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },

    #[error("integrator failure at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("omega*t = {omega_t} does not exceed j0/2; the cap cut is undefined")]
    DomainCut { omega_t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
