//! Verification layer for `x'(t) = f(x(t), x(t-1))`: method-of-steps
//! simulation, residuals, zero numbers and discretized Floquet analysis.

mod floquet;
mod history;
mod simulate;
mod zero;

use thiserror::Error;

use crate::expr::ExprError;
use crate::nonlinearity::Nonlinearity;
use crate::ode::IntegrationError;

pub use floquet::{
    converged_spectrum, floquet, monodromy, monodromy_with, orbit_spectrum, Coefficients, Convergence, FloquetSpectrum,
    LinearizationCoefficients, Multiplier, DEFAULT_EPS_SPEC, MIN_MONODROMY_MESH,
};
pub use history::{HistorySegment, MIN_MESH};
pub use simulate::{simulate, DelaySolution, BLOW_UP};
pub use zero::{sign_changes, zero_number, SignChanges};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdeError {
    #[error("history mesh N = {0} is below the minimum")]
    InvalidMesh(usize),
    #[error("history sample {0} is not finite")]
    NonFiniteHistory(usize),
    #[error("simulation span {0} must be positive")]
    InvalidSpan(f64),
    #[error("solution blew up (|x| > 1e12) at t = {t}")]
    BlowUp { t: f64 },
    #[error("segment vanishes identically; the zero number is undefined")]
    ZeroSegment,
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("eigenvalue computation produced non-finite values")]
    EigenFailure,
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Field(#[from] ExprError),
}

/// A scalar `T`-periodic function with derivative access.
pub trait PeriodicSignal: Sync {
    fn period(&self) -> f64;
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
}

/// A periodic signal given by closures.
pub struct FnSignal<F, G> {
    pub period: f64,
    pub value: F,
    pub derivative: G,
}

impl<F, G> PeriodicSignal for FnSignal<F, G>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    fn period(&self) -> f64 {
        self.period
    }

    fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    fn derivative(&self, t: f64) -> f64 {
        (self.derivative)(t)
    }
}

/// Number of sample points used by [`residual`].
pub const RESIDUAL_SAMPLES: usize = 512;

/// `sup |x'(t) - f(x(t), x(t-1))|` over 512 points of one period.
pub fn residual<S: PeriodicSignal + ?Sized>(nl: &Nonlinearity, x: &S) -> Result<f64, ExprError> {
    let period = x.period();
    let mut worst: f64 = 0.0;
    for i in 0..RESIDUAL_SAMPLES {
        let t = period * i as f64 / RESIDUAL_SAMPLES as f64;
        let r = x.derivative(t) - nl.value(x.value(t), x.value(t - 1.0))?;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}
