//! The associated planar system `xi' = f(xi, eta)`, `eta' = -f(eta, xi)` and
//! its return times to the section `{eta = 0, xi > 0}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::ExprError;
use crate::nonlinearity::{Feedback, Nonlinearity};
pub use crate::ode::DenseSolution;
use crate::ode::{self, dopri_step, Control, IntegrationError, Stepper, Tolerances};

/// Smallest amplitude handed to the event locator; below it the limit
/// `2 pi / |d2 f(0,0)|` is authoritative.
pub const MIN_AMPLITUDE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanarError {
    #[error("no return to the section from amplitude {amplitude} before t={cap:e}")]
    NoReturn { amplitude: f64, cap: f64 },
    #[error("orbit from amplitude {amplitude} does not close: xi(T) = {xi_end}")]
    ClosureFailure { amplitude: f64, xi_end: f64 },
    #[error("amplitude {0} is below the event-location floor {MIN_AMPLITUDE:e}")]
    AmplitudeTooSmall(f64),
    #[error("invalid time span {0}")]
    InvalidSpan(f64),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

impl From<ExprError> for PlanarError {
    fn from(e: ExprError) -> Self {
        PlanarError::Integration(IntegrationError::Field(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub xi: f64,
    pub eta: f64,
}

impl PlanarState {
    pub fn new(xi: f64, eta: f64) -> Self {
        PlanarState { xi, eta }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.xi, self.eta]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        PlanarState { xi: a[0], eta: a[1] }
    }

    /// Rotation by a quarter turn, `(xi, eta) -> (eta, -xi)`.
    pub fn rotated(self) -> Self {
        PlanarState { xi: self.eta, eta: -self.xi }
    }

    /// Reflection across the diagonal, `(xi, eta) -> (eta, xi)`.
    pub fn reflected(self) -> Self {
        PlanarState { xi: self.eta, eta: self.xi }
    }
}

pub fn vector_field(nl: &Nonlinearity, s: PlanarState) -> Result<PlanarState, ExprError> {
    Ok(PlanarState { xi: nl.value(s.xi, s.eta)?, eta: -nl.value(s.eta, s.xi)? })
}

fn field(nl: &Nonlinearity, direction: f64) -> impl FnMut(f64, &[f64; 2]) -> Result<[f64; 2], ExprError> + '_ {
    move |_t, y| {
        let v = vector_field(nl, PlanarState::from_array(*y))?;
        Ok([direction * v.xi, direction * v.eta])
    }
}

/// Forward solution on `[0, t_end]`.
pub fn integrate(
    nl: &Nonlinearity,
    s0: PlanarState,
    t_end: f64,
    tol: Tolerances,
) -> Result<DenseSolution<2>, PlanarError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(PlanarError::InvalidSpan(t_end));
    }
    Ok(ode::integrate(field(nl, 1.0), 0.0, s0.to_array(), t_end, tol)?)
}

/// Solution of the time-reversed field on `[0, t_end]`, so `sol.eval(tau)` is
/// the state at time `-tau`.
pub fn integrate_backward(
    nl: &Nonlinearity,
    s0: PlanarState,
    t_end: f64,
    tol: Tolerances,
) -> Result<DenseSolution<2>, PlanarError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(PlanarError::InvalidSpan(t_end));
    }
    Ok(ode::integrate(field(nl, -1.0), 0.0, s0.to_array(), t_end, tol)?)
}

/// Forward solution with a mesh node at every time in `stops` (increasing,
/// positive, the last one being the end time).
pub fn integrate_through(
    nl: &Nonlinearity,
    s0: PlanarState,
    stops: &[f64],
    tol: Tolerances,
) -> Result<DenseSolution<2>, PlanarError> {
    match stops.last() {
        Some(&t_end) if t_end > 0.0 && t_end.is_finite() => {
            Ok(ode::integrate_with_stops(field(nl, 1.0), 0.0, s0.to_array(), stops, tol)?)
        }
        other => Err(PlanarError::InvalidSpan(other.copied().unwrap_or(0.0))),
    }
}

/// Flow map for a signed time `t`.
pub fn flow(nl: &Nonlinearity, s0: PlanarState, t: f64, tol: Tolerances) -> Result<PlanarState, PlanarError> {
    if t == 0.0 {
        return Ok(s0);
    }
    let sol = if t > 0.0 { integrate(nl, s0, t, tol)? } else { integrate_backward(nl, s0, -t, tol)? };
    Ok(PlanarState::from_array(sol.last().0))
}

/// `2 pi / |d2 f(0,0)|`, the continuous extension of the period map to zero amplitude.
pub fn period_at_zero(nl: &Nonlinearity) -> f64 {
    2.0 * PI / nl.origin_rate()
}

/// One full turn of the orbit through `(a, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTime {
    pub period: f64,
    /// Dense solution on `[0, period]`; the last node is the return point.
    pub solution: DenseSolution<2>,
}

/// First return of the orbit through `(a, 0)` to `{eta = 0, xi > 0}` with the
/// same crossing direction as at `t = 0`.
///
/// The crossing is bracketed on mesh nodes, bisected on the Hermite
/// interpolant, then polished with Newton steps on the Runge-Kutta step map
/// from the last accepted node.
pub fn return_time(nl: &Nonlinearity, a: f64, tol: Tolerances) -> Result<ReturnTime, PlanarError> {
    if !a.is_finite() || a < MIN_AMPLITUDE {
        return Err(PlanarError::AmplitudeTooSmall(a));
    }
    let cap = 1e6 / nl.origin_rate();
    let y0 = [a, 0.0];
    let mut rhs = field(nl, 1.0);
    let start = rhs(0.0, &y0)?;
    // direction in which eta leaves the section
    let dir = start[1].signum();
    if dir == 0.0 {
        return Err(PlanarError::NoReturn { amplitude: a, cap });
    }
    let guess = period_at_zero(nl).min(cap);
    let mut stepper = Stepper::new(rhs, 0.0, y0, guess, tol)?;
    let mut sol = DenseSolution::new(0.0, y0, start);
    let mut crossed = false;
    stepper.run_until(cap, |t, y, dy| {
        let (prev_y, _) = sol.last();
        sol.push(t, *y, *dy);
        if prev_y[1] * dir < 0.0 && y[1] * dir >= 0.0 && y[0] > 0.0 {
            crossed = true;
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    if !crossed {
        return Err(PlanarError::NoReturn { amplitude: a, cap });
    }
    let k = sol.len() - 2;
    let (t_prev, y_prev, dy_prev) = (sol.times()[k], sol.states()[k], sol.derivs()[k]);
    let t_next = sol.t_end();

    // bisection on the interpolant
    let (mut lo, mut hi) = (t_prev, t_next);
    let mut root = hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let eta = sol.eval(mid)[1];
        root = mid;
        if eta.abs() < 1e-12 || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if eta * dir < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton on the one-step map
    let step_tol = stepper.tolerances();
    let rhs = stepper.rhs();
    let mut state = sol.eval(root);
    for _ in 0..8 {
        let h = root - t_prev;
        if h <= 0.0 {
            break;
        }
        let (y, dy, _) = dopri_step(rhs, t_prev, &y_prev, &dy_prev, h, step_tol)?;
        state = y;
        if dy[1] == 0.0 {
            break;
        }
        let delta = y[1] / dy[1];
        let next = (root - delta).clamp(t_prev + 0.5 * (root - t_prev), t_next);
        let done = (next - root).abs() <= 2.0 * f64::EPSILON * root;
        root = next;
        if done {
            let (y, _, _) = dopri_step(rhs, t_prev, &y_prev, &dy_prev, root - t_prev, step_tol)?;
            state = y;
            break;
        }
    }
    let dy_root = rhs(root, &state)?;
    sol.truncate(k);
    if root > t_prev {
        sol.push(root, state, dy_root);
    }
    if (state[0] - a).abs() >= 1e-7 * a.max(1.0) {
        return Err(PlanarError::ClosureFailure { amplitude: a, xi_end: state[0] });
    }
    Ok(ReturnTime { period: root, solution: sol })
}

/// Time shift `s` with `eta(t) = xi(t - s)` along every orbit.
pub fn quarter_shift(feedback: Feedback, period: f64) -> f64 {
    match feedback {
        Feedback::Positive => 0.75 * period,
        Feedback::Negative => 0.25 * period,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryResiduals {
    pub amplitude: f64,
    pub period: f64,
    /// `max |eta(t) - xi(t - s)|` with the shift matching the feedback sign.
    pub shift: f64,
    /// Same with the shift of the opposite feedback class.
    pub wrong_shift: f64,
    /// `max |xi(t) - xi(-t)|`
    pub even: f64,
    /// `max |eta(t) + eta(-t)|`
    pub odd: f64,
}

impl SymmetryResiduals {
    pub fn max_valid(&self) -> f64 {
        self.shift.max(self.even).max(self.odd)
    }
}

fn periodic_xi(sol: &DenseSolution<2>, period: f64, t: f64) -> f64 {
    let mut s = t.rem_euclid(period);
    // snap to the node grid so shifted samples hit nodes exactly
    let k = sol.step_index(s);
    for node in [k, k + 1] {
        if let Some(&tn) = sol.times().get(node) {
            if (tn - s).abs() <= 1e-12 * period {
                s = tn;
            }
        }
    }
    sol.eval(s)[0]
}

pub fn symmetry_residuals(nl: &Nonlinearity, a: f64, tol: Tolerances) -> Result<SymmetryResiduals, PlanarError> {
    const SAMPLES: usize = 64;
    let period = return_time(nl, a, tol)?.period;
    // all sample times and their quarter shifts fall on mesh nodes
    let stops: Vec<f64> = (1..=SAMPLES).map(|i| period * i as f64 / SAMPLES as f64).collect();
    let y0 = [a, 0.0];
    let fwd = &ode::integrate_with_stops(field(nl, 1.0), 0.0, y0, &stops, tol)?;
    let back = ode::integrate_with_stops(field(nl, -1.0), 0.0, y0, &stops, tol)?;
    let right = quarter_shift(nl.feedback(), period);
    let wrong = quarter_shift(nl.feedback().flipped(), period);
    let mut out = SymmetryResiduals { amplitude: a, period, shift: 0.0, wrong_shift: 0.0, even: 0.0, odd: 0.0 };
    for i in 0..SAMPLES {
        let t = period * i as f64 / SAMPLES as f64;
        let [xi, eta] = fwd.eval(t);
        let [xi_back, eta_back] = back.eval(t);
        out.shift = out.shift.max((eta - periodic_xi(fwd, period, t - right)).abs());
        out.wrong_shift = out.wrong_shift.max((eta - periodic_xi(fwd, period, t - wrong)).abs());
        out.even = out.even.max((xi - xi_back).abs());
        out.odd = out.odd.max((eta + eta_back).abs());
    }
    Ok(out)
}

/// Net number of turns about the origin, positive counterclockwise.
pub fn winding_number(sol: &DenseSolution<2>) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let times = sol.times();
    for w in times.windows(2) {
        for j in 0..8 {
            let t = w[0] + (w[1] - w[0]) * j as f64 / 8.0;
            let [x, y] = sol.eval(t);
            let angle = y.atan2(x);
            if let Some(p) = prev {
                let mut d = angle - p;
                if d > PI {
                    d -= 2.0 * PI;
                } else if d < -PI {
                    d += 2.0 * PI;
                }
                total += d;
            }
            prev = Some(angle);
        }
    }
    let [x, y] = sol.last().0;
    if let Some(p) = prev {
        let mut d = y.atan2(x) - p;
        if d > PI {
            d -= 2.0 * PI;
        } else if d < -PI {
            d += 2.0 * PI;
        }
        total += d;
    }
    total / (2.0 * PI)
}
