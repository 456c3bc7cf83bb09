//! Adaptive Dormand-Prince 5(4) integration with cubic Hermite dense output.

use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t={t} (h={h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t={t}")]
    NonFinite { t: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error(transparent)]
    Field(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances { rtol, atol }
    }

    /// Relative tolerance with `atol = rtol / 100`.
    pub fn relative(rtol: f64) -> Self {
        Tolerances { rtol, atol: rtol * 1e-2 }
    }
}

/// Time-parameterized trajectory with cubic Hermite interpolation between
/// accepted steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution<const D: usize> {
    times: Vec<f64>,
    states: Vec<[f64; D]>,
    derivs: Vec<[f64; D]>,
}

impl<const D: usize> DenseSolution<D> {
    pub fn new(t0: f64, y0: [f64; D], dy0: [f64; D]) -> Self {
        DenseSolution { times: vec![t0], states: vec![y0], derivs: vec![dy0] }
    }

    /// Appends a node. Panics if `t` does not increase.
    pub fn push(&mut self, t: f64, y: [f64; D], dy: [f64; D]) {
        assert!(t > self.t_end(), "dense output nodes must increase: {t} <= {}", self.t_end());
        self.times.push(t);
        self.states.push(y);
        self.derivs.push(dy);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[[f64; D]] {
        &self.states
    }

    pub fn derivs(&self) -> &[[f64; D]] {
        &self.derivs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn last(&self) -> ([f64; D], [f64; D]) {
        let n = self.times.len() - 1;
        (self.states[n], self.derivs[n])
    }

    /// Drops every node after index `keep` (inclusive bound).
    pub fn truncate(&mut self, keep: usize) {
        self.times.truncate(keep + 1);
        self.states.truncate(keep + 1);
        self.derivs.truncate(keep + 1);
    }

    /// Index `k` of the step `[t_k, t_{k+1}]` containing `t`, clamped to the span.
    pub fn step_index(&self, t: f64) -> usize {
        let n = self.times.len();
        if n < 2 || t <= self.times[0] {
            return 0;
        }
        if t >= self.times[n - 1] {
            return n - 2;
        }
        self.times.partition_point(|&s| s <= t) - 1
    }

    /// Value and derivative at `t`. Outside the span the end steps are extrapolated.
    pub fn eval_with_derivative(&self, t: f64) -> ([f64; D], [f64; D]) {
        if self.times.len() == 1 {
            return (self.states[0], self.derivs[0]);
        }
        let k = self.step_index(t);
        if t == self.times[k] {
            return (self.states[k], self.derivs[k]);
        }
        if t == self.times[k + 1] {
            return (self.states[k + 1], self.derivs[k + 1]);
        }
        hermite(
            self.times[k],
            &self.states[k],
            &self.derivs[k],
            self.times[k + 1],
            &self.states[k + 1],
            &self.derivs[k + 1],
            t,
        )
    }

    pub fn eval(&self, t: f64) -> [f64; D] {
        self.eval_with_derivative(t).0
    }
}

fn hermite<const D: usize>(
    t0: f64,
    y0: &[f64; D],
    d0: &[f64; D],
    t1: f64,
    y1: &[f64; D],
    d1: &[f64; D],
    t: f64,
) -> ([f64; D], [f64; D]) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let g00 = (6.0 * s2 - 6.0 * s) / h;
    let g10 = 3.0 * s2 - 4.0 * s + 1.0;
    let g01 = (-6.0 * s2 + 6.0 * s) / h;
    let g11 = 3.0 * s2 - 2.0 * s;
    let mut y = [0.0; D];
    let mut dy = [0.0; D];
    for i in 0..D {
        y[i] = h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i];
        dy[i] = g00 * y0[i] + g10 * d0[i] + g01 * y1[i] + g11 * d1[i];
    }
    (y, dy)
}

// Dormand-Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One explicit Dormand-Prince step. Returns `(y_new, dy_new, error_norm)`.
///
/// `dy0` must equal `rhs(t, y0)`; `dy_new` is `rhs(t + h, y_new)` (FSAL).
pub fn dopri_step<const D: usize, F>(
    rhs: &mut F,
    t: f64,
    y0: &[f64; D],
    dy0: &[f64; D],
    h: f64,
    tol: Tolerances,
) -> Result<([f64; D], [f64; D], f64), IntegrationError>
where
    F: FnMut(f64, &[f64; D]) -> Result<[f64; D], ExprError>,
{
    let comb = |terms: &[(f64, &[f64; D])]| {
        let mut out = *y0;
        for (c, k) in terms {
            for i in 0..D {
                out[i] += h * c * k[i];
            }
        }
        out
    };
    let k1 = dy0;
    let k2 = rhs(t + C2 * h, &comb(&[(A21, k1)]))?;
    let k3 = rhs(t + C3 * h, &comb(&[(A31, k1), (A32, &k2)]))?;
    let k4 = rhs(t + C4 * h, &comb(&[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = rhs(t + C5 * h, &comb(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = rhs(t + h, &comb(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y_new = comb(&[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = rhs(t + h, &y_new)?;
    let mut err = 0.0f64;
    for i in 0..D {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = tol.atol + tol.rtol * y0[i].abs().max(y_new[i].abs());
        err = err.max((e / scale).abs());
    }
    if y_new.iter().chain(k7.iter()).any(|v| !v.is_finite()) {
        err = f64::INFINITY;
    }
    Ok((y_new, k7, err))
}

fn initial_step<const D: usize, F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64; D],
    dy0: &[f64; D],
    span: f64,
    tol: Tolerances,
) -> Result<f64, IntegrationError>
where
    F: FnMut(f64, &[f64; D]) -> Result<[f64; D], ExprError>,
{
    let scale = |i: usize| tol.atol + tol.rtol * y0[i].abs();
    let d0 = (0..D).map(|i| (y0[i] / scale(i)).powi(2)).sum::<f64>().sqrt();
    let d1 = (0..D).map(|i| (dy0[i] / scale(i)).powi(2)).sum::<f64>().sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let mut y1 = *y0;
    for i in 0..D {
        y1[i] += h0 * dy0[i];
    }
    let dy1 = rhs(t0 + h0, &y1)?;
    let d2 = (0..D).map(|i| ((dy1[i] - dy0[i]) / scale(i)).powi(2)).sum::<f64>().sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / 5.0) };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Outcome of feeding one accepted step to an observer.
pub enum Control {
    Continue,
    Stop,
}

/// Step-size controller state shared by all drivers.
pub struct Stepper<const D: usize, F> {
    rhs: F,
    tol: Tolerances,
    pub t: f64,
    pub y: [f64; D],
    pub dy: [f64; D],
    h: f64,
    pub max_steps: usize,
    steps: usize,
}

impl<const D: usize, F> Stepper<D, F>
where
    F: FnMut(f64, &[f64; D]) -> Result<[f64; D], ExprError>,
{
    pub fn new(mut rhs: F, t0: f64, y0: [f64; D], horizon: f64, tol: Tolerances) -> Result<Self, IntegrationError> {
        let dy = rhs(t0, &y0)?;
        if y0.iter().chain(dy.iter()).any(|v| !v.is_finite()) {
            return Err(IntegrationError::NonFinite { t: t0 });
        }
        let h = initial_step(&mut rhs, t0, &y0, &dy, horizon.max(f64::MIN_POSITIVE), tol)?;
        Ok(Stepper { rhs, tol, t: t0, y: y0, dy, h, max_steps: 50_000_000, steps: 0 })
    }

    pub fn rhs(&mut self) -> &mut F {
        &mut self.rhs
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// Advances by one accepted step without passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<(), IntegrationError> {
        loop {
            let remaining = t_limit - self.t;
            let mut h = self.h.min(remaining);
            // avoid a sliver of a final step
            if remaining - h < 1e-3 * h {
                h = remaining;
            }
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(IntegrationError::StepUnderflow { t: self.t, h });
            }
            self.steps += 1;
            if self.steps > self.max_steps {
                return Err(IntegrationError::TooManySteps(self.max_steps));
            }
            let (y_new, dy_new, err) = dopri_step(&mut self.rhs, self.t, &self.y, &self.dy, h, self.tol)?;
            if err <= 1.0 {
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                self.t = if h == remaining { t_limit } else { self.t + h };
                self.y = y_new;
                self.dy = dy_new;
                self.h = h * factor;
                return Ok(());
            }
            if !err.is_finite() {
                self.h = h * 0.1;
            } else {
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
    }

    /// Integrates to `t_end`, handing every accepted node to `observe`.
    pub fn run_until(
        &mut self,
        t_end: f64,
        mut observe: impl FnMut(f64, &[f64; D], &[f64; D]) -> Control,
    ) -> Result<(), IntegrationError> {
        while self.t < t_end {
            self.step(t_end)?;
            if self.y.iter().any(|v| !v.is_finite()) {
                return Err(IntegrationError::NonFinite { t: self.t });
            }
            if let Control::Stop = observe(self.t, &self.y, &self.dy) {
                break;
            }
        }
        Ok(())
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end` and records dense output.
pub fn integrate<const D: usize, F>(
    rhs: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    tol: Tolerances,
) -> Result<DenseSolution<D>, IntegrationError>
where
    F: FnMut(f64, &[f64; D]) -> Result<[f64; D], ExprError>,
{
    let mut stepper = Stepper::new(rhs, t0, y0, t_end - t0, tol)?;
    let mut sol = DenseSolution::new(t0, y0, stepper.dy);
    stepper.run_until(t_end, |t, y, dy| {
        sol.push(t, *y, *dy);
        Control::Continue
    })?;
    Ok(sol)
}

/// Like [`integrate`], with a mesh node placed exactly at every time in
/// `stops` (increasing, all after `t0`). The last stop is the end time.
pub fn integrate_with_stops<const D: usize, F>(
    rhs: F,
    t0: f64,
    y0: [f64; D],
    stops: &[f64],
    tol: Tolerances,
) -> Result<DenseSolution<D>, IntegrationError>
where
    F: FnMut(f64, &[f64; D]) -> Result<[f64; D], ExprError>,
{
    let t_end = stops.last().copied().unwrap_or(t0);
    let mut stepper = Stepper::new(rhs, t0, y0, t_end - t0, tol)?;
    let mut sol = DenseSolution::new(t0, y0, stepper.dy);
    for &stop in stops {
        stepper.run_until(stop, |t, y, dy| {
            sol.push(t, *y, *dy);
            Control::Continue
        })?;
    }
    Ok(sol)
}
