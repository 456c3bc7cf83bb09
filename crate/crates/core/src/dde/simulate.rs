use crate::expr::ExprError;
use crate::nonlinearity::Nonlinearity;
use crate::ode::{Control, DenseSolution, Stepper, Tolerances};

use super::{DdeError, HistorySegment};

/// Magnitude treated as blow-up.
pub const BLOW_UP: f64 = 1e12;

/// Solution of a delay equation on `[-1, t_end]`: the history followed by
/// one dense piece per unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySolution {
    history: HistorySegment,
    pieces: Vec<DenseSolution<1>>,
}

impl DelaySolution {
    pub fn history(&self) -> &HistorySegment {
        &self.history
    }

    pub fn pieces(&self) -> &[DenseSolution<1>] {
        &self.pieces
    }

    pub fn t_end(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.t_end())
    }

    fn piece(&self, t: f64) -> &DenseSolution<1> {
        let k = (t.floor().max(0.0) as usize).min(self.pieces.len() - 1);
        // integer times belong to the piece that ends there
        if k > 0 && t == k as f64 {
            &self.pieces[k - 1]
        } else {
            &self.pieces[k]
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 || self.pieces.is_empty() {
            self.history.value(t)
        } else {
            self.piece(t).eval(t)[0]
        }
    }

    /// Derivative for `t > 0`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.piece(t).eval_with_derivative(t).1[0]
    }

    /// The state `x_t` sampled on `mesh + 1` nodes of `[t-1, t]`.
    pub fn segment(&self, t: f64, mesh: usize) -> Result<HistorySegment, DdeError> {
        HistorySegment::from_fn(mesh, |theta| self.eval(t + theta))
    }

    /// `x'_t`; requires `t >= 1`.
    pub fn derivative_segment(&self, t: f64, mesh: usize) -> Result<HistorySegment, DdeError> {
        HistorySegment::from_fn(mesh, |theta| self.derivative((t + theta).max(f64::MIN_POSITIVE)))
    }

    /// `(t, x(t))` on `[-1, t_end]` with spacing close to `dt`.
    pub fn samples(&self, dt: f64) -> Vec<(f64, f64)> {
        let span = self.t_end() + 1.0;
        let n = (span / dt).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| {
                let t = if i == n { self.t_end() } else { -1.0 + span * i as f64 / n as f64 };
                (t, self.eval(t))
            })
            .collect()
    }

    /// `max |x|` over the last `window` time units, sampled every `1e-3`.
    pub fn trailing_amplitude(&self, window: f64) -> f64 {
        let end = self.t_end();
        let n = (window / 1e-3).ceil() as usize;
        (0..=n).map(|i| self.eval(end - window * i as f64 / n as f64).abs()).fold(0.0, f64::max)
    }

    /// Mean spacing of the upward zero crossings within the last `window` time units.
    pub fn trailing_period(&self, window: f64) -> Option<f64> {
        let end = self.t_end();
        let start = (end - window).max(0.0);
        let n = ((end - start) / 1e-2).ceil() as usize;
        let mut crossings = Vec::new();
        let mut prev = (start, self.eval(start));
        for i in 1..=n {
            let t = start + (end - start) * i as f64 / n as f64;
            let x = self.eval(t);
            if prev.1 < 0.0 && x >= 0.0 {
                let (mut lo, mut hi) = (prev.0, t);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.eval(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                crossings.push(0.5 * (lo + hi));
            }
            prev = (t, x);
        }
        if crossings.len() < 2 {
            return None;
        }
        Some((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
    }
}

/// Method of steps for `x'(t) = rhs(t, x(t), x(t-1))`.
///
/// Every unit interval carries forced mesh nodes at the history mesh spacing
/// and at each time in `extra_stops`.
pub(crate) fn method_of_steps<R>(
    mut rhs: R,
    history: HistorySegment,
    t_max: f64,
    tol: Tolerances,
    extra_stops: &[f64],
) -> Result<DelaySolution, DdeError>
where
    R: FnMut(f64, f64, f64) -> Result<f64, ExprError>,
{
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(DdeError::InvalidSpan(t_max));
    }
    let grid = history.mesh();
    let mut pieces: Vec<DenseSolution<1>> = Vec::with_capacity(t_max.ceil() as usize);
    let mut k = 0usize;
    while (k as f64) < t_max {
        let start = k as f64;
        let end = (start + 1.0).min(t_max);
        let mut stops: Vec<f64> = (1..=grid).map(|i| start + i as f64 / grid as f64).filter(|&s| s < end).collect();
        stops.extend(extra_stops.iter().copied().filter(|&s| s > start && s < end));
        stops.push(end);
        stops.sort_by(f64::total_cmp);
        stops.dedup_by(|b, a| *b - *a <= 1e-12 * end.max(1.0));
        if stops.len() > 1 && end - stops[stops.len() - 2] <= 1e-12 * end.max(1.0) {
            stops.remove(stops.len() - 2);
        }

        let piece = {
            let prev = pieces.last();
            let history = &history;
            let delayed = move |t: f64| match prev {
                None => history.value(t - 1.0),
                Some(p) => p.eval(t - 1.0)[0],
            };
            let x0 = match prev {
                None => history.value(0.0),
                Some(p) => p.last().0[0],
            };
            let field = |t: f64, y: &[f64; 1]| Ok([rhs(t, y[0], delayed(t))?]);
            let mut stepper = Stepper::new(field, start, [x0], end - start, tol)?;
            let mut sol = DenseSolution::new(start, [x0], stepper.dy);
            let mut blown = None;
            for &stop in &stops {
                stepper.run_until(stop, |t, y, dy| {
                    sol.push(t, *y, *dy);
                    if y[0].abs() > BLOW_UP {
                        blown = Some(t);
                        Control::Stop
                    } else {
                        Control::Continue
                    }
                })?;
                if let Some(t) = blown {
                    return Err(DdeError::BlowUp { t });
                }
            }
            sol
        };
        pieces.push(piece);
        k += 1;
    }
    Ok(DelaySolution { history, pieces })
}

/// Solves `x'(t) = f(x(t), x(t-1))` on `[0, t_max]` from the given history.
pub fn simulate(
    nl: &Nonlinearity,
    history: HistorySegment,
    t_max: f64,
    tol: Tolerances,
) -> Result<DelaySolution, DdeError> {
    method_of_steps(|_, x, xd| nl.value(x, xd), history, t_max, tol, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Builtin;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn quarter_wave_reproduces_cosine() {
        let nl = Nonlinearity::builtin_alpha(Builtin::Linear, -FRAC_PI_2).unwrap();
        let h = HistorySegment::from_fn(128, |t| (FRAC_PI_2 * t).cos()).unwrap();
        let sol = simulate(&nl, h, 8.0, Tolerances::new(1e-11, 1e-13)).unwrap();
        assert_eq!(sol.t_end(), 8.0);
        for i in 0..=800 {
            let t = i as f64 / 100.0;
            assert!((sol.eval(t) - (FRAC_PI_2 * t).cos()).abs() < 1e-7, "t = {t}");
        }
        // continuity at the joints and exact history nodes
        for k in 1..8 {
            let t = k as f64;
            assert_eq!(sol.pieces()[k - 1].last().0[0], sol.pieces()[k].states()[0][0]);
            assert_eq!(sol.eval(t), sol.pieces()[k - 1].last().0[0]);
        }
        for (j, theta) in sol.history().nodes().enumerate() {
            assert_eq!(sol.eval(theta), sol.history().samples()[j]);
        }
    }

    #[test]
    fn zero_history_stays_at_equilibrium() {
        let nl = Nonlinearity::builtin_alpha(Builtin::TanhSoft, -2.0).unwrap();
        let sol = simulate(&nl, HistorySegment::constant(32, 0.0).unwrap(), 20.0, Tolerances::default()).unwrap();
        assert!(sol.samples(0.05).iter().all(|&(_, x)| x == 0.0));
    }

    #[test]
    fn blow_up_is_reported() {
        let nl = Nonlinearity::builtin_alpha(Builtin::CubicHard, 1.0).unwrap();
        let err = simulate(&nl, HistorySegment::constant(32, 2.0).unwrap(), 50.0, Tolerances::default()).unwrap_err();
        assert!(matches!(err, DdeError::BlowUp { .. } | DdeError::Integration(_)), "{err:?}");
    }

    #[test]
    fn trailing_measures_on_explicit_solution() {
        let nl = Nonlinearity::builtin_alpha(Builtin::Linear, -FRAC_PI_2).unwrap();
        let h = HistorySegment::from_fn(128, |t| (FRAC_PI_2 * t).cos()).unwrap();
        let sol = simulate(&nl, h, 20.0, Tolerances::new(1e-11, 1e-13)).unwrap();
        assert!((sol.trailing_amplitude(8.0) - 1.0).abs() < 1e-6);
        assert!((sol.trailing_period(12.0).unwrap() - 4.0).abs() < 1e-8);
    }
}
