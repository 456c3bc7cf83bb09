//! Bracketing root finder for expensive scalar functions.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError<E> {
    #[error("f({a}) = {fa} and f({b}) = {fb} do not bracket a root")]
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("no convergence after {evals} evaluations (|f| = {residual:e})")]
    NotConverged { evals: usize, residual: f64 },
    #[error(transparent)]
    Eval(E),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub evals: usize,
}

/// Brent's method on `[a, b]` with known end values.
///
/// Stops once `|f(x)| < ftol`. Collapsing the bracket to machine precision
/// without meeting `ftol` is a convergence failure.
pub fn brent<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    ftol: f64,
    max_evals: usize,
) -> Result<Root, RootError<E>> {
    if fa.abs() < ftol {
        return Ok(Root { x: a, fx: fa, evals: 0 });
    }
    if fb.abs() < ftol {
        return Ok(Root { x: b, fx: fb, evals: 0 });
    }
    if fa * fb > 0.0 || !fa.is_finite() || !fb.is_finite() {
        return Err(RootError::NotBracketed { a, b, fa, fb });
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    let mut evals = 0;
    while evals < max_evals {
        let xtol = 2.0 * f64::EPSILON * b.abs();
        if (b - a).abs() <= xtol {
            return Err(RootError::NotConverged { evals, residual: fb.abs() });
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected {
            (s - b).abs() >= (b - c).abs() / 2.0 || (b - c).abs() < xtol
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0 || (c - d).abs() < xtol
        };
        if outside || slow {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s).map_err(RootError::Eval)?;
        evals += 1;
        if fs.abs() < ftol {
            return Ok(Root { x: s, fx: fs, evals });
        }
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(RootError::NotConverged { evals, residual: fb.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    type Never = std::convert::Infallible;

    #[test]
    fn finds_cube_root_of_two() {
        let f = |x: f64| Ok::<_, Never>(x * x * x - 2.0);
        let r = brent(f, 0.0, 2.0, -2.0, 6.0, 1e-14, 100).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-14);
        assert!(r.evals < 20);
    }

    #[test]
    fn decreasing_function() {
        let f = |x: f64| Ok::<_, Never>((-x).exp() - 0.5);
        let r = brent(f, 0.0, 3.0, 0.5, (-3f64).exp() - 0.5, 1e-13, 100).unwrap();
        assert!((r.x - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_missing_bracket() {
        let f = |x: f64| Ok::<_, Never>(x * x + 1.0);
        assert!(matches!(brent(f, -1.0, 1.0, 2.0, 2.0, 1e-12, 100), Err(RootError::NotBracketed { .. })));
    }

    #[test]
    fn evaluation_budget_is_enforced() {
        let f = |x: f64| Ok::<_, Never>(x.signum() * 1e-3);
        assert!(matches!(brent(f, -1.0, 2.0, -1e-3, 1e-3, 1e-12, 10), Err(RootError::NotConverged { .. })));
    }
}
