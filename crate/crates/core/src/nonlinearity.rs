//! Validated nonlinearities `f(xi, eta)` with even-odd symmetry and monotone
//! feedback in the delayed argument.
//!
//! Validation samples `f` on a square grid `[-R, R]^2` and checks
//! `f(xi, eta) = f(-xi, eta) = -f(xi, -eta)` together with a constant sign of
//! `d2 f`. This is a sampled certificate on a bounded region, not a proof.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Bindings, ExprError, Expression};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Positive,
    Negative,
}

impl Feedback {
    pub fn sign(self) -> f64 {
        match self {
            Feedback::Positive => 1.0,
            Feedback::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Feedback {
        match self {
            Feedback::Positive => Feedback::Negative,
            Feedback::Negative => Feedback::Positive,
        }
    }
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feedback::Positive => "positive",
            Feedback::Negative => "negative",
        })
    }
}

impl FromStr for Feedback {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "positive" | "+" | "pos" => Ok(Feedback::Positive),
            "negative" | "-" | "neg" => Ok(Feedback::Negative),
            other => Err(format!("unknown feedback `{other}` (expected positive or negative)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// `alpha * eta`
    Linear,
    /// `alpha * (eta + eta^3)`
    CubicHard,
    /// `alpha * tanh(eta)`
    TanhSoft,
    /// `alpha * sinh(eta)`
    Sinh,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Linear => "linear",
            Builtin::CubicHard => "cubic_hard",
            Builtin::TanhSoft => "tanh_soft",
            Builtin::Sinh => "sinh",
        }
    }

    fn value(self, alpha: f64, eta: f64) -> f64 {
        alpha
            * match self {
                Builtin::Linear => eta,
                Builtin::CubicHard => eta + eta * eta * eta,
                Builtin::TanhSoft => eta.tanh(),
                Builtin::Sinh => eta.sinh(),
            }
    }

    fn d_eta(self, alpha: f64, eta: f64) -> f64 {
        alpha
            * match self {
                Builtin::Linear => 1.0,
                Builtin::CubicHard => 1.0 + 3.0 * eta * eta,
                Builtin::TanhSoft => {
                    let c = eta.cosh();
                    1.0 / (c * c)
                }
                Builtin::Sinh => eta.cosh(),
            }
    }
}

impl FromStr for Builtin {
    type Err = NonlinearityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "linear" => Builtin::Linear,
            "cubic_hard" => Builtin::CubicHard,
            "tanh_soft" => Builtin::TanhSoft,
            "sinh" => Builtin::Sinh,
            other => return Err(NonlinearityError::UnknownBuiltin(other.to_string())),
        })
    }
}

/// Where the formula for `f` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Builtin(Builtin),
    Expr(Expression),
}

impl Source {
    pub fn parse_expr(text: &str) -> Result<Source, ExprError> {
        Ok(Source::Expr(expr::parse(text)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationGrid {
    pub extent: f64,
    pub points: usize,
    pub tol: f64,
}

impl ValidationGrid {
    pub const BUILTIN_TOL: f64 = 1e-10;
    pub const EXPR_TOL: f64 = 1e-8;

    pub fn for_source(source: &Source) -> ValidationGrid {
        let tol = match source {
            Source::Builtin(_) => Self::BUILTIN_TOL,
            Source::Expr(_) => Self::EXPR_TOL,
        };
        ValidationGrid { extent: 10.0, points: 64, tol }
    }

    fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points;
        (0..n).map(move |i| -self.extent + 2.0 * self.extent * i as f64 / (n - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub grid: ValidationGrid,
    pub max_even_defect: f64,
    pub max_odd_defect: f64,
    pub min_abs_d2: f64,
    pub even: bool,
    pub odd: bool,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlinearityError {
    #[error("even-odd symmetry violated: even defect {even_defect:e}, odd defect {odd_defect:e} (tolerance {tol:e})")]
    SymmetryViolation { even_defect: f64, odd_defect: f64, tol: f64 },
    #[error("feedback indefinite: {0}")]
    FeedbackIndefinite(String),
    #[error("declared {declared} feedback but d2 f(0,0) indicates {inferred}")]
    FeedbackMismatch { declared: Feedback, inferred: Feedback },
    #[error("unknown builtin `{0}` (expected linear, cubic_hard, tanh_soft or sinh)")]
    UnknownBuiltin(String),
    #[error("invalid validation grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Builtin { kind: Builtin, alpha: f64 },
    Expr { source: Expression, bound: Expression },
}

/// An immutable, validated member of the even-odd symmetric monotone-feedback class.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    body: Body,
    params: Bindings,
    scale: f64,
    feedback: Feedback,
    report: SymmetryReport,
    irregular: bool,
}

impl Nonlinearity {
    /// Validates `source` with `params` on `grid`; the feedback sign is inferred
    /// from `d2 f(0,0)` and must match `declared` when given.
    pub fn build(
        source: Source,
        params: Bindings,
        grid: ValidationGrid,
        declared: Option<Feedback>,
    ) -> Result<Nonlinearity, NonlinearityError> {
        if !(grid.extent > 0.0 && grid.extent.is_finite()) {
            return Err(NonlinearityError::InvalidGrid(format!("extent {} must be positive", grid.extent)));
        }
        if grid.points < 8 {
            return Err(NonlinearityError::InvalidGrid(format!("{} points per axis, need at least 8", grid.points)));
        }
        if grid.tol.is_nan() || grid.tol <= 0.0 {
            return Err(NonlinearityError::InvalidGrid(format!("tolerance {} must be positive", grid.tol)));
        }
        let (body, irregular) = match source {
            Source::Builtin(kind) => {
                let alpha = *params.get("alpha").ok_or_else(|| ExprError::UnboundParameter("alpha".into()))?;
                if alpha == 0.0 || !alpha.is_finite() {
                    return Err(NonlinearityError::FeedbackIndefinite(format!(
                        "{}: alpha = {alpha} gives no monotone feedback",
                        kind.name()
                    )));
                }
                (Body::Builtin { kind, alpha }, false)
            }
            Source::Expr(source) => {
                let bound = source.bind(&params)?;
                let irregular = source.uses_irregular_functions();
                (Body::Expr { source, bound }, irregular)
            }
        };
        let placeholder = SymmetryReport {
            grid,
            max_even_defect: 0.0,
            max_odd_defect: 0.0,
            min_abs_d2: 0.0,
            even: false,
            odd: false,
            monotone: false,
        };
        let mut nl =
            Nonlinearity { body, params, scale: 1.0, feedback: Feedback::Positive, report: placeholder, irregular };
        let d2_origin = nl.partials(0.0, 0.0)?.1;
        if d2_origin.is_nan() || d2_origin.abs() < grid.tol {
            return Err(NonlinearityError::FeedbackIndefinite(format!(
                "|d2 f(0,0)| = {:e} is below tolerance {:e}",
                d2_origin.abs(),
                grid.tol
            )));
        }
        let inferred = if d2_origin > 0.0 { Feedback::Positive } else { Feedback::Negative };
        if let Some(declared) = declared {
            if declared != inferred {
                return Err(NonlinearityError::FeedbackMismatch { declared, inferred });
            }
        }
        nl.feedback = inferred;
        nl.report = nl.sample_report(grid)?;
        if !(nl.report.even && nl.report.odd) {
            return Err(NonlinearityError::SymmetryViolation {
                even_defect: nl.report.max_even_defect,
                odd_defect: nl.report.max_odd_defect,
                tol: grid.tol,
            });
        }
        if !nl.report.monotone {
            return Err(NonlinearityError::FeedbackIndefinite(format!(
                "d2 f changes sign or drops below {:e} on [-{R}, {R}]^2 (min |d2 f| = {:e})",
                grid.tol,
                nl.report.min_abs_d2,
                R = grid.extent
            )));
        }
        Ok(nl)
    }

    /// Builtin family with the default validation grid.
    pub fn builtin(kind: Builtin, params: Bindings) -> Result<Nonlinearity, NonlinearityError> {
        let source = Source::Builtin(kind);
        let grid = ValidationGrid::for_source(&source);
        Self::build(source, params, grid, None)
    }

    /// Convenience for a builtin with a single `alpha`.
    pub fn builtin_alpha(kind: Builtin, alpha: f64) -> Result<Nonlinearity, NonlinearityError> {
        let mut params = Bindings::new();
        params.insert("alpha".into(), alpha);
        Self::builtin(kind, params)
    }

    /// Parses `text` and validates it on the default grid.
    pub fn from_expr(text: &str, params: Bindings) -> Result<Nonlinearity, NonlinearityError> {
        let source = Source::parse_expr(text)?;
        let grid = ValidationGrid::for_source(&source);
        Self::build(source, params, grid, None)
    }

    fn sample_report(&self, grid: ValidationGrid) -> Result<SymmetryReport, ExprError> {
        let mut even = 0.0f64;
        let mut odd = 0.0f64;
        let mut min_d2 = f64::INFINITY;
        let mut sign_ok = true;
        let sign = self.feedback.sign();
        for xi in grid.nodes() {
            for eta in grid.nodes() {
                let v = self.value(xi, eta)?;
                even = even.max((v - self.value(-xi, eta)?).abs());
                odd = odd.max((v + self.value(xi, -eta)?).abs());
                let d2 = self.partials(xi, eta)?.1;
                min_d2 = min_d2.min(d2.abs());
                sign_ok &= d2 * sign > 0.0;
            }
        }
        Ok(SymmetryReport {
            grid,
            max_even_defect: even,
            max_odd_defect: odd,
            min_abs_d2: min_d2,
            even: even <= grid.tol,
            odd: odd <= grid.tol,
            monotone: sign_ok && min_d2 >= grid.tol,
        })
    }

    pub fn value(&self, xi: f64, eta: f64) -> Result<f64, ExprError> {
        let raw = match &self.body {
            Body::Builtin { kind, alpha } => kind.value(*alpha, eta),
            Body::Expr { bound, .. } => bound.eval(xi, eta, &self.params)?,
        };
        Ok(self.scale * raw)
    }

    /// `(d1 f, d2 f)` at `(xi, eta)`: analytic for builtins, fourth-order
    /// central differences for expressions.
    pub fn partials(&self, xi: f64, eta: f64) -> Result<(f64, f64), ExprError> {
        match &self.body {
            Body::Builtin { kind, alpha } => Ok((0.0, self.scale * kind.d_eta(*alpha, eta))),
            Body::Expr { .. } => self.finite_difference_partials(xi, eta),
        }
    }

    /// Fourth-order central differences with step `max(1e-5, 1e-5 |arg|)`.
    pub fn finite_difference_partials(&self, xi: f64, eta: f64) -> Result<(f64, f64), ExprError> {
        let d = |g: &dyn Fn(f64) -> Result<f64, ExprError>, x: f64| -> Result<f64, ExprError> {
            let h = (1e-5 * x.abs()).max(1e-5);
            Ok((-g(x + 2.0 * h)? + 8.0 * g(x + h)? - 8.0 * g(x - h)? + g(x - 2.0 * h)?) / (12.0 * h))
        };
        let d1 = d(&|x| self.value(x, eta), xi)?;
        let d2 = d(&|y| self.value(xi, y), eta)?;
        Ok((d1, d2))
    }

    /// The nonlinearity `alpha * f`. A negative factor flips the feedback class.
    pub fn scaled(&self, alpha: f64) -> Nonlinearity {
        assert!(alpha != 0.0 && alpha.is_finite(), "scale factor must be finite and nonzero");
        let mut out = self.clone();
        out.scale *= alpha;
        if alpha < 0.0 {
            out.feedback = out.feedback.flipped();
        }
        out.report.max_even_defect *= alpha.abs();
        out.report.max_odd_defect *= alpha.abs();
        out.report.min_abs_d2 *= alpha.abs();
        out
    }

    pub fn feedback(&self) -> Feedback {
        self.feedback
    }

    pub fn report(&self) -> &SymmetryReport {
        &self.report
    }

    pub fn params(&self) -> &Bindings {
        &self.params
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// True when the formula uses functions that are not C^2 (`abs`, `sqrt`);
    /// the theory assumes C^2, so results are reported but flagged.
    pub fn regularity_warning(&self) -> bool {
        self.irregular
    }

    pub fn uses_analytic_partials(&self) -> bool {
        matches!(self.body, Body::Builtin { .. })
    }

    pub fn describe(&self) -> String {
        let base = match &self.body {
            Body::Builtin { kind, alpha } => format!("{}(alpha={alpha})", kind.name()),
            Body::Expr { source, .. } => source.to_string(),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{} * ({base})", self.scale)
        }
    }

    /// `|d2 f(0,0)|`, the linearized rotation rate at the origin.
    pub fn origin_rate(&self) -> f64 {
        self.partials(0.0, 0.0).map(|(_, d2)| d2.abs()).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bind(pairs: &[(&str, f64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn cubic_expression_is_positive_feedback() {
        let nl = Nonlinearity::from_expr("eta + eta^3", Bindings::new()).unwrap();
        assert_eq!(nl.feedback(), Feedback::Positive);
        assert_eq!(nl.report().max_even_defect, 0.0);
        assert_eq!(nl.report().max_odd_defect, 0.0);
    }

    #[test]
    fn tanh_expression_is_negative_feedback() {
        let nl = Nonlinearity::from_expr("-alpha*tanh(eta)", bind(&[("alpha", 2.0)])).unwrap();
        assert_eq!(nl.feedback(), Feedback::Negative);
    }

    #[test]
    fn asymmetric_expression_is_rejected() {
        match Nonlinearity::from_expr("xi + eta", Bindings::new()) {
            Err(NonlinearityError::SymmetryViolation { even_defect, .. }) => assert!(even_defect > 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_monotone_expression_is_rejected() {
        assert!(matches!(
            Nonlinearity::from_expr("eta - eta^3", Bindings::new()),
            Err(NonlinearityError::FeedbackIndefinite(_))
        ));
        assert!(matches!(
            Nonlinearity::from_expr("eta^3", Bindings::new()),
            Err(NonlinearityError::FeedbackIndefinite(_))
        ));
    }

    #[test]
    fn unbound_parameter_is_reported() {
        assert!(matches!(
            Nonlinearity::from_expr("alpha*eta", Bindings::new()),
            Err(NonlinearityError::Expr(ExprError::UnboundParameter(_)))
        ));
        assert!(matches!(
            Nonlinearity::builtin(Builtin::Linear, Bindings::new()),
            Err(NonlinearityError::Expr(ExprError::UnboundParameter(_)))
        ));
    }

    #[test]
    fn declared_feedback_must_match() {
        let src = Source::parse_expr("-eta").unwrap();
        let grid = ValidationGrid::for_source(&src);
        assert!(matches!(
            Nonlinearity::build(src.clone(), Bindings::new(), grid, Some(Feedback::Positive)),
            Err(NonlinearityError::FeedbackMismatch { .. })
        ));
        assert!(Nonlinearity::build(src, Bindings::new(), grid, Some(Feedback::Negative)).is_ok());
    }

    #[test]
    fn grid_preconditions() {
        let src = Source::Builtin(Builtin::Linear);
        let params = bind(&[("alpha", 1.0)]);
        let bad = ValidationGrid { extent: 1.0, points: 4, tol: 1e-10 };
        assert!(matches!(Nonlinearity::build(src, params, bad, None), Err(NonlinearityError::InvalidGrid(_))));
    }

    #[test]
    fn partial_examples() {
        let cubic = Nonlinearity::from_expr("eta+eta^3", Bindings::new()).unwrap();
        let (d1, d2) = cubic.partials(0.0, 0.0).unwrap();
        assert!(d1.abs() < 1e-10 && (d2 - 1.0).abs() < 1e-9);
        let (d1, d2) = cubic.partials(5.0, 1.0).unwrap();
        assert!(d1.abs() < 1e-10 && (d2 - 4.0).abs() < 1e-8);
        let tanh = Nonlinearity::from_expr("-2*tanh(eta)", Bindings::new()).unwrap();
        let (d1, d2) = tanh.partials(0.0, 0.0).unwrap();
        assert!(d1.abs() < 1e-10 && (d2 + 2.0).abs() < 1e-9);
    }

    #[test]
    fn builtin_examples() {
        let lin = Nonlinearity::builtin_alpha(Builtin::Linear, 1.0).unwrap();
        assert_eq!(lin.feedback(), Feedback::Positive);
        assert_eq!(lin.value(3.0, -0.25).unwrap(), -0.25);
        let soft = Nonlinearity::builtin_alpha(Builtin::TanhSoft, -2.0).unwrap();
        assert_eq!(soft.feedback(), Feedback::Negative);
        assert_eq!(soft.value(0.0, 1.0).unwrap(), -2.0 * 1f64.tanh());
        assert!(matches!(
            Nonlinearity::builtin_alpha(Builtin::Linear, 0.0),
            Err(NonlinearityError::FeedbackIndefinite(_))
        ));
        assert!(matches!("quartic".parse::<Builtin>(), Err(NonlinearityError::UnknownBuiltin(_))));
    }

    #[test]
    fn analytic_and_finite_difference_partials_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [Builtin::Linear, Builtin::CubicHard, Builtin::TanhSoft, Builtin::Sinh] {
            let nl = Nonlinearity::builtin_alpha(kind, -1.5).unwrap();
            for _ in 0..100 {
                let xi = rng.random_range(-3.0..3.0);
                let eta = rng.random_range(-3.0..3.0);
                let (a1, a2) = nl.partials(xi, eta).unwrap();
                let (f1, f2) = nl.finite_difference_partials(xi, eta).unwrap();
                let scale = a2.abs().max(1.0);
                assert!((a1 - f1).abs() < 1e-8 * scale, "{kind:?} d1 at ({xi},{eta})");
                assert!((a2 - f2).abs() < 1e-8 * scale, "{kind:?} d2 at ({xi},{eta}): {a2} vs {f2}");
            }
        }
    }

    #[test]
    fn sampled_symmetry_and_feedback_hold_off_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fixtures = [
            Nonlinearity::from_expr("eta + eta^3", Bindings::new()).unwrap(),
            Nonlinearity::from_expr("-2*tanh(eta)*(1 + 0.1*xi^2)", Bindings::new()).unwrap(),
            Nonlinearity::builtin_alpha(Builtin::Sinh, 0.5).unwrap(),
        ];
        for nl in &fixtures {
            let tol = nl.report().grid.tol;
            for _ in 0..1000 {
                let xi = rng.random_range(-10.0..10.0);
                let eta = rng.random_range(-10.0..10.0);
                let v = nl.value(xi, eta).unwrap();
                assert!((v - nl.value(-xi, eta).unwrap()).abs() <= tol);
                assert!((v + nl.value(xi, -eta).unwrap()).abs() <= tol);
                assert!(nl.value(xi, 0.0).unwrap().abs() <= tol);
                let d2 = nl.partials(xi, eta).unwrap().1;
                assert_eq!(d2 > 0.0, nl.feedback() == Feedback::Positive);
            }
        }
    }

    #[test]
    fn scaling_flips_feedback_for_negative_factor() {
        let nl = Nonlinearity::builtin_alpha(Builtin::CubicHard, 1.0).unwrap();
        let neg = nl.scaled(-2.0);
        assert_eq!(neg.feedback(), Feedback::Negative);
        assert_eq!(neg.value(0.0, 1.0).unwrap(), -4.0);
        assert_eq!(neg.origin_rate(), 2.0);
    }

    #[test]
    fn irregular_expressions_are_flagged_not_rejected() {
        let nl = Nonlinearity::from_expr("eta*(1 + abs(eta))", Bindings::new()).unwrap();
        assert!(nl.regularity_warning());
    }
}
