//! Sampling, differentiation and classification of the period map `T_f`, and
//! its intersections with the realizable periods.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::fmt17;
use crate::nonlinearity::{Feedback, Nonlinearity};
use crate::ode::Tolerances;
use crate::planar::{period_at_zero, return_time, PlanarError, MIN_AMPLITUDE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeriodMapError {
    #[error("period map is locally constant; crossings with the realizable periods are undefined")]
    LocallyConstantMap,
    #[error("invalid sampling request: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Planar(#[from] PlanarError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    SoftSpring,
    HardSpring,
    NonMonotone,
    LocallyConstant,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::SoftSpring => "soft_spring",
            Classification::HardSpring => "hard_spring",
            Classification::NonMonotone => "non_monotone",
            Classification::LocallyConstant => "locally_constant",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodMapOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Plateau threshold relative to `T_f(0)`.
    pub plateau_rel: f64,
    /// A slope counts as nonzero when it exceeds this multiple of its error.
    pub significance: f64,
    /// Gap below which an extremum touching a realizable value is reported.
    pub tangency_rel: f64,
}

impl Default for PeriodMapOptions {
    fn default() -> Self {
        PeriodMapOptions { rtol: 1e-10, atol: 1e-12, plateau_rel: 1e-9, significance: 10.0, tangency_rel: 1e-6 }
    }
}

impl PeriodMapOptions {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances::new(self.rtol, self.atol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub value: f64,
    pub error: f64,
}

impl Slope {
    pub fn is_significant(&self, factor: f64) -> bool {
        self.value.abs() > factor * self.error
    }
}

/// `T_f(a)` for `a >= 0`, falling back to the zero-amplitude limit on tiny amplitudes.
pub fn period(nl: &Nonlinearity, a: f64, tol: Tolerances) -> Result<f64, PlanarError> {
    let a = a.abs();
    if a < MIN_AMPLITUDE {
        Ok(period_at_zero(nl))
    } else {
        Ok(return_time(nl, a, tol)?.period)
    }
}

/// `T_f'(a)` by Richardson-extrapolated central differences with steps
/// `h = 1e-4 max(1, a)` and `h/2`.
///
/// Near zero the left stencil point is reflected, `T_f(-x) = T_f(x)`, since
/// the orbits through `(x, 0)` and `(-x, 0)` coincide.
pub fn slope(nl: &Nonlinearity, a: f64) -> Result<Slope, PlanarError> {
    slope_with(nl, a, Tolerances::default())
}

pub fn slope_with(nl: &Nonlinearity, a: f64, tol: Tolerances) -> Result<Slope, PlanarError> {
    let h = 1e-4 * a.max(1.0);
    let diff =
        |h: f64| -> Result<f64, PlanarError> { Ok((period(nl, a + h, tol)? - period(nl, a - h, tol)?) / (2.0 * h)) };
    let d1 = diff(h)?;
    let d2 = diff(0.5 * h)?;
    let value = (4.0 * d2 - d1) / 3.0;
    // discretization estimate plus the noise floor of the period evaluations
    let t = period(nl, a, tol)?;
    let noise = 2.0 * tol.rtol * t / h;
    Ok(Slope { value, error: (d2 - d1).abs() / 3.0 + noise })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMapTable {
    pub feedback: Feedback,
    pub amplitudes: Vec<f64>,
    pub periods: Vec<f64>,
    pub slopes: Vec<Slope>,
    pub classification: Classification,
    pub options: PeriodMapOptions,
}

/// `{0}` followed by `m` amplitudes: uniform on `(0, a_max/4]`, geometric on `[a_max/4, a_max]`.
pub fn amplitude_grid(a_max: f64, m: usize) -> Vec<f64> {
    let uniform = m / 4;
    let geometric = m - uniform;
    let quarter = a_max / 4.0;
    let mut grid = Vec::with_capacity(m + 1);
    grid.push(0.0);
    grid.extend((1..=uniform).map(|i| quarter * i as f64 / uniform as f64));
    grid.extend((1..=geometric).map(|j| quarter * 4f64.powf(j as f64 / geometric as f64)));
    *grid.last_mut().expect("m >= 1") = a_max;
    grid
}

pub fn sample(nl: &Nonlinearity, a_max: f64, m: usize) -> Result<PeriodMapTable, PeriodMapError> {
    sample_with(nl, a_max, m, PeriodMapOptions::default())
}

pub fn sample_with(
    nl: &Nonlinearity,
    a_max: f64,
    m: usize,
    options: PeriodMapOptions,
) -> Result<PeriodMapTable, PeriodMapError> {
    if !(a_max > 0.0 && a_max.is_finite()) {
        return Err(PeriodMapError::InvalidGrid(format!("a_max = {a_max} must be positive")));
    }
    if m < 16 {
        return Err(PeriodMapError::InvalidGrid(format!("m = {m} must be at least 16")));
    }
    let tol = options.tolerances();
    let amplitudes = amplitude_grid(a_max, m);
    let positive: Vec<(f64, Slope)> = amplitudes[1..]
        .par_iter()
        .map(|&a| Ok((return_time(nl, a, tol)?.period, slope_with(nl, a, tol)?)))
        .collect::<Result<_, PlanarError>>()?;
    let mut periods = vec![period_at_zero(nl)];
    let mut slopes = vec![Slope { value: 0.0, error: 0.0 }];
    for (t, s) in positive {
        periods.push(t);
        slopes.push(s);
    }
    let classification = classify(&periods, &slopes, &options);
    Ok(PeriodMapTable { feedback: nl.feedback(), amplitudes, periods, slopes, classification, options })
}

fn classify(periods: &[f64], slopes: &[Slope], options: &PeriodMapOptions) -> Classification {
    let t0 = periods[0];
    let deviation = periods.iter().map(|t| (t - t0).abs()).fold(0.0, f64::max);
    if deviation < options.plateau_rel * t0 {
        return Classification::LocallyConstant;
    }
    let interior = &slopes[1..];
    if interior.iter().all(|s| s.value < 0.0) {
        return Classification::HardSpring;
    }
    if interior.iter().all(|s| s.value > 0.0) {
        return Classification::SoftSpring;
    }
    let k = options.significance;
    let rising = interior.iter().any(|s| s.is_significant(k) && s.value > 0.0);
    let falling = interior.iter().any(|s| s.is_significant(k) && s.value < 0.0);
    if rising && falling {
        Classification::NonMonotone
    } else if periods[periods.len() - 1] < t0 {
        // sign flips only within the noise: monotone at grid resolution
        Classification::HardSpring
    } else {
        Classification::SoftSpring
    }
}

impl PeriodMapTable {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn a_max(&self) -> f64 {
        self.amplitudes[self.amplitudes.len() - 1]
    }

    /// Zero-amplitude limit extrapolated from the three smallest positive samples.
    pub fn extrapolated_zero_limit(&self) -> f64 {
        let pts = [1, 2, 3].map(|i| (self.amplitudes[i], self.periods[i]));
        extrapolate_to_zero(pts)
    }

    /// Interior grid indices where the slope changes sign with significance on both sides.
    pub fn extremum_intervals(&self) -> Vec<usize> {
        let k = self.options.significance;
        (1..self.len() - 1)
            .filter(|&i| {
                let (s0, s1) = (self.slopes[i], self.slopes[i + 1]);
                s0.is_significant(k) && s1.is_significant(k) && s0.value * s1.value < 0.0
            })
            .collect()
    }

    /// CSV with header `a,T,dT,classification`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "a,T,dT,classification")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt17(self.amplitudes[i]),
                fmt17(self.periods[i]),
                fmt17(self.slopes[i].value),
                self.classification
            )?;
        }
        Ok(())
    }
}

/// Polynomial extrapolation in `a^2` (the period map is even in `a`) to `a = 0`.
pub fn extrapolate_to_zero(points: [(f64, f64); 3]) -> f64 {
    let u = points.map(|(a, _)| a * a);
    let mut value = 0.0;
    for i in 0..3 {
        let mut weight = 1.0;
        for j in 0..3 {
            if i != j {
                weight *= -u[j] / (u[i] - u[j]);
            }
        }
        value += weight * points[i].1;
    }
    value
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizablePeriod {
    pub n: u32,
    pub value: f64,
    pub feedback: Feedback,
}

impl RealizablePeriod {
    pub fn new(feedback: Feedback, n: u32) -> Self {
        assert!(n >= 1, "branch index starts at 1");
        let denom = match feedback {
            Feedback::Positive => 4 * n - 1,
            Feedback::Negative => 4 * n - 3,
        };
        RealizablePeriod { n, value: 4.0 / denom as f64, feedback }
    }
}

/// `4/(4n-1)` for positive feedback and `4/(4n-3)` for negative feedback, `n = 1..=n_max`.
pub fn realizable(feedback: Feedback, n_max: u32) -> Vec<RealizablePeriod> {
    (1..=n_max).map(|n| RealizablePeriod::new(feedback, n)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub period: RealizablePeriod,
    pub bracket: [f64; 2],
    /// Found by local refinement because the slope was insignificant nearby.
    pub near_tangent: bool,
}

/// An extremum of `T_f` that comes within the tangency tolerance of a
/// realizable value without crossing it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub period: RealizablePeriod,
    pub amplitude: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub brackets: Vec<Crossing>,
    pub tangencies: Vec<Tangency>,
}

fn sign_changes(points: &[(f64, f64)], value: f64) -> Vec<[f64; 2]> {
    points.windows(2).filter(|w| (w[0].1 - value) * (w[1].1 - value) < 0.0).map(|w| [w[0].0, w[1].0]).collect()
}

/// Brackets every sign change of `T_f(a) - J` on the sampled grid, refining
/// four-fold around insignificant slopes and slope sign changes.
pub fn crossings(nl: &Nonlinearity, table: &PeriodMapTable, n_max: u32) -> Result<CrossingReport, PeriodMapError> {
    if table.classification == Classification::LocallyConstant {
        return Err(PeriodMapError::LocallyConstantMap);
    }
    let tol = table.options.tolerances();
    let k = table.options.significance;
    let extrema = table.extremum_intervals();
    let mut report = CrossingReport::default();
    for rp in realizable(table.feedback, n_max) {
        let v = rp.value;
        for i in 0..table.len() - 1 {
            let (a0, a1) = (table.amplitudes[i], table.amplitudes[i + 1]);
            let (t0, t1) = (table.periods[i], table.periods[i + 1]);
            let crosses = (t0 - v) * (t1 - v) < 0.0;
            let weak = (i > 0 && !table.slopes[i].is_significant(k)) || !table.slopes[i + 1].is_significant(k);
            let extremum = extrema.contains(&i);
            if !(crosses && weak) && !extremum {
                if crosses {
                    report.brackets.push(Crossing { period: rp, bracket: [a0, a1], near_tangent: false });
                }
                continue;
            }
            let mut points = vec![(a0, t0)];
            for j in 1..4 {
                let a = a0 + (a1 - a0) * j as f64 / 4.0;
                points.push((a, period(nl, a, tol)?));
            }
            points.push((a1, t1));
            let found = sign_changes(&points, v);
            if found.is_empty() && extremum {
                let (a, t) = points
                    .iter()
                    .copied()
                    .min_by(|p, q| (p.1 - v).abs().total_cmp(&(q.1 - v).abs()))
                    .expect("five refinement points");
                let gap = (t - v).abs();
                if gap <= table.options.tangency_rel * v {
                    report.tangencies.push(Tangency { period: rp, amplitude: a, gap });
                }
            }
            for bracket in found {
                report.brackets.push(Crossing { period: rp, bracket, near_tangent: weak || extremum });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realizable_values() {
        let pos: Vec<f64> = realizable(Feedback::Positive, 3).iter().map(|r| r.value).collect();
        assert_eq!(pos, vec![4.0 / 3.0, 4.0 / 7.0, 4.0 / 11.0]);
        let neg: Vec<f64> = realizable(Feedback::Negative, 3).iter().map(|r| r.value).collect();
        assert_eq!(neg, vec![4.0, 4.0 / 5.0, 4.0 / 9.0]);
        assert_eq!(realizable(Feedback::Negative, 1)[0].value, 4.0);
        assert!(realizable(Feedback::Positive, 50).iter().all(|r| r.value > 0.0 && r.value <= 4.0));
    }

    #[test]
    fn grid_shape() {
        let g = amplitude_grid(8.0, 32);
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[8], 2.0);
        assert_eq!(*g.last().unwrap(), 8.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        // uniform first quarter
        assert!((g[2] - g[1] - g[1]).abs() < 1e-15);
    }

    #[test]
    fn zero_extrapolation_is_exact_for_quadratic_in_a_squared() {
        let t = |a: f64| 3.0 - 0.5 * a * a + 0.25 * a.powi(4);
        let pts = [0.1, 0.2, 0.3].map(|a| (a, t(a)));
        assert!((extrapolate_to_zero(pts) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn classification_rules() {
        let opts = PeriodMapOptions::default();
        let s = |v: f64| Slope { value: v, error: 1e-6 };
        let c = classify(&[1.0, 1.0, 1.0], &[s(0.0), s(1e-12), s(-1e-12)], &opts);
        assert_eq!(c, Classification::LocallyConstant);
        assert_eq!(classify(&[2.0, 1.9, 1.8], &[s(0.0), s(-0.1), s(-0.1)], &opts), Classification::HardSpring);
        assert_eq!(classify(&[2.0, 2.1, 2.2], &[s(0.0), s(0.1), s(0.1)], &opts), Classification::SoftSpring);
        assert_eq!(classify(&[2.0, 2.1, 2.0], &[s(0.0), s(0.1), s(-0.1)], &opts), Classification::NonMonotone);
        // an insignificant flip does not make the map non-monotone
        assert_eq!(classify(&[2.0, 2.1, 2.2], &[s(0.0), s(0.1), s(-1e-9)], &opts), Classification::SoftSpring);
    }

    #[test]
    fn sample_preconditions() {
        let nl = Nonlinearity::builtin_alpha(crate::Builtin::Linear, 1.0).unwrap();
        assert!(matches!(sample(&nl, 0.0, 32), Err(PeriodMapError::InvalidGrid(_))));
        assert!(matches!(sample(&nl, 1.0, 8), Err(PeriodMapError::InvalidGrid(_))));
    }

    fn cubic() -> Nonlinearity {
        Nonlinearity::builtin_alpha(crate::Builtin::CubicHard, 1.0).unwrap()
    }

    fn soft() -> Nonlinearity {
        Nonlinearity::builtin_alpha(crate::Builtin::TanhSoft, -2.0).unwrap()
    }

    #[test]
    fn linear_map_is_flat() {
        let nl = Nonlinearity::builtin_alpha(crate::Builtin::Linear, 1.0).unwrap();
        let table = sample(&nl, 10.0, 32).unwrap();
        let dev = table.periods.iter().map(|t| (t - std::f64::consts::TAU).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-8, "{dev}");
        assert_eq!(table.classification, Classification::LocallyConstant);
        assert_eq!(crossings(&nl, &table, 3), Err(PeriodMapError::LocallyConstantMap));
        assert!(slope(&nl, 1.0).unwrap().value.abs() < 1e-7);
    }

    #[test]
    fn hard_and_soft_springs() {
        let nl = cubic();
        let table = sample(&nl, 5.0, 64).unwrap();
        assert_eq!(table.classification, Classification::HardSpring);
        assert!(table.periods.windows(2).all(|w| w[1] < w[0]));
        assert!(table.slopes[1..].iter().all(|s| s.value < 0.0));
        // independent tight re-integration at a few grid points
        let tight = Tolerances::new(1e-13, 1e-15);
        for i in [5, 30, 64] {
            let t = return_time(&nl, table.amplitudes[i], tight).unwrap().period;
            assert!((t - table.periods[i]).abs() < 1e-8 * t);
        }
        let report = crossings(&nl, &table, 2).unwrap();
        let values: Vec<u32> = report.brackets.iter().map(|c| c.period.n).collect();
        assert_eq!(values, vec![1, 2]);

        let nl = soft();
        let table = sample(&nl, 5.0, 64).unwrap();
        assert_eq!(table.classification, Classification::SoftSpring);
        assert_eq!(table.periods[0], std::f64::consts::PI);
        assert!(table.periods.windows(2).all(|w| w[1] > w[0]));
        let report = crossings(&nl, &table, 1).unwrap();
        assert_eq!(report.brackets.len(), 1);
        let [lo, hi] = report.brackets[0].bracket;
        assert!(period(&nl, lo, Tolerances::default()).unwrap() < 4.0);
        assert!(period(&nl, hi, Tolerances::default()).unwrap() > 4.0);
    }

    #[test]
    fn slope_signs_match_dense_resampling() {
        let tol = Tolerances::default();
        for (nl, sign) in [(cubic(), -1.0), (soft(), 1.0)] {
            let s = slope(&nl, 1.0).unwrap();
            assert_eq!(s.value.signum(), sign);
            assert!(s.is_significant(10.0));
            let brute = (period(&nl, 1.01, tol).unwrap() - period(&nl, 0.99, tol).unwrap()) / 0.02;
            assert!((brute - s.value).abs() < 1e-3 * s.value.abs().max(1.0));
        }
    }

    #[test]
    fn zero_limit_matches_linearization() {
        for nl in [cubic(), soft()] {
            let table = sample(&nl, 5.0, 64).unwrap();
            assert!((table.extrapolated_zero_limit() - period_at_zero(&nl)).abs() < 1e-4);
        }
    }

    #[test]
    fn csv_layout() {
        let table = sample(&soft(), 2.0, 16).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("a,T,dT,classification"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
        assert_eq!(first[1].parse::<f64>().unwrap(), std::f64::consts::PI);
        assert_eq!(first[3], "soft_spring");
        assert_eq!(text.lines().count(), 18);
    }
}
