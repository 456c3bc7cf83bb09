//! Amplitudes of the period-4 delay-equation orbits, their construction from
//! planar orbits, and their Morse indices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dde::PeriodicSignal;
use crate::nonlinearity::{Feedback, Nonlinearity};
use crate::ode::{DenseSolution, Tolerances};
use crate::periodmap::{self, CrossingReport, PeriodMapError, PeriodMapTable, RealizablePeriod, Slope, Tangency};
use crate::planar::{integrate_through, return_time, PlanarError, PlanarState};
use crate::roots::{brent, RootError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error("T_f - {value} has no sign change on [{a_lo}, {a_hi}]")]
    InvalidBracket { value: f64, a_lo: f64, a_hi: f64 },
    #[error("root iteration for T_f(a) = {value} did not converge within {evals} evaluations")]
    NotConverged { value: f64, evals: usize },
    #[error(transparent)]
    Planar(#[from] PlanarError),
    #[error(transparent)]
    PeriodMap(#[from] PeriodMapError),
}

/// Mesh nodes per period of a constructed orbit.
pub const SOLUTION_NODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitOptions {
    /// Required `|T_f(a) - J|` at the root.
    pub root_tol: f64,
    pub max_evals: usize,
    /// Integration tolerances for every period evaluation.
    pub rtol: f64,
    pub atol: f64,
    /// Hyperbolic when `|T_f'|` exceeds this multiple of its error estimate.
    pub significance: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions { root_tol: 1e-10, max_evals: 200, rtol: 1e-12, atol: 1e-14, significance: 10.0 }
    }
}

impl OrbitOptions {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances::new(self.rtol, self.atol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRecord {
    pub amplitude: f64,
    pub period: f64,
    pub n: u32,
    pub feedback: Feedback,
    pub slope: f64,
    pub slope_err: f64,
    pub hyperbolic: bool,
    pub morse_index: u32,
    /// One minimal period of `(xi, eta)` from `(amplitude, 0)`.
    pub solution: DenseSolution<2>,
}

/// The exported fields of an [`OrbitRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub amplitude: f64,
    pub period: f64,
    pub n: u32,
    pub feedback: Feedback,
    pub slope: f64,
    pub slope_err: f64,
    pub hyperbolic: bool,
    pub morse_index: u32,
}

impl OrbitRecord {
    pub fn summary(&self) -> OrbitSummary {
        OrbitSummary {
            amplitude: self.amplitude,
            period: self.period,
            n: self.n,
            feedback: self.feedback,
            slope: self.slope,
            slope_err: self.slope_err,
            hyperbolic: self.hyperbolic,
            morse_index: self.morse_index,
        }
    }

    /// The delay-equation solution `x*(t) = xi(t)`.
    pub fn construct_solution(&self) -> KaplanYorkeSolution {
        KaplanYorkeSolution { period: self.period, amplitude: self.amplitude, planar: self.solution.clone() }
    }
}

/// `2n - 1` or `2n` for positive feedback, `2n - 2` or `2n - 1` for negative
/// feedback, the smaller value when `T_f' >= 0`. Non-hyperbolic records use
/// the `T_f' >= 0` row.
pub fn morse_index(feedback: Feedback, n: u32, slope: f64, hyperbolic: bool) -> u32 {
    assert!(n >= 1, "branch index starts at 1");
    let rising = !hyperbolic || slope >= 0.0;
    match (feedback, rising) {
        (Feedback::Positive, true) => 2 * n - 1,
        (Feedback::Positive, false) => 2 * n,
        (Feedback::Negative, true) => 2 * n - 2,
        (Feedback::Negative, false) => 2 * n - 1,
    }
}

fn period_of(nl: &Nonlinearity, a: f64, tol: Tolerances) -> Result<f64, PlanarError> {
    periodmap::period(nl, a, tol)
}

/// Solves `T_f(a) = rp.value` on the bracket and assembles the record.
pub fn solve_branch(
    nl: &Nonlinearity,
    rp: RealizablePeriod,
    bracket: [f64; 2],
    options: OrbitOptions,
) -> Result<OrbitRecord, OrbitError> {
    let tol = options.tolerances();
    let [a_lo, a_hi] = bracket;
    let v = rp.value;
    let g_lo = period_of(nl, a_lo, tol)? - v;
    let g_hi = period_of(nl, a_hi, tol)? - v;
    let root = brent(
        |a| Ok::<_, PlanarError>(period_of(nl, a, tol)? - v),
        a_lo,
        a_hi,
        g_lo,
        g_hi,
        options.root_tol,
        options.max_evals,
    )
    .map_err(|e| match e {
        RootError::NotBracketed { .. } => OrbitError::InvalidBracket { value: v, a_lo, a_hi },
        RootError::NotConverged { evals, .. } => OrbitError::NotConverged { value: v, evals },
        RootError::Eval(e) => OrbitError::Planar(e),
    })?;
    orbit_at(nl, root.x, rp, options)
}

/// Builds the record at a given amplitude without solving for it.
///
/// Intended for fixtures such as the linear quarter-wave equation, whose
/// period map is constant and therefore has no crossings.
pub fn orbit_at(
    nl: &Nonlinearity,
    amplitude: f64,
    rp: RealizablePeriod,
    options: OrbitOptions,
) -> Result<OrbitRecord, OrbitError> {
    let tol = options.tolerances();
    let rt = return_time(nl, amplitude, tol)?;
    // uniform forced nodes keep the Hermite derivative accurate
    let stops: Vec<f64> = (1..=SOLUTION_NODES).map(|i| rt.period * i as f64 / SOLUTION_NODES as f64).collect();
    let solution = integrate_through(nl, PlanarState::new(amplitude, 0.0), &stops, tol)?;
    let Slope { value: slope, error: slope_err } = periodmap::slope_with(nl, amplitude, tol)?;
    let hyperbolic = slope.abs() > options.significance * slope_err;
    Ok(OrbitRecord {
        amplitude,
        period: rt.period,
        n: rp.n,
        feedback: rp.feedback,
        slope,
        slope_err,
        hyperbolic,
        morse_index: morse_index(rp.feedback, rp.n, slope, hyperbolic),
        solution,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSearch {
    pub records: Vec<OrbitRecord>,
    pub crossings: CrossingReport,
}

impl OrbitSearch {
    pub fn tangencies(&self) -> &[Tangency] {
        &self.crossings.tangencies
    }
}

/// Every orbit with branch index up to `n_max` whose amplitude lies on the
/// sampled grid, ordered by branch and amplitude.
pub fn find_orbits(
    nl: &Nonlinearity,
    table: &PeriodMapTable,
    n_max: u32,
    options: OrbitOptions,
) -> Result<OrbitSearch, OrbitError> {
    let crossings = periodmap::crossings(nl, table, n_max)?;
    let mut records: Vec<OrbitRecord> = crossings
        .brackets
        .par_iter()
        .map(|c| solve_branch(nl, c.period, c.bracket, options))
        .collect::<Result<_, _>>()?;
    records.sort_by(|a, b| a.n.cmp(&b.n).then(a.amplitude.total_cmp(&b.amplitude)));
    Ok(OrbitSearch { records, crossings })
}

/// `x*(t) = xi(t mod T)` for the planar orbit through `(amplitude, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanYorkeSolution {
    pub period: f64,
    pub amplitude: f64,
    planar: DenseSolution<2>,
}

impl KaplanYorkeSolution {
    fn phase(&self, t: f64) -> f64 {
        let s = t.rem_euclid(self.period);
        if s >= self.period {
            0.0
        } else {
            s
        }
    }

    /// The planar state `(x*(t), eta(t))`.
    pub fn planar(&self, t: f64) -> [f64; 2] {
        self.planar.eval(self.phase(t))
    }

    /// `x*(t - 1)` read from the second planar coordinate.
    pub fn delayed(&self, t: f64) -> f64 {
        self.planar(t)[1]
    }

    /// `(t, x*(t))` on `[-1, T]` with `points + 1` equally spaced samples.
    pub fn samples(&self, points: usize) -> Vec<(f64, f64)> {
        let span = self.period + 1.0;
        (0..=points)
            .map(|i| {
                let t = if i == points { self.period } else { -1.0 + span * i as f64 / points as f64 };
                (t, self.value(t))
            })
            .collect()
    }
}

impl PeriodicSignal for KaplanYorkeSolution {
    fn period(&self) -> f64 {
        self.period
    }

    fn value(&self, t: f64) -> f64 {
        self.planar(t)[0]
    }

    fn derivative(&self, t: f64) -> f64 {
        self.planar.eval_with_derivative(self.phase(t)).1[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::{residual, sign_changes, zero_number, HistorySegment};
    use crate::periodmap::sample;
    use crate::planar::winding_number;
    use crate::Builtin;
    use std::f64::consts::FRAC_PI_2;

    fn soft() -> Nonlinearity {
        Nonlinearity::builtin_alpha(Builtin::TanhSoft, -2.0).unwrap()
    }

    fn cubic() -> Nonlinearity {
        Nonlinearity::builtin_alpha(Builtin::CubicHard, 1.0).unwrap()
    }

    fn first_orbit(nl: &Nonlinearity) -> OrbitRecord {
        let table = sample(nl, 8.0, 32).unwrap();
        let search = find_orbits(nl, &table, 1, OrbitOptions::default()).unwrap();
        assert_eq!(search.records.len(), 1);
        search.records.into_iter().next().unwrap()
    }

    #[test]
    fn morse_rows() {
        assert_eq!(morse_index(Feedback::Positive, 1, -0.5, true), 2);
        assert_eq!(morse_index(Feedback::Positive, 1, 0.5, true), 1);
        assert_eq!(morse_index(Feedback::Negative, 1, 0.5, true), 0);
        assert_eq!(morse_index(Feedback::Negative, 2, -0.5, true), 3);
        assert_eq!(morse_index(Feedback::Negative, 2, -0.5, false), 2);
    }

    #[test]
    fn stable_soft_spring_orbit() {
        let nl = soft();
        let rec = first_orbit(&nl);
        assert!(rec.amplitude > 0.0);
        assert!((rec.period - 4.0).abs() < 1e-10);
        assert!(rec.slope > 0.0 && rec.hyperbolic);
        assert_eq!(rec.morse_index, 0);
        let again = return_time(&nl, rec.amplitude, Tolerances::new(1e-12, 1e-14)).unwrap().period;
        assert!((again - rec.period).abs() < 1e-9);
        let x = rec.construct_solution();
        assert!(residual(&nl, &x).unwrap() < 1e-6);
    }

    #[test]
    fn hard_spring_branches() {
        let nl = cubic();
        let table = sample(&nl, 8.0, 32).unwrap();
        let search = find_orbits(&nl, &table, 2, OrbitOptions::default()).unwrap();
        let ns: Vec<u32> = search.records.iter().map(|r| r.n).collect();
        assert_eq!(ns, vec![1, 2]);
        for rec in &search.records {
            assert!((rec.period - RealizablePeriod::new(Feedback::Positive, rec.n).value).abs() < 1e-10);
            assert_eq!(rec.morse_index, 2 * rec.n);
            let x = rec.construct_solution();
            assert!(residual(&nl, &x).unwrap() < 1e-6);
        }
        // nested planar orbits: the larger branch encloses the smaller one
        let (a1, a2) = (search.records[0].amplitude, search.records[1].amplitude);
        assert!(a2 > a1);
        let inner = &search.records[0].solution;
        let r_inner = inner.states().iter().map(|s| s[0].hypot(s[1])).fold(0.0, f64::max);
        let outer = &search.records[1].solution;
        let r_outer = outer.states().iter().map(|s| s[0].hypot(s[1])).fold(f64::INFINITY, f64::min);
        assert!(r_outer > r_inner);
    }

    #[test]
    fn linear_map_has_no_bracket() {
        let nl = Nonlinearity::builtin_alpha(Builtin::Linear, 1.0).unwrap();
        let rp = RealizablePeriod::new(Feedback::Positive, 1);
        let err = solve_branch(&nl, rp, [0.5, 2.0], OrbitOptions::default()).unwrap_err();
        assert!(matches!(err, OrbitError::InvalidBracket { .. }));
    }

    #[test]
    fn quarter_wave_fixture_is_the_cosine() {
        let nl = Nonlinearity::builtin_alpha(Builtin::Linear, -FRAC_PI_2).unwrap();
        let rec = orbit_at(&nl, 1.0, RealizablePeriod::new(Feedback::Negative, 1), OrbitOptions::default()).unwrap();
        assert!((rec.period - 4.0).abs() < 1e-10);
        assert!(!rec.hyperbolic);
        assert_eq!(rec.morse_index, 0);
        let x = rec.construct_solution();
        for i in 0..=200 {
            let t = -1.0 + 5.0 * i as f64 / 200.0;
            assert!((x.value(t) - (FRAC_PI_2 * t).cos()).abs() < 1e-9);
            assert!((x.value(t - 1.0) - (FRAC_PI_2 * t).sin()).abs() < 1e-9);
            assert!((x.delayed(t) - x.value(t - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn half_period_antisymmetry() {
        for nl in [soft(), cubic()] {
            let x = first_orbit(&nl).construct_solution();
            let worst = (0..2000)
                .map(|i| -1.0 + 5.0 * i as f64 / 2000.0)
                .map(|t| (x.value(t - 2.0) + x.value(t)).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-7, "{worst}");
        }
    }

    #[test]
    fn extremes_are_attained_once() {
        for nl in [soft(), cubic()] {
            let rec = first_orbit(&nl);
            let x = rec.construct_solution();
            let n = 4000;
            let vals: Vec<f64> = (0..n).map(|i| x.value(rec.period * i as f64 / n as f64)).collect();
            // derivative changes sign exactly twice per period
            let d: Vec<f64> = (0..n).map(|i| x.derivative(rec.period * (i as f64 + 0.5) / n as f64)).collect();
            let flips = (0..n).filter(|&i| d[i] * d[(i + 1) % n] < 0.0).count();
            assert_eq!(flips, 2);
            let near_max = vals.iter().filter(|v| (*v - rec.amplitude).abs() < 1e-6 * rec.amplitude).count();
            assert!(near_max >= 1);
            assert!(winding_number(&rec.solution).abs() > 0.99);
        }
    }

    #[test]
    fn zero_number_of_the_derivative() {
        for (nl, expected) in [(soft(), 1), (cubic(), 2)] {
            let rec = first_orbit(&nl);
            let x = rec.construct_solution();
            let seg = HistorySegment::from_fn(256, |theta| x.derivative(theta)).unwrap();
            assert!(sign_changes(&seg).is_ok());
            assert_eq!(zero_number(&seg, rec.feedback).unwrap(), expected);
        }
    }
}
