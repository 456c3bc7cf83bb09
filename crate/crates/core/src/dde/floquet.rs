use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::ExprError;
use crate::nonlinearity::Nonlinearity;
use crate::ode::Tolerances;

use super::history::node;
use super::simulate::method_of_steps;
use super::{DdeError, HistorySegment, PeriodicSignal};

pub const DEFAULT_EPS_SPEC: f64 = 1e-3;
pub const MIN_MONODROMY_MESH: usize = 64;
/// Multipliers at or below this modulus belong to the compact tail.
const TAIL: f64 = 1e-6;

/// `t -> (A(t), B(t))` for the linear equation `y' = A(t) y(t) + B(t) y(t-1)`.
pub trait Coefficients: Sync {
    fn at(&self, t: f64) -> Result<(f64, f64), ExprError>;
}

impl<F> Coefficients for F
where
    F: Fn(f64) -> Result<(f64, f64), ExprError> + Sync,
{
    fn at(&self, t: f64) -> Result<(f64, f64), ExprError> {
        self(t)
    }
}

/// Partial derivatives of `f` along a periodic solution.
pub struct LinearizationCoefficients<'a, S: ?Sized> {
    pub nl: &'a Nonlinearity,
    pub orbit: &'a S,
}

impl<S: PeriodicSignal + ?Sized> Coefficients for LinearizationCoefficients<'_, S> {
    fn at(&self, t: f64) -> Result<(f64, f64), ExprError> {
        self.nl.partials(self.orbit.value(t), self.orbit.value(t - 1.0))
    }
}

fn column_tolerances() -> Tolerances {
    Tolerances::new(1e-10, 1e-13)
}

/// Discretized period map of the linear equation on a uniform history mesh:
/// column `j` is the image of the cardinal history at node `j` after time
/// `period`, sampled on the same mesh.
pub fn monodromy_with<C: Coefficients + ?Sized>(
    coeffs: &C,
    period: f64,
    mesh: usize,
) -> Result<DMatrix<f64>, DdeError> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(DdeError::InvalidSpan(period));
    }
    let outputs: Vec<f64> = (0..=mesh).map(|i| period + node(mesh, i)).collect();
    let columns: Vec<Vec<f64>> = (0..=mesh)
        .into_par_iter()
        .map(|j| {
            let basis = HistorySegment::basis(mesh, j)?;
            let rhs = |t: f64, y: f64, yd: f64| {
                let (a, b) = coeffs.at(t)?;
                Ok(a * y + b * yd)
            };
            let sol = method_of_steps(rhs, basis, period, column_tolerances(), &outputs)?;
            Ok(outputs.iter().map(|&t| sol.eval(t)).collect())
        })
        .collect::<Result<_, DdeError>>()?;
    Ok(DMatrix::from_fn(mesh + 1, mesh + 1, |i, j| columns[j][i]))
}

/// Monodromy of the linearization along `orbit` over `period` (the full or half period).
pub fn monodromy<S: PeriodicSignal + ?Sized>(
    nl: &Nonlinearity,
    orbit: &S,
    period: f64,
    mesh: usize,
) -> Result<DMatrix<f64>, DdeError> {
    if mesh < MIN_MONODROMY_MESH {
        return Err(DdeError::InvalidMesh(mesh));
    }
    monodromy_with(&LinearizationCoefficients { nl, orbit }, period, mesh)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSpectrum {
    pub mesh: usize,
    pub period: Option<f64>,
    /// Multipliers above the tail cutoff, by decreasing modulus.
    pub multipliers: Vec<Multiplier>,
    pub unstable_count: usize,
    /// Distance from 1 to the nearest multiplier.
    pub trivial_defect: f64,
}

/// Eigenvalues of a monodromy matrix.
pub fn floquet(m: &DMatrix<f64>, eps_spec: f64) -> Result<FloquetSpectrum, DdeError> {
    if m.nrows() != m.ncols() {
        return Err(DdeError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let eig = m.clone().complex_eigenvalues();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(DdeError::EigenFailure);
    }
    let trivial_defect = eig.iter().map(|z| ((z.re - 1.0).powi(2) + z.im * z.im).sqrt()).fold(f64::INFINITY, f64::min);
    let mut multipliers: Vec<Multiplier> =
        eig.iter().map(|z| Multiplier { re: z.re, im: z.im, abs: z.norm() }).filter(|mu| mu.abs > TAIL).collect();
    multipliers.sort_by(|a, b| b.abs.total_cmp(&a.abs).then(b.im.total_cmp(&a.im)).then(b.re.total_cmp(&a.re)));
    let unstable_count = multipliers.iter().filter(|mu| mu.abs > 1.0 + eps_spec).count();
    Ok(FloquetSpectrum { mesh: m.nrows().saturating_sub(1), period: None, multipliers, unstable_count, trivial_defect })
}

/// Monodromy and spectrum in one call.
pub fn orbit_spectrum<S: PeriodicSignal + ?Sized>(
    nl: &Nonlinearity,
    orbit: &S,
    period: f64,
    mesh: usize,
    eps_spec: f64,
) -> Result<FloquetSpectrum, DdeError> {
    let m = monodromy(nl, orbit, period, mesh)?;
    let mut spec = floquet(&m, eps_spec)?;
    spec.period = Some(period);
    Ok(spec)
}

impl FloquetSpectrum {
    pub fn moduli(&self) -> impl Iterator<Item = f64> + '_ {
        self.multipliers.iter().map(|mu| mu.abs)
    }

    pub fn leading(&self) -> Option<Multiplier> {
        self.multipliers.first().copied()
    }

    /// Real negative multipliers, the candidates for the distinguished
    /// multiplier of the half-period map.
    pub fn negative_real(&self) -> Vec<f64> {
        self.multipliers.iter().filter(|mu| mu.re < 0.0 && mu.im.abs() <= 1e-8 * mu.abs).map(|mu| mu.re).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub coarse: FloquetSpectrum,
    pub fine: FloquetSpectrum,
    /// Change of the leading multiplier's modulus between the two meshes.
    pub drift: f64,
    pub converged: bool,
}

/// Spectra at mesh `N` and `2N`; converged when the leading modulus moves by less than `1e-3`.
pub fn converged_spectrum<S: PeriodicSignal + ?Sized>(
    nl: &Nonlinearity,
    orbit: &S,
    period: f64,
    mesh: usize,
    eps_spec: f64,
) -> Result<Convergence, DdeError> {
    let coarse = orbit_spectrum(nl, orbit, period, mesh, eps_spec)?;
    let fine = orbit_spectrum(nl, orbit, period, 2 * mesh, eps_spec)?;
    let lead = |s: &FloquetSpectrum| s.leading().map_or(0.0, |mu| mu.abs);
    let drift = (lead(&coarse) - lead(&fine)).abs();
    Ok(Convergence { converged: drift < 1e-3, coarse, fine, drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::FnSignal;
    use crate::Builtin;
    use std::f64::consts::FRAC_PI_2;

    fn cosine_orbit() -> (Nonlinearity, FnSignal<impl Fn(f64) -> f64 + Sync, impl Fn(f64) -> f64 + Sync>) {
        let nl = Nonlinearity::builtin_alpha(Builtin::Linear, -FRAC_PI_2).unwrap();
        let x = FnSignal {
            period: 4.0,
            value: |t: f64| (FRAC_PI_2 * t).cos(),
            derivative: |t: f64| -FRAC_PI_2 * (FRAC_PI_2 * t).sin(),
        };
        (nl, x)
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let s = floquet(&DMatrix::identity(5, 5), DEFAULT_EPS_SPEC).unwrap();
        assert_eq!(s.multipliers.len(), 5);
        assert!(s.multipliers.iter().all(|mu| (mu.re - 1.0).abs() < 1e-14 && mu.im == 0.0));
        assert_eq!(s.unstable_count, 0);
        assert_eq!(s.trivial_defect, 0.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5, 1.0]));
        let s = floquet(&d, DEFAULT_EPS_SPEC).unwrap();
        assert_eq!(s.unstable_count, 1);
        assert_eq!(s.moduli().collect::<Vec<_>>(), vec![2.0, 1.0, 0.5]);
    }

    #[test]
    fn rectangular_matrix_is_rejected() {
        assert!(matches!(floquet(&DMatrix::zeros(2, 3), 1e-3), Err(DdeError::NotSquare { .. })));
    }

    #[test]
    fn tail_is_dropped() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, 1e-9, 0.0]));
        assert_eq!(floquet(&d, 1e-3).unwrap().multipliers.len(), 1);
    }

    #[test]
    fn quarter_wave_has_trivial_multipliers() {
        let (nl, x) = cosine_orbit();
        let full = orbit_spectrum(&nl, &x, 4.0, 128, DEFAULT_EPS_SPEC).unwrap();
        assert!(full.trivial_defect < 1e-3, "{}", full.trivial_defect);
        let half = orbit_spectrum(&nl, &x, 2.0, 128, DEFAULT_EPS_SPEC).unwrap();
        let near_minus_one = half
            .multipliers
            .iter()
            .map(|mu| ((mu.re + 1.0).powi(2) + mu.im * mu.im).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(near_minus_one < 1e-3, "{near_minus_one}");
        assert!(!half.negative_real().is_empty());
    }

    #[test]
    fn decoupled_equation_gives_exponential_multiplier() {
        let a = -0.3;
        let coeffs = move |_t: f64| Ok((a, 0.0));
        let m = monodromy_with(&coeffs, 2.0, 64).unwrap();
        let s = floquet(&m, DEFAULT_EPS_SPEC).unwrap();
        assert_eq!(s.multipliers.len(), 1);
        assert!((s.multipliers[0].re - (2.0 * a).exp()).abs() < 1e-8);
    }

    #[test]
    fn coarse_mesh_is_rejected() {
        let (nl, x) = cosine_orbit();
        assert!(matches!(monodromy(&nl, &x, 4.0, 32), Err(DdeError::InvalidMesh(32))));
    }
}
