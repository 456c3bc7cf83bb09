//! Bifurcations along the homotopy `x'(t) = alpha f(x(t), x(t-1))`, read off
//! the unscaled period map through `T_{alpha f} = T_f / alpha`.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::export::fmt17;
use crate::periodmap::{realizable, PeriodMapTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Hopf,
    SaddleNodeCandidate,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Hopf => "hopf",
            EventKind::SaddleNodeCandidate => "saddle_node_candidate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub kind: EventKind,
    pub alpha: f64,
    pub n: u32,
    /// Zero for Hopf points, the extremum amplitude otherwise.
    pub amplitude: f64,
    /// The realizable period reached at this `alpha`.
    pub period: f64,
    /// Slope error bar at the extremum.
    pub slope_err: Option<f64>,
}

/// An interior extremum of the unscaled period map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub amplitude: f64,
    pub value: f64,
    pub slope_err: f64,
}

/// Extrema located by a least-squares parabola through the five grid points
/// around each significant slope sign change.
pub fn extrema(table: &PeriodMapTable) -> Vec<Extremum> {
    let last = table.len() - 1;
    table
        .extremum_intervals()
        .into_iter()
        .filter_map(|i| {
            let c = if table.slopes[i].value.abs() <= table.slopes[i + 1].value.abs() { i } else { i + 1 };
            let lo = c.saturating_sub(2).max(1).min(last.saturating_sub(4));
            let idx = lo..=(lo + 4).min(last);
            let center = table.amplitudes[c];
            let mut normal = Matrix3::zeros();
            let mut rhs = Vector3::zeros();
            for k in idx {
                let u = table.amplitudes[k] - center;
                let basis = Vector3::new(1.0, u, u * u);
                normal += basis * basis.transpose();
                rhs += basis * table.periods[k];
            }
            let p = normal.lu().solve(&rhs)?;
            if p[2] == 0.0 {
                return None;
            }
            let u = -p[1] / (2.0 * p[2]);
            Some(Extremum {
                amplitude: center + u,
                value: p[0] + p[1] * u + p[2] * u * u,
                slope_err: table.slopes[c].error,
            })
        })
        .collect()
}

/// Hopf points and saddle-node candidates with `alpha` in `[alpha_lo, alpha_hi]`, sorted by `alpha`.
pub fn scan(table: &PeriodMapTable, alpha_range: [f64; 2], n_max: u32) -> Vec<BifurcationEvent> {
    let [lo, hi] = alpha_range;
    let inside = |alpha: f64| alpha >= lo && alpha <= hi && alpha > 0.0;
    let t0 = table.periods[0];
    let targets = realizable(table.feedback, n_max);
    let mut events = Vec::new();
    for rp in &targets {
        let alpha = t0 / rp.value;
        if inside(alpha) {
            events.push(BifurcationEvent {
                kind: EventKind::Hopf,
                alpha,
                n: rp.n,
                amplitude: 0.0,
                period: rp.value,
                slope_err: None,
            });
        }
    }
    // extremum amplitudes do not move along the homotopy
    let ext = extrema(table);
    for rp in &targets {
        for e in &ext {
            let alpha = e.value / rp.value;
            if inside(alpha) {
                events.push(BifurcationEvent {
                    kind: EventKind::SaddleNodeCandidate,
                    alpha,
                    n: rp.n,
                    amplitude: e.amplitude,
                    period: rp.value,
                    slope_err: Some(e.slope_err),
                });
            }
        }
    }
    events.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.n.cmp(&b.n)));
    events
}

/// CSV with header `alpha,kind,n,amplitude,period`.
pub fn write_csv<W: Write>(events: &[BifurcationEvent], mut w: W) -> io::Result<()> {
    writeln!(w, "alpha,kind,n,amplitude,period")?;
    for e in events {
        writeln!(w, "{},{},{},{},{}", fmt17(e.alpha), e.kind, e.n, fmt17(e.amplitude), fmt17(e.period))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodmap::sample;
    use crate::planar::period_at_zero;
    use crate::{Builtin, Nonlinearity};
    use std::f64::consts::PI;

    #[test]
    fn first_hopf_of_negative_tanh() {
        let nl = Nonlinearity::builtin_alpha(Builtin::TanhSoft, -1.0).unwrap();
        let table = sample(&nl, 4.0, 16).unwrap();
        let events = scan(&table, [0.1, 2.0], 1);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::Hopf);
        assert!((events[0].alpha - PI / 2.0).abs() < 1e-12);
        let scaled = nl.scaled(events[0].alpha);
        assert!((period_at_zero(&scaled) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn linear_hopf_ladder() {
        let nl = Nonlinearity::builtin_alpha(Builtin::Linear, 1.0).unwrap();
        let table = sample(&nl, 4.0, 16).unwrap();
        let events = scan(&table, [0.1, 20.0], 2);
        let alphas: Vec<f64> = events.iter().map(|e| e.alpha).collect();
        assert_eq!(alphas.len(), 2);
        assert!((alphas[0] - 1.5 * PI).abs() < 1e-12);
        assert!((alphas[1] - 3.5 * PI).abs() < 1e-12);
        assert!(events.iter().all(|e| e.kind == EventKind::Hopf));
    }

    #[test]
    fn monotone_maps_have_no_saddle_nodes() {
        for nl in [
            Nonlinearity::builtin_alpha(Builtin::TanhSoft, -2.0).unwrap(),
            Nonlinearity::builtin_alpha(Builtin::CubicHard, 1.0).unwrap(),
        ] {
            let table = sample(&nl, 5.0, 32).unwrap();
            let events = scan(&table, [1e-3, 1e3], 4);
            assert!(events.iter().all(|e| e.kind == EventKind::Hopf));
            assert!(events.windows(2).all(|w| w[0].alpha < w[1].alpha));
        }
    }

    #[test]
    fn non_monotone_map_gives_saddle_node_candidates() {
        let nl = Nonlinearity::from_expr("tanh(eta) + 0.05*eta^3", Default::default()).unwrap();
        let table = sample(&nl, 6.0, 64).unwrap();
        assert_eq!(table.classification, crate::Classification::NonMonotone);
        let ext = extrema(&table);
        assert_eq!(ext.len(), 1);
        let e = ext[0];
        assert!(e.value > table.periods[0]);
        // the fitted peak sits near the largest sample
        let (imax, _) = table.periods.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((e.amplitude - table.amplitudes[imax]).abs() < table.amplitudes[imax + 1] - table.amplitudes[imax - 1]);
        let events = scan(&table, [1e-3, 1e3], 1);
        let sn: Vec<_> = events.iter().filter(|e| e.kind == EventKind::SaddleNodeCandidate).collect();
        assert_eq!(sn.len(), 1);
        assert!((sn[0].alpha - e.value * 0.75).abs() < 1e-12);
        let mut buf = Vec::new();
        write_csv(&events, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("alpha,kind,n,amplitude,period\n"));
    }
}
