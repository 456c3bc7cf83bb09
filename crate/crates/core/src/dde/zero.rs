use serde::{Deserialize, Serialize};

use crate::nonlinearity::Feedback;

use super::{DdeError, HistorySegment};

/// Samples per history mesh cell when counting sign changes.
const REFINE: usize = 8;
/// Bisection steps spent locating each alternation.
const BISECT: usize = 8;
/// Values below this fraction of the segment maximum count as zeros.
const ZERO_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignChanges {
    pub count: usize,
    /// Approximate location of each alternation.
    pub roots: Vec<f64>,
}

/// Strict sign alternations of the interpolated segment, with zeros dropped.
pub fn sign_changes(h: &HistorySegment) -> Result<SignChanges, DdeError> {
    let max = h.max_abs();
    if max <= 1e-14 {
        return Err(DdeError::ZeroSegment);
    }
    let floor = ZERO_REL * max;
    let n = REFINE * h.mesh();
    let mut last: Option<(f64, f64)> = None;
    let mut roots = Vec::new();
    for i in 0..=n {
        let theta = if i == n { 0.0 } else { -1.0 + i as f64 / n as f64 };
        let v = h.value(theta);
        if v.abs() <= floor {
            continue;
        }
        if let Some((t0, v0)) = last {
            if v0 * v < 0.0 {
                let (mut lo, mut hi) = (t0, theta);
                for _ in 0..BISECT {
                    let mid = 0.5 * (lo + hi);
                    let vm = h.value(mid);
                    if vm.abs() <= floor {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if vm * v0 > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        last = Some((theta, v));
    }
    Ok(SignChanges { count: roots.len(), roots })
}

/// Sign changes rounded up to even parity (positive feedback) or odd parity
/// (negative feedback).
pub fn zero_number(h: &HistorySegment, feedback: Feedback) -> Result<usize, DdeError> {
    Ok(round_parity(sign_changes(h)?.count, feedback))
}

pub(crate) fn round_parity(sc: usize, feedback: Feedback) -> usize {
    let want_odd = feedback == Feedback::Negative;
    if (sc % 2 == 1) == want_odd {
        sc
    } else {
        sc + 1
    }
}
