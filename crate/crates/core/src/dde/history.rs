use serde::{Deserialize, Serialize};

use super::DdeError;

/// Smallest mesh accepted for a history segment.
pub const MIN_MESH: usize = 32;

/// A function on `[-1, 0]` stored as samples on a uniform mesh of `N + 1`
/// nodes and read back by piecewise cubic interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySegment {
    samples: Vec<f64>,
}

impl HistorySegment {
    pub fn new(samples: Vec<f64>) -> Result<Self, DdeError> {
        if samples.len() < MIN_MESH + 1 {
            return Err(DdeError::InvalidMesh(samples.len().saturating_sub(1)));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(DdeError::NonFiniteHistory(i));
        }
        Ok(HistorySegment { samples })
    }

    pub fn from_fn(mesh: usize, mut f: impl FnMut(f64) -> f64) -> Result<Self, DdeError> {
        HistorySegment::new((0..=mesh).map(|j| f(node(mesh, j))).collect())
    }

    pub fn constant(mesh: usize, value: f64) -> Result<Self, DdeError> {
        HistorySegment::from_fn(mesh, |_| value)
    }

    /// Cardinal function: one at node `j`, zero at every other node.
    pub fn basis(mesh: usize, j: usize) -> Result<Self, DdeError> {
        HistorySegment::from_fn(mesh, |_| 0.0).map(|mut h| {
            h.samples[j] = 1.0;
            h
        })
    }

    pub fn mesh(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.mesh();
        (0..=n).map(move |j| node(n, j))
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Four-point cubic Lagrange interpolation; exact at the nodes.
    pub fn value(&self, theta: f64) -> f64 {
        let n = self.mesh();
        let mut s = ((theta + 1.0) * n as f64).clamp(0.0, n as f64);
        if (s - s.round()).abs() <= 1e-9 {
            s = s.round();
        }
        let k = (s.floor() as usize).min(n - 1);
        let u = s - k as f64;
        if u == 0.0 {
            return self.samples[k];
        }
        if u == 1.0 {
            return self.samples[k + 1];
        }
        let first = k.saturating_sub(1).min(n - 3);
        let x = s - first as f64;
        let y = &self.samples[first..first + 4];
        // nodes at 0, 1, 2, 3 in local coordinates
        let l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
        let l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
        let l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
        let l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
        l0 * y[0] + l1 * y[1] + l2 * y[2] + l3 * y[3]
    }
}

pub(crate) fn node(mesh: usize, j: usize) -> f64 {
    if j == mesh {
        0.0
    } else {
        -1.0 + j as f64 / mesh as f64
    }
}
