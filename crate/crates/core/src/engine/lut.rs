//! Joint-space coefficient table evaluated at run time.

use nalgebra::Vector4;

use crate::error::{Error, Result};
use crate::minjerk::bernstein::bezier_derivative;
use crate::minjerk::CompositeTrajectory;

/// Per-segment Bézier control points of the four joints on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLut {
    degree: usize,
    dt: f64,
    starts: Vec<f64>,
    taus: Vec<f64>,
    /// `coeffs[(k*4 + joint)*(degree+1) + c]`
    coeffs: Vec<f64>,
}

/// Work done by one table evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LutStats {
    pub segments_touched: usize,
    pub coefficients_read: usize,
}

impl JointLut {
    /// Table from a four-axis trajectory whose segments have nominal length `dt`.
    pub fn from_trajectory(traj: &CompositeTrajectory, dt: f64) -> JointLut {
        let m = traj.segment_count();
        let mut coeffs = Vec::with_capacity(m * 4 * (traj.degree() + 1));
        for k in 0..m {
            for j in 0..4 {
                coeffs.extend_from_slice(traj.control_points(j, k));
            }
        }
        JointLut { degree: traj.degree(), dt, starts: traj.starts()[..m].to_vec(), taus: traj.durations().to_vec(), coeffs }
    }

    /// Table from stored rows: segment starts, durations and control points
    /// laid out as `[segment][joint][c]`.
    pub fn from_parts(degree: usize, starts: Vec<f64>, taus: Vec<f64>, coeffs: Vec<f64>) -> Result<JointLut> {
        let m = taus.len();
        if m == 0 || starts.len() != m {
            return Err(Error::LengthMismatch { a: starts.len(), b: m });
        }
        if coeffs.len() != m * 4 * (degree + 1) {
            return Err(Error::LengthMismatch { a: coeffs.len(), b: m * 4 * (degree + 1) });
        }
        if let Some((k, t)) = taus.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
            return Err(Error::NonPositiveDuration { segment: k, tau: *t });
        }
        Ok(JointLut { degree, dt: taus[0], starts, taus, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn segment_count(&self) -> usize {
        self.taus.len()
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn durations(&self) -> &[f64] {
        &self.taus
    }

    pub fn total_time(&self) -> f64 {
        self.starts[self.starts.len() - 1] + self.taus[self.taus.len() - 1]
    }

    pub fn control(&self, segment: usize, joint: usize) -> &[f64] {
        let w = self.degree + 1;
        let o = (segment * 4 + joint) * w;
        &self.coeffs[o..o + w]
    }

    /// Segment containing `t`: one division plus at most one correction step.
    pub fn locate(&self, t: f64) -> usize {
        let m = self.taus.len();
        let mut k = if t > 0.0 { ((t / self.dt) as usize).min(m - 1) } else { 0 };
        if k > 0 && t < self.starts[k] {
            k -= 1;
        } else if k + 1 < m && t >= self.starts[k + 1] {
            k += 1;
        }
        k
    }

    /// Joint positions and derivatives 1..=3 at `t`.
    pub fn eval(&self, t: f64) -> (Vector4<f64>, [Vector4<f64>; 3]) {
        let (d, dd, _) = self.eval_with_stats(t);
        (d, dd)
    }

    pub fn eval_with_stats(&self, t: f64) -> (Vector4<f64>, [Vector4<f64>; 3], LutStats) {
        let k = self.locate(t);
        let tau = self.taus[k];
        let zeta = ((t - self.starts[k]) / tau).clamp(0.0, 1.0);
        let mut d = Vector4::zeros();
        let mut dd = [Vector4::zeros(); 3];
        let mut stats = LutStats { segments_touched: 1, coefficients_read: 0 };
        for j in 0..4 {
            let ctrl = self.control(k, j);
            stats.coefficients_read += ctrl.len();
            d[j] = bezier_derivative(ctrl, zeta, 0);
            let mut scale = 1.0;
            for r in 1..=3 {
                scale /= tau;
                dd[r - 1][j] = bezier_derivative(ctrl, zeta, r) * scale;
            }
        }
        (d, dd, stats)
    }
}
