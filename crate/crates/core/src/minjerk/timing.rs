//! Segment-time allocation and total-time scaling.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{solve_with_kernel, CompositeTrajectory, DerivativeSpec, MinJerkKernel};
use crate::error::{Error, Result};
use crate::optim::{golden_section_max, nelder_mead, NelderMeadSettings};

/// Tangential and per-joint velocity, acceleration and jerk bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicLimits {
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
    pub vd_max: f64,
    pub ad_max: f64,
    pub jd_max: f64,
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("j_max", self.j_max),
            ("vd_max", self.vd_max),
            ("ad_max", self.ad_max),
            ("jd_max", self.jd_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InfeasibleLimits { name: name.into(), value: v });
            }
        }
        Ok(())
    }

    pub fn task(&self) -> [f64; 3] {
        [self.v_max, self.a_max, self.j_max]
    }

    pub fn joint(&self) -> [f64; 3] {
        [self.vd_max, self.ad_max, self.jd_max]
    }
}

/// Result of [`optimize_segment_times`].
#[derive(Debug, Clone)]
pub struct TimeAllocation {
    pub tau: Vec<f64>,
    pub cost: f64,
    pub uniform_cost: f64,
    pub evaluations: usize,
    /// The evaluation cap was reached before convergence.
    pub stalled: bool,
}

/// Settings for [`optimize_segment_times`].
#[derive(Debug, Clone, Copy)]
pub struct AllocationSettings {
    pub tau_floor: f64,
    pub max_evaluations: usize,
}

impl Default for AllocationSettings {
    fn default() -> Self {
        AllocationSettings { tau_floor: 1e-3, max_evaluations: 20_000 }
    }
}

/// Maps unconstrained coordinates onto `{τ ≥ floor, Στ = 1}`.
fn softmax_tau(z: &[f64], floor: f64) -> Vec<f64> {
    let m = z.len() + 1;
    let zmax = z.iter().fold(0.0f64, |a, b| a.max(*b));
    let e: Vec<f64> = z.iter().chain(std::iter::once(&0.0)).map(|v| (v - zmax).exp()).collect();
    let sum: f64 = e.iter().sum();
    let free = 1.0 - m as f64 * floor;
    e.iter().map(|v| floor + free * v / sum).collect()
}

fn tau_to_z(tau: &[f64], floor: f64) -> Vec<f64> {
    let m = tau.len();
    let last = (tau[m - 1] - floor).max(1e-300);
    tau[..m - 1].iter().map(|t| ((t - floor).max(1e-300) / last).ln()).collect()
}

/// Minimizes the summed cost of all axes over segment durations on the unit
/// simplex. Free derivatives are re-solved at every iterate.
pub fn optimize_segment_times(axes: &[DerivativeSpec], r: usize, n: usize, settings: AllocationSettings) -> Result<TimeAllocation> {
    let first = axes.first().ok_or_else(|| Error::InconsistentSpec("no axes".into()))?;
    let m = first.waypoint_count() - 1;
    if axes.iter().any(|a| a.waypoint_count() != m + 1) {
        return Err(Error::InconsistentSpec("axes disagree on waypoint count".into()));
    }
    let kernel = MinJerkKernel::new(n, r)?;
    let total_cost = |tau: &[f64]| -> Result<f64> {
        let mut c = 0.0;
        for spec in axes {
            c += solve_with_kernel(&kernel, spec, tau)?.cost;
        }
        Ok(c)
    };
    let uniform = vec![1.0 / m as f64; m];
    let uniform_cost = total_cost(&uniform)?;
    if m == 1 {
        return Ok(TimeAllocation { tau: vec![1.0], cost: uniform_cost, uniform_cost, evaluations: 1, stalled: false });
    }
    let floor = settings.tau_floor.min(0.5 / m as f64);
    // distance-proportional start
    let mut dist = vec![0.0; m];
    for spec in axes {
        for (k, d) in dist.iter_mut().enumerate() {
            let a = spec.values[k][0].unwrap_or(0.0);
            let b = spec.values[k + 1][0].unwrap_or(0.0);
            *d += (b - a).powi(2);
        }
    }
    let dsum: f64 = dist.iter().map(|d| d.sqrt()).sum();
    let mut start = uniform.clone();
    let mut start_cost = uniform_cost;
    if dsum > 0.0 {
        let prop: Vec<f64> = dist.iter().map(|d| floor + (1.0 - m as f64 * floor) * d.sqrt() / dsum).collect();
        if let Ok(c) = total_cost(&prop) {
            if c < start_cost {
                start = prop;
                start_cost = c;
            }
        }
    }
    let scale = start_cost.abs().max(f64::MIN_POSITIVE);
    let mut objective = |z: &[f64]| -> f64 {
        let tau = softmax_tau(z, floor);
        total_cost(&tau).map(|c| c / scale).unwrap_or(f64::INFINITY)
    };
    let nm = nelder_mead(
        &mut objective,
        &tau_to_z(&start, floor),
        NelderMeadSettings { max_evaluations: settings.max_evaluations, f_tol: 1e-13, x_tol: 1e-8, initial_step: 0.5, restarts: 2 },
    );
    let mut tau = softmax_tau(&nm.x, floor);
    let mut cost = total_cost(&tau)?;
    if cost > uniform_cost {
        tau = uniform;
        cost = uniform_cost;
    }
    if !nm.converged {
        warn!("segment-time allocation stopped at the evaluation cap ({} evaluations)", nm.evaluations);
    }
    debug!("time allocation: cost {cost:e} (uniform {uniform_cost:e}) after {} evaluations", nm.evaluations);
    Ok(TimeAllocation { tau, cost, uniform_cost, evaluations: nm.evaluations, stalled: !nm.converged })
}

/// One bounded quantity for time scaling: its derivative order (how it
/// scales with duration) and its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstraint {
    pub name: String,
    pub order: u32,
    pub limit: f64,
}

/// Peak of one constraint on the unscaled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPeak {
    pub name: String,
    pub order: u32,
    pub limit: f64,
    pub peak: f64,
    pub at: f64,
    /// `(peak/limit)^{1/order}`.
    pub required_scale: f64,
}

/// Result of [`time_scale_optimize`].
#[derive(Debug, Clone)]
pub struct ScaleReport {
    pub k: f64,
    pub peaks: Vec<ConstraintPeak>,
    pub binding: usize,
    pub scaled: CompositeTrajectory,
}

/// Finds the peaks of every constrained signal on the normalized trajectory
/// by dense sampling plus golden-section refinement, then applies the
/// smallest uniform time stretch `k* = max (peak/limit)^{1/order}`.
///
/// `signals(t)` returns the value of every constraint at time `t` of the
/// unscaled trajectory.
pub fn time_scale_optimize(
    traj: &CompositeTrajectory,
    constraints: &[ScaleConstraint],
    signals: &dyn Fn(f64) -> Vec<f64>,
    samples_per_segment: usize,
) -> Result<ScaleReport> {
    for c in constraints {
        if !(c.limit > 0.0) || c.order == 0 {
            return Err(Error::InfeasibleLimits { name: c.name.clone(), value: c.limit });
        }
    }
    let peaks = find_peaks(traj, constraints.len(), signals, samples_per_segment);
    let mut out = Vec::with_capacity(constraints.len());
    let (mut k, mut binding) = (0.0f64, 0);
    for (i, (c, (peak, at))) in constraints.iter().zip(peaks).enumerate() {
        let req = (peak / c.limit).powf(1.0 / c.order as f64);
        if req > k {
            k = req;
            binding = i;
        }
        out.push(ConstraintPeak { name: c.name.clone(), order: c.order, limit: c.limit, peak, at, required_scale: req });
    }
    if !(k > 0.0) {
        return Err(Error::InvalidPath("trajectory has no motion to scale".into()));
    }
    Ok(ScaleReport { k, peaks: out, binding, scaled: traj.time_scaled(k) })
}

/// Per-signal `(max |value|, time)` over the trajectory.
pub fn find_peaks(
    traj: &CompositeTrajectory,
    count: usize,
    signals: &dyn Fn(f64) -> Vec<f64>,
    samples_per_segment: usize,
) -> Vec<(f64, f64)> {
    let samples_per_segment = samples_per_segment.max(2);
    let mut times = Vec::new();
    for k in 0..traj.segment_count() {
        let (t0, t1) = (traj.starts()[k], traj.starts()[k + 1]);
        for i in 0..samples_per_segment {
            times.push(t0 + (t1 - t0) * i as f64 / (samples_per_segment - 1) as f64);
        }
    }
    let values: Vec<Vec<f64>> = times.iter().map(|&t| signals(t).iter().map(|v| v.abs()).collect()).collect();
    let mut result = Vec::with_capacity(count);
    for c in 0..count {
        let (mut best, mut best_t) = (0.0f64, 0.0);
        for (i, v) in values.iter().enumerate() {
            if v[c] > best {
                best = v[c];
                best_t = times[i];
            }
        }
        let threshold = 0.99 * best;
        let mut refined = (best, best_t);
        for i in 0..times.len() {
            let v = values[i][c];
            if v < threshold {
                continue;
            }
            let left = if i > 0 { values[i - 1][c] } else { f64::NEG_INFINITY };
            let right = if i + 1 < times.len() { values[i + 1][c] } else { f64::NEG_INFINITY };
            if v < left || v < right {
                continue;
            }
            let a = if i > 0 { times[i - 1] } else { times[i] };
            let b = if i + 1 < times.len() { times[i + 1] } else { times[i] };
            if b > a {
                let (t, fv) = golden_section_max(|t| signals(t)[c].abs(), a, b, 1e-12 * traj.total_time().max(1.0));
                if fv > refined.0 {
                    refined = (fv, t);
                }
            }
        }
        result.push(refined);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_parameterization_sums_to_one() {
        let tau = softmax_tau(&[0.3, -2.0, 5.0], 1e-3);
        assert!((tau.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(tau.iter().all(|t| *t >= 1e-3));
        let z = tau_to_z(&tau, 1e-3);
        let back = softmax_tau(&z, 1e-3);
        for (a, b) in tau.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_two_segments_split_evenly() {
        let spec = DerivativeSpec::rest_to_rest(&[0.0, 1.0, 2.0], 4);
        let alloc = optimize_segment_times(&[spec], 3, 7, AllocationSettings::default()).unwrap();
        assert!((alloc.tau[0] - 0.5).abs() < 1e-4, "{:?}", alloc.tau);
        let one = optimize_segment_times(&[DerivativeSpec::rest_to_rest(&[0.0, 1.0], 4)], 3, 7, AllocationSettings::default()).unwrap();
        assert_eq!(one.tau, vec![1.0]);
    }

    #[test]
    fn velocity_bound_doubles_duration() {
        let spec = DerivativeSpec::rest_to_rest(&[0.0, 1.0], 4);
        let traj = super::super::solve_min_jerk(&spec, &[1.0], 3, 7).unwrap().trajectory;
        let vpeak = (0..=1000).map(|i| traj.eval(0, i as f64 / 1000.0, 1).abs()).fold(0.0, f64::max);
        let cons = [
            ScaleConstraint { name: "v".into(), order: 1, limit: vpeak / 2.0 },
            ScaleConstraint { name: "j".into(), order: 3, limit: 1e9 },
        ];
        let sig = |t: f64| vec![traj.eval(0, t, 1), traj.eval(0, t, 3)];
        let rep = time_scale_optimize(&traj, &cons, &sig, 2000).unwrap();
        assert!((rep.k - 2.0).abs() < 1e-6, "{}", rep.k);
        assert_eq!(rep.binding, 0);
        assert!(rep.scaled.total_time() - 2.0 < 1e-6);
    }
}
