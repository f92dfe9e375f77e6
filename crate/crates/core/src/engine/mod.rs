//! Two-stage motion planning: geometric path, task-space time law, joint
//! lookup table, plus the baseline interpolators and metrics used to compare
//! them.

mod baseline;
mod lut;
mod metrics;

pub use baseline::{baseline_interpolate, compare_interpolators, BaselineMethod, BaselineStream, CompareRow, FeedSchedule};
pub use lut::{JointLut, LutStats};
pub use metrics::{compute_metrics, difference as metrics_difference, MetricsReport, SampleStream, SignalMetrics};

use log::{debug, info, warn};
use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::bspline::{arc_length_table, fit_interpolating_spline, ArcLengthSettings, ArcLengthTable, BSplineCurve};
use crate::error::{Error, Result};
use crate::jet::Jet3;
use crate::kinematics::{Pose, RobotGeometry};
use crate::minjerk::timing::AllocationSettings;
use crate::minjerk::{
    optimize_segment_times, solve_min_jerk, time_scale_optimize, CompositeTrajectory, DerivativeSpec, KinematicLimits, MinJerkKernel,
    ScaleConstraint, ScaleReport,
};
use crate::modifier::{fit_modifier_polynomials, ModifierPolySet};
use crate::quat::{euler_to_quat, fit_orientation_spline, QuatSpline};
use crate::sync::{fit_w_of_s, PiecewiseBezier, SyncSettings};
use crate::waypoints::WaypointSet;

/// Planner settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub position_degree: usize,
    pub orientation_degree: usize,
    pub sync_degree: usize,
    pub trajectory_degree: usize,
    pub quadrature_tolerance: f64,
    pub eps_mse: f64,
    /// Acceptable KKT residual of the synchronization fit.
    pub qp_tolerance: f64,
    /// Offline sampling period (s).
    pub dt_offline: f64,
    /// Runtime tick period (s).
    pub dt_runtime: f64,
    /// Dense samples per segment for limit peak search.
    pub samples_per_segment: usize,
    /// Optimize segment durations before scaling (uniform otherwise).
    pub optimize_segment_times: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            position_degree: 5,
            orientation_degree: 5,
            sync_degree: 7,
            trajectory_degree: 7,
            quadrature_tolerance: 1e-10,
            eps_mse: 1e-12,
            qp_tolerance: 1e-6,
            dt_offline: 0.010,
            dt_runtime: 65e-6,
            samples_per_segment: 2000,
            optimize_segment_times: true,
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |f: &str, m: &str| Err(Error::Config { field: f.into(), message: m.into() });
        if !(1..=9).contains(&self.position_degree) {
            return field("position_degree", "must be between 1 and 9");
        }
        if !(1..=9).contains(&self.orientation_degree) {
            return field("orientation_degree", "must be between 1 and 9");
        }
        if !(7..=11).contains(&self.sync_degree) {
            return field("sync_degree", "must be between 7 and 11");
        }
        if self.trajectory_degree != 5 && self.trajectory_degree != 7 {
            return field("trajectory_degree", "must be 5 or 7");
        }
        for (name, v) in [
            ("quadrature_tolerance", self.quadrature_tolerance),
            ("eps_mse", self.eps_mse),
            ("qp_tolerance", self.qp_tolerance),
            ("dt_offline", self.dt_offline),
            ("dt_runtime", self.dt_runtime),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return field(name, "must be positive");
            }
        }
        if self.dt_runtime > self.dt_offline {
            return field("dt_runtime", "must not exceed dt_offline");
        }
        if self.samples_per_segment < 2 {
            return field("samples_per_segment", "must be at least 2");
        }
        Ok(())
    }
}

/// Geometric chain from arc length to pose.
#[derive(Debug, Clone)]
pub struct PathChain {
    pub curve: BSplineCurve,
    pub waypoint_params: Vec<f64>,
    pub arc_table: ArcLengthTable,
    pub modifier: ModifierPolySet,
    pub orientation: QuatSpline,
    pub sync: PiecewiseBezier,
    /// Arc length at each waypoint.
    pub waypoint_lengths: Vec<f64>,
}

/// Pose-chain values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState {
    pub s: f64,
    pub u: f64,
    pub w: f64,
    pub pose: Pose,
    /// `P^(1..=3)` in time, `P = [x, y, z, α]`.
    pub derivatives: [Vector4<f64>; 3],
}

impl PathChain {
    pub fn total_length(&self) -> f64 {
        self.arc_table.total_length()
    }

    /// Pose and its time derivatives for an arc-length jet `[s, ṡ, s̈, s⃛]`.
    pub fn eval(&self, s: Jet3) -> ChainState {
        let sc = s.value().clamp(0.0, self.total_length());
        let u = s.compose(self.modifier.eval_stack(sc));
        let uc = u.value().clamp(0.0, 1.0);
        let c = self.curve.eval_all(uc);
        let p: [Jet3; 3] = [0, 1, 2].map(|k| u.compose([c[0][k], c[1][k], c[2][k], c[3][k]]));
        let w = s.compose(self.sync.eval_stack(sc));
        let wc = w.value().clamp(0.0, 1.0);
        let q = self.orientation.eval_jet(wc);
        let qt: [Jet3; 4] = q.map(|qi| w.compose(qi.0));
        let alpha = qt[1].atan2(qt[0]) * 2.0;
        let pose = Pose { p: Vector3::new(p[0].value(), p[1].value(), p[2].value()), alpha: alpha.value() };
        let derivatives = [1, 2, 3].map(|r| Vector4::new(p[0].d(r), p[1].d(r), p[2].d(r), alpha.d(r)));
        ChainState { s: sc, u: uc, w: wc, pose, derivatives }
    }
}

/// One evaluated instant of a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSample {
    pub t: f64,
    pub pose: Pose,
    pub pose_derivatives: [Vector4<f64>; 3],
    pub joints: Vector4<f64>,
    pub joint_derivatives: [Vector4<f64>; 3],
    pub s: f64,
    pub u: f64,
    pub w: f64,
}

/// Largest FK-vs-task mismatch between offline samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub max_position_mm: f64,
    pub max_alpha_rad: f64,
}

/// Complete plan.
#[derive(Debug, Clone)]
pub struct MotionPlan {
    pub chain: PathChain,
    pub geometry: RobotGeometry,
    pub limits: KinematicLimits,
    pub config: PlanConfig,
    /// `s(t)` on the unit-duration allocation before scaling.
    pub normalized: CompositeTrajectory,
    pub scale: ScaleReport,
    /// Time-scaled `s(t)`.
    pub task: CompositeTrajectory,
    /// `d_i(t)`, one axis per joint.
    pub joints: CompositeTrajectory,
    pub lut: JointLut,
    /// Offline samples at the joint-stage vertices.
    pub samples: Vec<MotionSample>,
}

fn stage<T>(r: Result<T>, name: &'static str) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Builds the geometric chain for a waypoint set.
pub fn build_chain(wp: &WaypointSet, config: &PlanConfig) -> Result<PathChain> {
    if wp.len() < 2 {
        return Err(Error::InvalidPath(format!("{} waypoint(s): at least two are needed for motion", wp.len())));
    }
    for (k, o) in wp.orientations_deg.iter().enumerate() {
        if o[1] != 0.0 || o[2] != 0.0 {
            return Err(Error::Unsupported(format!(
                "waypoint {}: only rotation about x is actuated (beta = {}, gamma = {})",
                k + 1,
                o[1],
                o[2]
            )));
        }
    }
    let degree = config.position_degree.min(wp.len() - 1);
    if degree < config.position_degree {
        warn!("{} waypoints: position spline degree lowered to {}", wp.len(), degree);
    }
    let (curve, params) = stage(fit_interpolating_spline(&wp.positions, degree), "position spline")?;
    let settings = ArcLengthSettings { tolerance: config.quadrature_tolerance, ..ArcLengthSettings::default() };
    let arc_table = stage(arc_length_table(&curve, settings), "arc length")?;
    let modifier = stage(fit_modifier_polynomials(&arc_table, &curve, config.eps_mse), "modifier polynomials")?;
    if modifier.any_unreachable() {
        warn!("some modifier segments miss the MSE tolerance {:e}", config.eps_mse);
    }
    let quats: Vec<_> = wp.orientations_deg.iter().map(|o| euler_to_quat(o[0].to_radians(), 0.0, 0.0)).collect();
    let orientation = stage(fit_orientation_spline(&quats, config.orientation_degree), "orientation spline")?;
    let total = arc_table.total_length();
    let mut waypoint_lengths: Vec<f64> = params.iter().map(|&u| arc_table.length_at(&curve, u)).collect();
    waypoint_lengths[0] = 0.0;
    *waypoint_lengths.last_mut().unwrap() = total;
    let sync = if orientation.is_constant() {
        PiecewiseBezier::linear(0.0, total, config.sync_degree)
    } else {
        let settings = SyncSettings { degree: config.sync_degree, ..SyncSettings::default() };
        let fit = stage(fit_w_of_s(&waypoint_lengths, &orientation.waypoint_params(), settings), "synchronization")?;
        if fit.stalled || fit.kkt_residual > config.qp_tolerance {
            warn!("synchronization fit: KKT residual {:e}, stalled {}", fit.kkt_residual, fit.stalled);
        }
        fit.map
    };
    Ok(PathChain { curve, waypoint_params: params, arc_table, modifier, orientation, sync, waypoint_lengths })
}

/// Tangential and joint quantities bounded during time scaling.
fn scale_constraints(limits: &KinematicLimits) -> Vec<ScaleConstraint> {
    let mut c = Vec::with_capacity(15);
    for (o, (name, lim)) in [("v", limits.v_max), ("a", limits.a_max), ("j", limits.j_max)].into_iter().enumerate() {
        c.push(ScaleConstraint { name: format!("task_{name}"), order: o as u32 + 1, limit: lim });
    }
    for (o, (name, lim)) in [("v", limits.vd_max), ("a", limits.ad_max), ("j", limits.jd_max)].into_iter().enumerate() {
        for i in 0..4 {
            c.push(ScaleConstraint { name: format!("joint{}_{name}", i + 1), order: o as u32 + 1, limit: lim });
        }
    }
    c
}

fn s_jet(traj: &CompositeTrajectory, t: f64) -> Jet3 {
    let k = traj.segment_at(t);
    let local = t - traj.starts()[k];
    Jet3::new([0, 1, 2, 3].map(|r| traj.eval_in_segment(0, k, local, r)))
}

/// Values of all scaled quantities, ordered as [`scale_constraints`].
fn constraint_signals(chain: &PathChain, geometry: &RobotGeometry, traj: &CompositeTrajectory, t: f64) -> Vec<f64> {
    let s = s_jet(traj, t);
    let st = chain.eval(s);
    let mut out = vec![s.d(1), s.d(2), s.d(3)];
    match geometry.joint_derivatives(&st.pose, &st.derivatives) {
        Ok((_, dd)) => {
            for d in dd {
                out.extend(d.iter().copied());
            }
        }
        Err(_) => out.extend([f64::INFINITY; 12]),
    }
    out
}

/// Runs the full pipeline.
pub fn plan(wp: &WaypointSet, geometry: &RobotGeometry, limits: &KinematicLimits, config: &PlanConfig) -> Result<MotionPlan> {
    stage(config.validate(), "configuration")?;
    stage(limits.validate(), "configuration")?;
    stage(geometry.validate(), "geometry")?;
    let chain = build_chain(wp, config)?;
    let total = chain.total_length();
    info!("path length {total:.6} mm over {} waypoints", wp.len());

    // every waypoint and a dense set of path points must be reachable
    for k in 0..=400 {
        let s = total * k as f64 / 400.0;
        let st = chain.eval(Jet3::constant(s));
        stage(geometry.inverse_position(&st.pose), "kinematics")?;
    }

    let n = config.trajectory_degree;
    let h = n.div_ceil(2);
    let spec = DerivativeSpec::rest_to_rest(&chain.waypoint_lengths, h);
    let m = chain.waypoint_lengths.len() - 1;
    let tau = if config.optimize_segment_times {
        let alloc = stage(optimize_segment_times(std::slice::from_ref(&spec), 3, n, AllocationSettings::default()), "time allocation")?;
        debug!("allocation cost {:e} vs uniform {:e}", alloc.cost, alloc.uniform_cost);
        alloc.tau
    } else {
        vec![1.0 / m as f64; m]
    };
    let normalized = stage(solve_min_jerk(&spec, &tau, 3, n), "task trajectory")?.trajectory;
    let constraints = scale_constraints(limits);
    let signals = |t: f64| constraint_signals(&chain, geometry, &normalized, t);
    let scale = stage(time_scale_optimize(&normalized, &constraints, &signals, config.samples_per_segment), "time scaling")?;
    let task = scale.scaled.clone();
    info!("time scale k = {:.9}, duration {:.6} s, binding {}", scale.k, task.total_time(), scale.peaks[scale.binding].name);

    // offline sampling on a uniform grid
    let t_total = task.total_time();
    let count = ((t_total / config.dt_offline) - 1e-9).ceil().max(1.0) as usize;
    let dt = t_total / count as f64;
    let mut samples = Vec::with_capacity(count + 1);
    for j in 0..=count {
        let t = if j == count { t_total } else { j as f64 * dt };
        let s = s_jet(&task, t);
        let st = chain.eval(s);
        let (d, dd) = stage(geometry.joint_derivatives(&st.pose, &st.derivatives), "joint sampling")?;
        samples.push(MotionSample {
            t,
            pose: st.pose,
            pose_derivatives: st.derivatives,
            joints: d,
            joint_derivatives: dd,
            s: st.s,
            u: st.u,
            w: st.w,
        });
    }

    // one Hermite segment per offline interval, all derivatives fixed
    let kernel = stage(MinJerkKernel::new(n, 3), "joint trajectory")?;
    let durations: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    let stack = |smp: &MotionSample, i: usize| -> Vec<f64> {
        let mut v = vec![smp.joints[i]];
        v.extend(smp.joint_derivatives.iter().take(h - 1).map(|d| d[i]));
        v
    };
    let mut axes: Vec<Vec<Vec<f64>>> = (0..4).map(|_| Vec::with_capacity(count)).collect();
    for (k, w) in samples.windows(2).enumerate() {
        for (i, axis) in axes.iter_mut().enumerate() {
            let mut ends = stack(&w[0], i);
            ends.extend(stack(&w[1], i));
            axis.push(kernel.control_points(durations[k], &ends));
        }
    }
    let joints = stage(CompositeTrajectory::new(n, durations, axes), "joint trajectory")?;
    let lut = JointLut::from_trajectory(&joints, dt);
    Ok(MotionPlan {
        chain,
        geometry: geometry.clone(),
        limits: *limits,
        config: config.clone(),
        normalized,
        scale,
        task,
        joints,
        lut,
        samples,
    })
}

impl MotionPlan {
    pub fn total_time(&self) -> f64 {
        self.task.total_time()
    }

    /// Task-space reference at time `t`.
    pub fn task_state(&self, t: f64) -> ChainState {
        self.chain.eval(s_jet(&self.task, t.clamp(0.0, self.total_time())))
    }

    /// Evaluates the joint lookup table plus the task-space reference.
    pub fn interpolate_step(&self, t: f64) -> Result<MotionSample> {
        let total = self.total_time();
        if !(0.0..=total).contains(&t) {
            return Err(Error::TimeOutOfRange { t, total });
        }
        let (joints, joint_derivatives) = self.lut.eval(t);
        let st = self.task_state(t);
        Ok(MotionSample { t, pose: st.pose, pose_derivatives: st.derivatives, joints, joint_derivatives, s: st.s, u: st.u, w: st.w })
    }

    /// Forward kinematics of the joint table against the task reference at
    /// `per_interval − 1` interior points of every offline interval.
    pub fn tracking_error(&self, per_interval: usize) -> Result<TrackingReport> {
        let mut rep = TrackingReport { max_position_mm: 0.0, max_alpha_rad: 0.0 };
        for w in self.samples.windows(2) {
            for i in 1..per_interval.max(2) {
                let t = w[0].t + (w[1].t - w[0].t) * i as f64 / per_interval.max(2) as f64;
                let (d, _) = self.lut.eval(t);
                let st = self.task_state(t);
                let fk = self.geometry.forward_position(&d, &st.pose)?;
                rep.max_position_mm = rep.max_position_mm.max((fk.p - st.pose.p).norm());
                rep.max_alpha_rad = rep.max_alpha_rad.max((fk.alpha - st.pose.alpha).abs());
            }
        }
        Ok(rep)
    }

    /// Task and joint streams at `sub` points per offline interval: the
    /// ideal stream from the task chain, the actual one from the joint table
    /// (arc length recovered by projecting the FK position error onto the
    /// path tangent).
    pub fn streams(&self, sub: usize) -> Result<(SampleStream, SampleStream)> {
        let total = self.total_time();
        let count = (self.samples.len() - 1) * sub.max(1);
        let dt = total / count as f64;
        let mut ideal = SampleStream::new(dt, &["task", "joint1", "joint2", "joint3", "joint4"]);
        let mut actual = ideal.clone();
        for j in 0..=count {
            let t = if j == count { total } else { j as f64 * dt };
            let st = self.task_state(t);
            let d_ideal = self.geometry.inverse_position(&st.pose)?;
            let (d, _) = self.lut.eval(t);
            let fk = self.geometry.forward_position(&d, &st.pose)?;
            let tangent = self.chain.curve.eval_unchecked(st.u, 1);
            let shift = if tangent.norm() > 0.0 { (fk.p - st.pose.p).dot(&tangent) / tangent.norm() } else { 0.0 };
            ideal.push(&[st.s, d_ideal[0], d_ideal[1], d_ideal[2], d_ideal[3]]);
            actual.push(&[st.s + shift, d[0], d[1], d[2], d[3]]);
        }
        Ok((ideal, actual))
    }
}

/// Peaks of the planned time law against the uniform-duration trajectory
/// of the same total time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    /// `[peak ṡ, peak s̈, peak s⃛]` of the plan.
    pub optimized: [f64; 3],
    pub baseline: [f64; 3],
    /// `1 − optimized/baseline` per order.
    pub reduction: [f64; 3],
}

/// Compares the plan's time law with a uniform-τ minimum-jerk trajectory
/// through the same waypoint arc lengths and with the same duration.
pub fn fluctuation_comparison(plan: &MotionPlan) -> Result<FluctuationReport> {
    let lengths = &plan.chain.waypoint_lengths;
    let m = lengths.len() - 1;
    let n = plan.config.trajectory_degree;
    let spec = DerivativeSpec::rest_to_rest(lengths, n.div_ceil(2));
    let tau = vec![plan.total_time() / m as f64; m];
    let baseline = solve_min_jerk(&spec, &tau, 3, n)?.trajectory;
    let peaks = |traj: &CompositeTrajectory| {
        let sps = plan.config.samples_per_segment;
        let r = crate::minjerk::timing::find_peaks(traj, 3, &|t| vec![traj.eval(0, t, 1), traj.eval(0, t, 2), traj.eval(0, t, 3)], sps);
        [r[0].0, r[1].0, r[2].0]
    };
    let optimized = peaks(&plan.task);
    let base = peaks(&baseline);
    let reduction = [0, 1, 2].map(|i| 1.0 - optimized[i] / base[i]);
    Ok(FluctuationReport { optimized, baseline: base, reduction })
}
