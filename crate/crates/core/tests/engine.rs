use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pkm_motion::bspline::{arc_length_table, fit_interpolating_spline, ArcLengthSettings};
use pkm_motion::datasets::{spherical_section, straight_line};
use pkm_motion::engine::{compare_interpolators, fluctuation_comparison, plan, FeedSchedule, MotionPlan, PlanConfig};
use pkm_motion::io::ProjectConfig;
use pkm_motion::kinematics::RobotGeometry;
use pkm_motion::waypoints::WaypointSet;
use pkm_motion::Error;

fn plan_default(wp: &WaypointSet) -> pkm_motion::Result<MotionPlan> {
    let cfg = ProjectConfig::default();
    plan(wp, &RobotGeometry::default_machine(), &cfg.limits, &cfg.plan)
}

#[test]
fn straight_x_line_moves_all_rails_together() {
    let p = plan_default(&straight_line(60.0, 5)).unwrap();
    let d0 = p.samples[0].joints;
    let x0 = p.samples[0].pose.p.x;
    for smp in &p.samples {
        let shift = smp.pose.p.x - x0;
        for i in 0..4 {
            assert!((smp.joints[i] - d0[i] - shift).abs() < 1e-9, "t {} joint {}", smp.t, i + 1);
        }
        assert!(smp.pose.p.y.abs() < 1e-9 && smp.pose.p.z.abs() < 1e-9);
    }
    let end = p.samples.last().unwrap();
    assert!((end.pose.p.x - 30.0).abs() < 1e-9);
}

#[test]
fn single_waypoint_is_invalid_path() {
    let wp = WaypointSet::new(vec![Vector3::zeros()], vec![[0.0; 3]]).unwrap();
    let err = plan_default(&wp).unwrap_err();
    assert!(matches!(err.root(), Error::InvalidPath(_)), "{err}");
    assert!(err.is_validation());
}

#[test]
fn unreachable_path_is_reported() {
    let wp = WaypointSet::new(vec![Vector3::zeros(), Vector3::new(0.0, 0.0, 900.0)], vec![[0.0; 3]; 2]).unwrap();
    let err = plan_default(&wp).unwrap_err();
    assert!(matches!(err.root(), Error::Unreachable { .. }), "{err}");
    assert!(err.is_validation());
}

#[test]
fn tilt_about_other_axes_is_unsupported() {
    let wp = WaypointSet::new(vec![Vector3::zeros(), Vector3::new(10.0, 0.0, 0.0)], vec![[0.0; 3], [0.0, 5.0, 0.0]]).unwrap();
    let err = plan_default(&wp).unwrap_err();
    assert!(matches!(err.root(), Error::Unsupported(_)), "{err}");
}

#[test]
fn bad_limits_are_rejected_before_planning() {
    let mut cfg = ProjectConfig::default();
    cfg.limits.jd_max = 0.0;
    let err = plan(&straight_line(20.0, 3), &RobotGeometry::default_machine(), &cfg.limits, &cfg.plan).unwrap_err();
    assert!(matches!(err.root(), Error::InfeasibleLimits { .. }), "{err}");
}

#[test]
fn step_evaluation_bounds_and_lookup_cost() {
    let p = plan_default(&spherical_section()).unwrap();
    let total = p.total_time();
    assert!(p.interpolate_step(0.0).is_ok());
    assert!(p.interpolate_step(total).is_ok());
    for t in [-1e-6, total + 1e-6] {
        let err = p.interpolate_step(t).unwrap_err();
        assert!(matches!(err, Error::TimeOutOfRange { .. }));
    }
    let n = p.lut.degree();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let t = rng.gen_range(0.0..=total);
        let (d, dd, stats) = p.lut.eval_with_stats(t);
        assert_eq!(stats.segments_touched, 1);
        assert_eq!(stats.coefficients_read, 4 * (n + 1));
        let k = p.lut.locate(t);
        assert!(p.lut.starts()[k] <= t + 1e-12 && t <= p.lut.starts()[k] + p.lut.durations()[k] + 1e-12);
        let (d2, dd2) = p.lut.eval(t);
        assert_eq!(d, d2);
        assert_eq!(dd, dd2);
    }
    // the table reproduces the joint trajectory it was built from
    for smp in &p.samples {
        let (d, dd) = p.lut.eval(smp.t);
        assert!((d - smp.joints).amax() < 1e-9);
        assert!((dd[0] - smp.joint_derivatives[0]).amax() < 1e-7);
    }
}

#[test]
fn joint_grid_is_uniform_and_ends_on_total_time() {
    let p = plan_default(&spherical_section()).unwrap();
    let dts = p.lut.durations();
    let dt = p.lut.dt();
    assert!(dt <= p.config.dt_offline + 1e-15);
    assert!(dts.iter().all(|x| (x - dt).abs() < 1e-12));
    assert_eq!(p.samples.last().unwrap().t, p.total_time());
}

#[test]
fn optimized_time_law_lowers_peak_jerk() {
    let p = plan_default(&spherical_section()).unwrap();
    let rep = fluctuation_comparison(&p).unwrap();
    assert!(rep.reduction[2] > 0.0, "{rep:?}");
    assert!(rep.optimized[0] <= p.limits.v_max * (1.0 + 1e-9));
}

#[test]
fn uniform_durations_still_respect_limits() {
    let cfg = ProjectConfig::default();
    let config = PlanConfig { optimize_segment_times: false, ..cfg.plan.clone() };
    let p = plan(&spherical_section(), &RobotGeometry::default_machine(), &cfg.limits, &config).unwrap();
    for pk in &p.scale.peaks {
        assert!(pk.required_scale <= p.scale.k * (1.0 + 1e-12));
    }
    assert!(p.tracking_error(4).unwrap().max_position_mm < 0.01);
}

#[test]
fn interpolators_agree_on_a_uniform_line() {
    let wp = straight_line(100.0, 11);
    let (curve, _) = fit_interpolating_spline(&wp.positions, 5).unwrap();
    let table = arc_length_table(&curve, ArcLengthSettings::default()).unwrap();
    let rows = compare_interpolators(&curve, &table, FeedSchedule { feed: 50.0, period: 0.01 }, &[1e-10]).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r.feed_max < 1e-6, "{} {}", r.method, r.feed_max);
    }
}

#[test]
fn compare_is_deterministic() {
    let wp = pkm_motion::datasets::fan_path();
    let (curve, _) = fit_interpolating_spline(&wp.positions, 5).unwrap();
    let table = arc_length_table(&curve, ArcLengthSettings::default()).unwrap();
    let schedule = FeedSchedule { feed: 220.0, period: 0.01 };
    let a = compare_interpolators(&curve, &table, schedule, &[1e-8, 1e-12]).unwrap();
    let b = compare_interpolators(&curve, &table, schedule, &[1e-8, 1e-12]).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.iter().map(|r| r.method.as_str()).collect::<Vec<_>>(),
        ["natural", "taylor1", "taylor2", "modifier(1e-8)", "modifier(1e-12)"]
    );
}
