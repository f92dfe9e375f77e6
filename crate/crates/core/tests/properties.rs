use nalgebra::Vector3;
use proptest::prelude::*;

use pkm_motion::bspline::{arc_length_table, fit_interpolating_spline, ArcLengthSettings};
use pkm_motion::kinematics::{Pose, RobotGeometry};
use pkm_motion::minjerk::bernstein::{bezier_derivative, elevate};
use pkm_motion::minjerk::{solve_min_jerk, DerivativeSpec};
use pkm_motion::quat::{euler_to_quat, quat_exp, quat_log, quat_to_euler, quat_to_rotmat, rotmat_to_quat, Quat};
use pkm_motion::sync::{fit_w_of_s, SyncSettings};

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn unit_quat() -> impl Strategy<Value = Quat> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("not near zero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 0.01)
        .prop_map(|(a, b, c, d)| Quat::new(a, b, c, d).normalized())
}

fn increasing(len: std::ops::Range<usize>, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len).prop_map(|inc| {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for d in inc {
            acc += d;
            out.push(acc);
        }
        out
    })
}

proptest! {
    #[test]
    fn exp_is_unit_and_log_inverts_it(psi in vec3(0.9)) {
        let q = quat_exp(&psi);
        prop_assert!((q.norm() - 1.0).abs() < 1e-14);
        prop_assert!((quat_log(&q) - psi).amax() < 1e-12);
    }

    #[test]
    fn product_preserves_norm(a in unit_quat(), b in unit_quat()) {
        prop_assert!((a.hamilton(&b).norm() - 1.0).abs() < 1e-14);
        let p = Vector3::new(1.0, -2.0, 0.5);
        let composed = a.hamilton(&b).rotate(&p);
        prop_assert!((composed - a.rotate(&b.rotate(&p))).amax() < 1e-12);
    }

    #[test]
    fn rotation_matrix_round_trip(q in unit_quat()) {
        let back = rotmat_to_quat(&quat_to_rotmat(&q)).unwrap();
        prop_assert!(back.dot(&q).abs() > 1.0 - 1e-12);
    }

    #[test]
    fn euler_round_trip(a in -3.0..3.0f64, b in -1.4..1.4f64, g in -3.0..3.0f64) {
        let ([a2, b2, g2], gimbal) = quat_to_euler(&euler_to_quat(a, b, g));
        prop_assert!(!gimbal);
        prop_assert!((a2 - a).abs() < 1e-9 && (b2 - b).abs() < 1e-9 && (g2 - g).abs() < 1e-9);
    }

    #[test]
    fn elevation_keeps_the_curve(ctrl in prop::collection::vec(-10.0..10.0f64, 2..9), z in 0.0..1.0f64) {
        let up = elevate(&ctrl);
        for r in 0..3 {
            let a = bezier_derivative(&ctrl, z, r);
            let b = bezier_derivative(&up, z, r);
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn uniform_stretch_scales_cost_and_derivatives(
        positions in increasing(1..6, 0.5, 5.0),
        tau in prop::collection::vec(0.2..2.0f64, 6),
        k in 0.3..4.0f64,
    ) {
        let m = positions.len() - 1;
        let tau = &tau[..m];
        let spec = DerivativeSpec::rest_to_rest(&positions, 4);
        let a = solve_min_jerk(&spec, tau, 3, 7).unwrap();
        let stretched: Vec<f64> = tau.iter().map(|t| t * k).collect();
        let b = solve_min_jerk(&spec, &stretched, 3, 7).unwrap();
        prop_assert!((b.cost - a.cost * k.powi(-5)).abs() <= 1e-8 * a.cost * k.powi(-5));
        let scaled = a.trajectory.time_scaled(k);
        let total = scaled.total_time();
        for i in 0..=20 {
            let t = total * i as f64 / 20.0;
            for r in 0..4 {
                let x = scaled.eval(0, t, r);
                let y = b.trajectory.eval(0, t, r);
                prop_assert!((x - y).abs() <= 1e-7 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn rest_to_rest_solution_interpolates_and_rests(positions in increasing(1..7, 0.1, 10.0)) {
        let m = positions.len() - 1;
        let tau = vec![1.0 / m as f64; m];
        let sol = solve_min_jerk(&DerivativeSpec::rest_to_rest(&positions, 4), &tau, 3, 7).unwrap();
        let traj = &sol.trajectory;
        for (j, p) in positions.iter().enumerate() {
            prop_assert!((traj.eval(0, traj.starts()[j], 0) - p).abs() < 1e-9);
        }
        for r in 1..4 {
            prop_assert!(traj.eval(0, 0.0, r).abs() < 1e-9);
            prop_assert!(traj.eval(0, traj.total_time(), r).abs() < 1e-9);
        }
    }

    #[test]
    fn ik_fk_round_trip(x in -100.0..100.0f64, y in -100.0..100.0f64, z in -50.0..50.0f64, alpha in -0.5..0.5f64) {
        let g = RobotGeometry::default_machine();
        let pose = Pose::new(x, y, z, alpha);
        let d = g.inverse_position(&pose).unwrap();
        let fk = g.forward_position(&d, &g.home_pose()).unwrap();
        prop_assert!((fk.p - pose.p).norm() < 1e-9);
        prop_assert!((fk.alpha - alpha).abs() < 1e-11);
    }

    #[test]
    fn straight_segment_length_is_chord(dir in vec3(1.0), len in 1.0..200.0f64) {
        prop_assume!(dir.norm() > 0.1);
        let d = dir.normalize() * len;
        let pts: Vec<Vector3<f64>> = (0..4).map(|i| d * (i as f64 / 3.0)).collect();
        let (curve, _) = fit_interpolating_spline(&pts, 3).unwrap();
        let table = arc_length_table(&curve, ArcLengthSettings::default()).unwrap();
        prop_assert!((table.total_length() - len).abs() < 1e-9 * len);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sync_map_is_monotone_and_interpolates(
        s in increasing(2..8, 1.0, 50.0),
        w_inc in prop::collection::vec(0.0..1.0f64, 8),
    ) {
        let mut w = vec![0.0];
        for d in &w_inc[..s.len() - 1] {
            w.push(w.last().unwrap() + d + 1e-3);
        }
        let total = *w.last().unwrap();
        let w: Vec<f64> = w.iter().map(|x| x / total).collect();
        let fit = fit_w_of_s(&s, &w, SyncSettings::default()).unwrap();
        prop_assert!(fit.map.control_monotone());
        prop_assert!(fit.map.junction_residual() < 1e-8);
        for (sk, wk) in s.iter().zip(&w) {
            prop_assert!((fit.map.eval(*sk, 0).unwrap() - wk).abs() < 1e-9);
        }
        let end = *s.last().unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = fit.map.eval((end * i as f64 / 400.0).min(end), 0).unwrap();
            prop_assert!(v >= prev - 1e-12);
            prev = v;
        }
    }
}
