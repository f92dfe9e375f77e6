use std::path::PathBuf;

use pkm_motion::datasets::{fan_path, spherical_section, straight_line};
use pkm_motion::engine::{plan, PlanConfig};
use pkm_motion::io::{
    export_plan, geometry_to_toml, import_joint_lut, load_config, load_geometry, load_waypoints, parse_geometry, parse_waypoints,
    read_joint_lut, validate_metrics_json, ProjectConfig,
};
use pkm_motion::kinematics::RobotGeometry;
use pkm_motion::waypoints::WaypointSet;
use pkm_motion::Error;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn same_waypoints(a: &WaypointSet, b: &WaypointSet) {
    assert_eq!(a.len(), b.len());
    for (p, q) in a.positions.iter().zip(&b.positions) {
        assert!((p - q).amax() < 1e-12);
    }
    for (p, q) in a.orientations_deg.iter().zip(&b.orientations_deg) {
        for k in 0..3 {
            assert!((p[k] - q[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn bundled_paths_match_generators() {
    same_waypoints(&load_waypoints(&data("fan_path.csv")).unwrap(), &fan_path());
    same_waypoints(&load_waypoints(&data("spherical_section.csv")).unwrap(), &spherical_section());
}

#[test]
fn bundled_geometry_matches_default_machine() {
    let g = load_geometry(&data("default_geometry.toml")).unwrap();
    let d = RobotGeometry::default_machine();
    assert_eq!(g.limb.len(), 4);
    for (a, b) in g.limb.iter().zip(&d.limb) {
        assert_eq!(a.branch, b.branch);
        assert!(a.a.iter().zip(&b.a).all(|(x, y)| (x - y).abs() < 1e-12) && (a.l - b.l).abs() < 1e-12 && (a.c - b.c).abs() < 1e-12);
    }
    let home = g.home.clone().unwrap();
    let ik = g.inverse_position(&g.home_pose()).unwrap();
    for i in 0..4 {
        assert!((ik[i] - home.d[i]).abs() < 1e-9);
        assert!((home.d[i] - (730.0 - 420300f64.sqrt())).abs() < 1e-9);
    }
    let fk = g.forward_position(&ik, &pkm_motion::kinematics::Pose::new(1.0, -1.0, 1.0, 0.01)).unwrap();
    assert!((fk.p - g.home_pose().p).norm() < 1e-9);
    // written geometry parses back to the same value
    assert_eq!(parse_geometry(&geometry_to_toml(&g), "roundtrip").unwrap(), g);
}

#[test]
fn bundled_config_equals_defaults() {
    let cfg = load_config(&data("default_config.toml")).unwrap();
    let def = ProjectConfig::default();
    assert_eq!(cfg.plan, PlanConfig::default());
    assert_eq!(cfg.limits, def.limits);
    assert_eq!(cfg.compare, def.compare);
    let geo = cfg.geometry.unwrap();
    assert!(geo.ends_with("default_geometry.toml") && geo.exists(), "{}", geo.display());
}

#[test]
fn waypoint_errors_carry_line_and_column() {
    let text = "x_mm,y_mm,z_mm,alpha_deg,beta_deg,gamma_deg\n0,0,0,0,0,0\n1,abc,0,0,0,0\n";
    match parse_waypoints(text, "w.csv").unwrap_err() {
        Error::Parse { line, message, .. } => {
            assert_eq!(line, 3);
            assert!(message.contains("y_mm"), "{message}");
        }
        e => panic!("{e}"),
    }
    let dup = "x_mm,y_mm,z_mm,alpha_deg,beta_deg,gamma_deg\n0,0,0,0,0,0\n0,0,0,0,0,0\n";
    assert!(matches!(parse_waypoints(dup, "d.csv").unwrap_err(), Error::DuplicateConsecutiveWaypoint { index: 1 }));
}

#[test]
fn missing_file_is_io_error() {
    let err = load_waypoints(&data("no_such_file.csv")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.is_validation());
}

#[test]
fn export_writes_artifacts_and_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested").join("run");
    let cfg = ProjectConfig::default();
    let p = plan(&straight_line(40.0, 4), &RobotGeometry::default_machine(), &cfg.limits, &cfg.plan).unwrap();
    let metrics = export_plan(&p, &out).unwrap();
    for f in ["samples.csv", "joint_lut.csv", "metrics.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for f in ["feed.csv", "quaternion.csv", "u_of_s.csv", "w_of_s.csv", "joints.csv"] {
        assert!(out.join("plotdata").join(f).is_file(), "{f}");
    }
    let text = std::fs::read_to_string(out.join("metrics.json")).unwrap();
    assert_eq!(validate_metrics_json(&text).unwrap(), metrics);
    assert!((metrics.path_length_mm - 40.0).abs() < 1e-9);

    let lut = import_joint_lut(&out.join("joint_lut.csv")).unwrap();
    assert_eq!(lut.segment_count(), p.lut.segment_count());
    for k in 0..lut.segment_count() {
        assert_eq!(lut.starts()[k].to_bits(), p.lut.starts()[k].to_bits());
        assert_eq!(lut.durations()[k].to_bits(), p.lut.durations()[k].to_bits());
        for j in 0..4 {
            let a: Vec<u64> = lut.control(k, j).iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = p.lut.control(k, j).iter().map(|x| x.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    let samples = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    let rows = samples.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, p.samples.len() + 1);
}

#[test]
fn corrupted_metrics_and_table_are_rejected() {
    assert!(validate_metrics_json("{\"path_length_mm\": 1.0}").is_err());
    let bad = "joint,segment,t_start_s,tau_s,c0_mm,c1_mm\n2,0,0,0.1,1,2\n";
    assert!(matches!(read_joint_lut(bad, "lut").unwrap_err(), Error::Parse { line: 2, .. }));
}
