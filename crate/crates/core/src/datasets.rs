//! Synthetic reference paths shipped with the repository.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::waypoints::WaypointSet;

/// Points on the four-lobe fan curve `r(θ) = 40 + 22 cos 4θ` (mm) in the
/// plane z = 0, θ_k = 2πk/89 for k = 0..=88, constant orientation.
pub fn fan_path() -> WaypointSet {
    let n = 89;
    let mut positions = Vec::with_capacity(n);
    for k in 0..n {
        let th = 2.0 * PI * k as f64 / n as f64;
        let r = 40.0 + 22.0 * (4.0 * th).cos();
        positions.push(Vector3::new(r * th.cos(), r * th.sin(), 0.0));
    }
    WaypointSet { orientations_deg: vec![[0.0; 3]; n], positions }
}

/// Eighteen points on a 60 mm arc in the y–z plane spanning φ ∈ [−30°, 30°],
/// with the tool tilted about x by φ.
pub fn spherical_section() -> WaypointSet {
    let n = 18;
    let radius = 60.0;
    let mut positions = Vec::with_capacity(n);
    let mut orientations = Vec::with_capacity(n);
    for k in 0..n {
        let phi_deg = -30.0 + 60.0 * k as f64 / (n - 1) as f64;
        let phi = phi_deg.to_radians();
        positions.push(Vector3::new(0.0, radius * phi.sin(), radius * (phi.cos() - 1.0)));
        orientations.push([phi_deg, 0.0, 0.0]);
    }
    WaypointSet { positions, orientations_deg: orientations }
}

/// Straight x translation with constant orientation.
pub fn straight_line(length: f64, points: usize) -> WaypointSet {
    let positions = (0..points).map(|k| Vector3::new(length * k as f64 / (points - 1) as f64 - length / 2.0, 0.0, 0.0)).collect();
    WaypointSet { positions, orientations_deg: vec![[0.0; 3]; points] }
}
