//! Unit quaternions, rotation conversions, SLERP, and orientation splines
//! fitted in log-quaternion space.

use std::ops::Mul;

use log::warn;
use nalgebra::{Matrix3, Vector3};

use crate::bspline::{fit_through, params_from_increments, BSplineCurve};
use crate::error::{Error, Result};
use crate::jet::Jet3;

/// Quaternion `q0 + q1 i + q2 j + q3 k`, stored as scalar and vector parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub v: Vector3<f64>,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, v: Vector3::new(0.0, 0.0, 0.0) };

    pub fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Quat { w: q0, v: Vector3::new(q1, q2, q3) }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.w, self.v.x, self.v.y, self.v.z]
    }

    pub fn conj(&self) -> Quat {
        Quat { w: self.w, v: -self.v }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.v.norm_squared()).sqrt()
    }

    pub fn normalized(&self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, v: self.v / n }
    }

    pub fn dot(&self, o: &Quat) -> f64 {
        self.w * o.w + self.v.dot(&o.v)
    }

    /// Representative with nonnegative scalar part.
    pub fn canonical(&self) -> Quat {
        if self.w < 0.0 {
            Quat { w: -self.w, v: -self.v }
        } else {
            *self
        }
    }

    /// Hamilton product without renormalization.
    pub fn hamilton(&self, o: &Quat) -> Quat {
        Quat { w: self.w * o.w - self.v.dot(&o.v), v: o.v * self.w + self.v * o.w + self.v.cross(&o.v) }
    }

    /// Rotation `p' = Q p Q*` of a vector.
    pub fn rotate(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.hamilton(&Quat { w: 0.0, v: *p }).hamilton(&self.conj()).v
    }

    /// Rotation about a unit axis by `angle` radians.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Quat {
        let (s, c) = (0.5 * angle).sin_cos();
        Quat { w: c, v: axis.normalize() * s }
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let [w, x, y, z] = self.components();
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Rotation angle in [0, π] between two orientations.
    pub fn geodesic_angle(&self, o: &Quat) -> f64 {
        2.0 * quat_log(&self.conj().hamilton(o).canonical()).norm()
    }
}

/// Hamilton product, renormalized.
impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        quat_mul(&self, &o)
    }
}

/// Hamilton product of two unit quaternions, renormalized.
pub fn quat_mul(a: &Quat, b: &Quat) -> Quat {
    a.normalized().hamilton(&b.normalized()).normalized()
}

/// `exp([0, ψ]) = [cos‖ψ‖, sin‖ψ‖ ψ/‖ψ‖]`.
pub fn quat_exp(psi: &Vector3<f64>) -> Quat {
    let th = psi.norm();
    let sinc = if th < 1e-4 {
        let t2 = th * th;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        th.sin() / th
    };
    Quat { w: th.cos(), v: psi * sinc }
}

/// Inverse of [`quat_exp`] on the hemisphere `q0 ≥ 0`. Returns the zero
/// vector for the identity.
pub fn quat_log(q: &Quat) -> Vector3<f64> {
    let q = q.normalized().canonical();
    let s = q.v.norm();
    if s == 0.0 {
        return Vector3::zeros();
    }
    let th = s.atan2(q.w);
    q.v * (th / s)
}

/// Converts a rotation matrix with Cayley's magnitude formulas; signs are
/// recovered from the off-diagonal sums and differences around the
/// largest-magnitude component.
pub fn rotmat_to_quat(r: &Matrix3<f64>) -> Result<Quat> {
    let orth_err = (r.transpose() * r - Matrix3::identity()).norm();
    let det = r.determinant();
    if orth_err > 1e-8 || (det - 1.0).abs() > 1e-8 {
        return Err(Error::NotARotation { orth_err, det });
    }
    let g = |i: usize, j: usize| r[(i - 1, j - 1)];
    let (r11, r22, r33) = (g(1, 1), g(2, 2), g(3, 3));
    let d32 = g(3, 2) - g(2, 3);
    let d13 = g(1, 3) - g(3, 1);
    let d21 = g(2, 1) - g(1, 2);
    let s12 = g(1, 2) + g(2, 1);
    let s13 = g(1, 3) + g(3, 1);
    let s23 = g(2, 3) + g(3, 2);
    let mag = [
        0.25 * ((1.0 + r11 + r22 + r33).powi(2) + d32 * d32 + d13 * d13 + d21 * d21).sqrt(),
        0.25 * (d32 * d32 + (1.0 + r11 - r22 - r33).powi(2) + s12 * s12 + s13 * s13).sqrt(),
        0.25 * (d13 * d13 + s12 * s12 + (1.0 - r11 + r22 - r33).powi(2) + s23 * s23).sqrt(),
        0.25 * (d21 * d21 + s13 * s13 + s23 * s23 + (1.0 - r11 - r22 + r33).powi(2)).sqrt(),
    ];
    // products 4 q_a q_b for every pair
    let prod = |a: usize, b: usize| -> f64 {
        match (a.min(b), a.max(b)) {
            (0, 1) => d32,
            (0, 2) => d13,
            (0, 3) => d21,
            (1, 2) => s12,
            (1, 3) => s13,
            (2, 3) => s23,
            _ => unreachable!(),
        }
    };
    let pivot = (0..4).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
    let mut q = [0.0; 4];
    for i in 0..4 {
        q[i] = if i == pivot { mag[i] } else { mag[i].copysign(prod(pivot, i)) };
    }
    Ok(Quat::new(q[0], q[1], q[2], q[3]).normalized().canonical())
}

pub fn quat_to_rotmat(q: &Quat) -> Matrix3<f64> {
    q.normalized().to_rotation_matrix()
}

/// Intrinsic X-Y-Z Euler angles (radians): `R = Rx(α) Ry(β) Rz(γ)`.
pub fn euler_to_quat(alpha: f64, beta: f64, gamma: f64) -> Quat {
    let qx = Quat::from_axis_angle(&Vector3::x(), alpha);
    let qy = Quat::from_axis_angle(&Vector3::y(), beta);
    let qz = Quat::from_axis_angle(&Vector3::z(), gamma);
    (qx.hamilton(&qy).hamilton(&qz)).normalized().canonical()
}

/// Euler angles extracted from the rotation matrix, plus a flag raised when
/// `|β|` is within 1e-3 degrees of 90° (gimbal proximity).
pub fn quat_to_euler(q: &Quat) -> ([f64; 3], bool) {
    let r = quat_to_rotmat(q);
    let sb = r[(0, 2)].clamp(-1.0, 1.0);
    let beta = sb.asin();
    let gimbal = (90.0 - beta.abs().to_degrees()) < 1e-3;
    if gimbal {
        warn!("Euler extraction near gimbal lock (beta = {:.6} deg)", beta.to_degrees());
    }
    let alpha = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let gamma = (-r[(0, 1)]).atan2(r[(0, 0)]);
    ([alpha, beta, gamma], gimbal)
}

/// Spherical linear interpolation along the shorter arc.
pub fn slerp(q1: &Quat, q2: &Quat, w: f64) -> Result<Quat> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::ParamOutOfRange { value: w, lo: 0.0, hi: 1.0 });
    }
    let rel = q1.conj().hamilton(q2).normalized();
    if rel.w.abs() <= 1e-9 {
        return Err(Error::AntipodalAmbiguity);
    }
    let psi = quat_log(&rel.canonical());
    Ok(q1.hamilton(&quat_exp(&(psi * w))).normalized())
}

/// `[f, f', f'', f''']` of `sin√x/√x` and `cos√x` at `x ≥ 0`, by their
/// everywhere-convergent power series.
fn exp_series(x: f64) -> ([f64; 4], [f64; 4]) {
    let mut f = [0.0; 4];
    let mut g = [0.0; 4];
    // coefficient of x^k: (−1)^k/(2k+1)! and (−1)^k/(2k)!
    let mut cf = 1.0;
    let mut cg = 1.0;
    for k in 0..30usize {
        for d in 0..4 {
            if k >= d {
                let fall = ((k + 1 - d)..=k).fold(1.0, |a, j| a * j as f64);
                let p = x.powi((k - d) as i32);
                f[d] += cf * fall * p;
                g[d] += cg * fall * p;
            }
        }
        let kk = k as f64;
        cf *= -1.0 / ((2.0 * kk + 2.0) * (2.0 * kk + 3.0));
        cg *= -1.0 / ((2.0 * kk + 1.0) * (2.0 * kk + 2.0));
    }
    (f, g)
}

/// `exp([0, ψ(w)])` as four component jets, given jets of the components
/// of ψ.
pub fn quat_exp_jet(psi: &[Jet3; 3]) -> [Jet3; 4] {
    let x = psi[0] * psi[0] + psi[1] * psi[1] + psi[2] * psi[2];
    let (f, g) = exp_series(x.value());
    let sinc = x.compose(f);
    let cosr = x.compose(g);
    [cosr, psi[0] * sinc, psi[1] * sinc, psi[2] * sinc]
}

/// Hamilton product of a constant quaternion with a quaternion jet.
pub fn hamilton_jet(a: &Quat, b: &[Jet3; 4]) -> [Jet3; 4] {
    let [a0, a1, a2, a3] = a.components();
    [
        b[0] * a0 - b[1] * a1 - b[2] * a2 - b[3] * a3,
        b[1] * a0 + b[0] * a1 + b[3] * a2 - b[2] * a3,
        b[2] * a0 - b[3] * a1 + b[0] * a2 + b[1] * a3,
        b[3] * a0 + b[2] * a1 - b[1] * a2 + b[0] * a3,
    ]
}

/// Angular velocity, acceleration and jerk `ω = 2 Q' Q*`, `ω'`, `ω''` from
/// the derivative stack of a unit-quaternion path.
pub fn angular_derivatives(q: &[Jet3; 4]) -> [Vector3<f64>; 3] {
    let part = |d: usize| Quat::new(q[0].d(d), q[1].d(d), q[2].d(d), q[3].d(d));
    let (q0, q1, q2, q3) = (part(0), part(1), part(2), part(3));
    let (c0, c1, c2) = (q0.conj(), q1.conj(), q2.conj());
    let om = q1.hamilton(&c0);
    let om1 = q2.hamilton(&c0).add(&q1.hamilton(&c1));
    let om2 = q3.hamilton(&c0).add(&q2.hamilton(&c1).scale(2.0)).add(&q1.hamilton(&c2));
    [om.v * 2.0, om1.v * 2.0, om2.v * 2.0]
}

impl Quat {
    fn add(&self, o: &Quat) -> Quat {
        Quat { w: self.w + o.w, v: self.v + o.v }
    }

    fn scale(&self, k: f64) -> Quat {
        Quat { w: self.w * k, v: self.v * k }
    }
}

/// Orientation spline `Q(w) = Q₁ exp([0, ψ(w)])` with ψ a B-spline through
/// the logs of the relative rotations.
#[derive(Debug, Clone)]
pub struct QuatSpline {
    base: Quat,
    psi: Option<BSplineCurve>,
    /// Parameters of the distinct orientations.
    params: Vec<f64>,
    /// For each input orientation, the index of its distinct representative.
    mapping: Vec<usize>,
    /// Canonicalized input orientations.
    inputs: Vec<Quat>,
}

/// Consecutive orientations closer than this (radians) are merged.
pub const DUPLICATE_ANGLE: f64 = 1e-12;

/// Fits the orientation spline of degree `p`.
pub fn fit_orientation_spline(quats: &[Quat], p: usize) -> Result<QuatSpline> {
    if quats.is_empty() {
        return Err(Error::TooFewWaypoints { needed: 1, got: 0 });
    }
    // consecutive dot products made nonnegative
    let mut inputs = Vec::with_capacity(quats.len());
    for q in quats {
        let mut q = q.normalized();
        if let Some(prev) = inputs.last() {
            if q.dot(prev) < 0.0 {
                q = Quat { w: -q.w, v: -q.v };
            }
        }
        inputs.push(q);
    }
    let base = inputs[0];
    let mut unique: Vec<Quat> = vec![base];
    let mut increments = Vec::new();
    let mut mapping = vec![0usize];
    for q in &inputs[1..] {
        let angle = unique.last().unwrap().geodesic_angle(q);
        if angle > DUPLICATE_ANGLE {
            unique.push(*q);
            increments.push(angle.sqrt());
        }
        mapping.push(unique.len() - 1);
    }
    let mut psis = Vec::with_capacity(unique.len());
    for (k, q) in unique.iter().enumerate() {
        let rel = base.conj().hamilton(q).normalized();
        if rel.w <= 0.0 {
            return Err(Error::HemisphereCrossing { index: k });
        }
        psis.push(quat_log(&rel));
    }
    if unique.len() == 1 {
        return Ok(QuatSpline { base, psi: None, params: vec![0.0], mapping, inputs });
    }
    let params = params_from_increments(&increments);
    let degree = p.min(unique.len() - 1);
    if degree < p {
        warn!("only {} distinct orientations: orientation spline degree lowered to {}", unique.len(), degree);
    }
    let psi = fit_through(&psis, &params, degree)?;
    Ok(QuatSpline { base, psi: Some(psi), params, mapping, inputs })
}

impl QuatSpline {
    pub fn base(&self) -> Quat {
        self.base
    }

    pub fn psi_curve(&self) -> Option<&BSplineCurve> {
        self.psi.as_ref()
    }

    /// True when all orientations coincide.
    pub fn is_constant(&self) -> bool {
        self.psi.is_none()
    }

    /// Parameter of every input orientation (duplicates share a value).
    pub fn waypoint_params(&self) -> Vec<f64> {
        if self.is_constant() {
            // a constant spline is parameterized linearly over the inputs
            let n = self.inputs.len();
            return (0..n).map(|k| if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 }).collect();
        }
        self.mapping.iter().map(|&m| self.params[m]).collect()
    }

    pub fn inputs(&self) -> &[Quat] {
        &self.inputs
    }

    /// Jets of `ψ(w)` components.
    fn psi_jets(&self, w: f64) -> [Jet3; 3] {
        match &self.psi {
            None => [Jet3::ZERO; 3],
            Some(c) => {
                let d = c.eval_all(w);
                [0, 1, 2].map(|i| Jet3::new([d[0][i], d[1][i], d[2][i], d[3][i]]))
            }
        }
    }

    /// Quaternion path and its first three derivatives with respect to `w`.
    pub fn eval_jet(&self, w: f64) -> [Jet3; 4] {
        hamilton_jet(&self.base, &quat_exp_jet(&self.psi_jets(w.clamp(0.0, 1.0))))
    }

    pub fn eval(&self, w: f64) -> Result<Quat> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::ParamOutOfRange { value: w, lo: 0.0, hi: 1.0 });
        }
        let psi = match &self.psi {
            None => Vector3::zeros(),
            Some(c) => c.eval_unchecked(w, 0),
        };
        Ok(self.base.hamilton(&quat_exp(&psi)).normalized())
    }

    /// Angular derivative of order `r` (1..=3) with respect to `w`.
    pub fn eval_angular(&self, w: f64, r: usize) -> Result<Vector3<f64>> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::ParamOutOfRange { value: w, lo: 0.0, hi: 1.0 });
        }
        if r == 0 || r > 3 {
            return Err(Error::OrderTooHigh { order: r, max: 3 });
        }
        Ok(angular_derivatives(&self.eval_jet(w))[r - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn close(a: &Quat, b: &Quat, tol: f64) -> bool {
        (a.w - b.w).abs() < tol && (a.v - b.v).norm() < tol
    }

    #[test]
    fn product_examples() {
        let q = Quat::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.7);
        assert!(close(&(q * Quat::IDENTITY), &q, 1e-15));
        assert!(close(&(q * q.conj()), &Quat::IDENTITY, 1e-15));
        let x90 = Quat::from_axis_angle(&Vector3::x(), FRAC_PI_2);
        let r = x90 * x90;
        assert!(close(&r, &Quat::new(0.0, 1.0, 0.0, 0.0), 1e-15));
        // matrix oracle
        let m = x90.to_rotation_matrix() * x90.to_rotation_matrix();
        assert!((m - r.to_rotation_matrix()).norm() < 1e-15);
    }

    #[test]
    fn exp_examples() {
        assert_eq!(quat_exp(&Vector3::zeros()), Quat::IDENTITY);
        let q = quat_exp(&(Vector3::x() * FRAC_PI_4));
        assert!(close(&q, &Quat::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0), 1e-15));
    }

    #[test]
    fn cayley_examples() {
        assert_eq!(rotmat_to_quat(&Matrix3::identity()).unwrap(), Quat::IDENTITY);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        let q = rotmat_to_quat(&rx).unwrap();
        assert!(close(&q, &Quat::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0), 1e-15));
        for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
            assert!((q.rotate(&e) - rx * e).norm() < 1e-15);
        }
        assert!(matches!(rotmat_to_quat(&(rx * 2.0)), Err(Error::NotARotation { .. })));
        // half-turn: q0 = 0, pivot on a vector component
        let q = rotmat_to_quat(&Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0)).unwrap();
        assert!(close(&q, &Quat::new(0.0, 0.0, 1.0, 0.0), 1e-15));
    }

    #[test]
    fn euler_examples() {
        assert_eq!(euler_to_quat(0.0, 0.0, 0.0), Quat::IDENTITY);
        let q = euler_to_quat(FRAC_PI_2, 0.0, 0.0);
        assert!(close(&q, &Quat::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0), 1e-15));
        let (e, g) = quat_to_euler(&euler_to_quat(0.3, PI / 2.0, 0.1));
        assert!(g);
        assert!((e[1] - PI / 2.0).abs() < 1e-6);
    }

    #[test]
    fn slerp_examples() {
        let z90 = Quat::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        let mid = slerp(&Quat::IDENTITY, &z90, 0.5).unwrap();
        assert!(close(&mid, &Quat::from_axis_angle(&Vector3::z(), FRAC_PI_4), 1e-15));
        assert!(close(&slerp(&Quat::IDENTITY, &z90, 0.0).unwrap(), &Quat::IDENTITY, 1e-15));
        assert!(close(&slerp(&Quat::IDENTITY, &z90, 1.0).unwrap(), &z90, 1e-15));
        let z180 = Quat::from_axis_angle(&Vector3::z(), PI);
        assert_eq!(slerp(&Quat::IDENTITY, &z180, 0.5), Err(Error::AntipodalAmbiguity));
    }

    #[test]
    fn exp_series_matches_closed_form() {
        for &x in &[0.0, 1e-8, 0.3, 1.5, 2.4] {
            let (f, g) = exp_series(x);
            let t: f64 = x.sqrt();
            let sinc = if t == 0.0 { 1.0 } else { t.sin() / t };
            assert!((f[0] - sinc).abs() < 1e-15);
            assert!((g[0] - t.cos()).abs() < 1e-15);
            assert!((g[1] + 0.5 * f[0]).abs() < 1e-15, "d cos√x/dx = −sinc/2");
        }
    }

    #[test]
    fn spline_examples() {
        let angles = [0.0f64, 10.0, 25.0, 45.0, 60.0];
        let quats: Vec<Quat> = angles.iter().map(|a| euler_to_quat(a.to_radians(), 0.0, 0.0)).collect();
        let sp = fit_orientation_spline(&quats, 5).unwrap();
        for (w, q) in sp.waypoint_params().iter().zip(&quats) {
            assert!(sp.eval(*w).unwrap().geodesic_angle(q) < 1e-8);
        }
        for k in 0..=100 {
            let q = sp.eval(k as f64 / 100.0).unwrap();
            assert!(q.v.y.abs() <= 1e-10 && q.v.z.abs() <= 1e-10);
        }
        let same = vec![quats[2]; 4];
        let sp = fit_orientation_spline(&same, 5).unwrap();
        assert!(sp.is_constant());
        assert!(close(&sp.eval(0.4).unwrap(), &quats[2], 1e-15));
        assert_eq!(sp.eval_angular(0.4, 1).unwrap(), Vector3::zeros());
        let far = [Quat::IDENTITY, Quat::from_axis_angle(&Vector3::x(), 1.0), Quat::from_axis_angle(&Vector3::x(), 3.3)];
        assert!(matches!(fit_orientation_spline(&far, 5), Err(Error::HemisphereCrossing { index: 2 })));
    }

    #[test]
    fn angular_velocity_matches_finite_differences() {
        let quats: Vec<Quat> =
            (0..7).map(|k| euler_to_quat(0.2 * k as f64, 0.05 * (k as f64).sin(), 0.1 * (k as f64 * 0.7).cos())).collect();
        let sp = fit_orientation_spline(&quats, 5).unwrap();
        let h = 1e-6;
        for &w in &[0.2, 0.45, 0.8] {
            let qa = sp.eval(w - h).unwrap();
            let qb = sp.eval(w + h).unwrap();
            // world-frame rotation vector of qb * qa^-1
            let fd = quat_log(&qb.hamilton(&qa.conj())) * 2.0 / (2.0 * h);
            let om = sp.eval_angular(w, 1).unwrap();
            assert!((fd - om).norm() <= 1e-4 * om.norm().max(1e-3), "w={w}");
            for r in 2..=3 {
                let a = sp.eval_angular(w - 1e-5, r - 1).unwrap();
                let b = sp.eval_angular(w + 1e-5, r - 1).unwrap();
                let fd = (b - a) / 2e-5;
                let an = sp.eval_angular(w, r).unwrap();
                assert!((fd - an).norm() <= 1e-4 * an.norm().max(1.0), "w={w} r={r}");
            }
        }
    }
}
