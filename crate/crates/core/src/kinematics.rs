//! 3T1R parallel mechanism: closed-form inverse kinematics, Jacobians,
//! recursive higher-order kinematics and Newton forward kinematics.

use log::warn;
use nalgebra::{Matrix4, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet3;

/// Sign of the square root taken in the closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    #[default]
    Negative,
    Positive,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Negative => -1.0,
            Branch::Positive => 1.0,
        }
    }
}

/// One prismatic limb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limb {
    /// Base offset (mm).
    pub a: [f64; 3],
    /// Unit rail direction.
    pub d_hat: [f64; 3],
    /// Limb length (mm).
    pub l: f64,
    /// Connector offset along the rail (mm).
    pub c: f64,
    /// Platform joint in the platform frame (mm).
    pub pb: [f64; 3],
    #[serde(default)]
    pub branch: Branch,
}

/// Reference configuration stored with the geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeConfig {
    /// `[x, y, z]` in mm and α in degrees.
    pub pose: [f64; 4],
    /// Joint displacements at the home pose (mm).
    pub d: [f64; 4],
}

/// Geometry of the four limbs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotGeometry {
    pub limb: Vec<Limb>,
    pub home: Option<HomeConfig>,
}

/// End-effector position (mm) and rotation about x (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub p: Vector3<f64>,
    pub alpha: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, alpha: f64) -> Self {
        Pose { p: Vector3::new(x, y, z), alpha }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.p.x, self.p.y, self.p.z, self.alpha)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Pose { p: Vector3::new(v[0], v[1], v[2]), alpha: v[3] }
    }
}

/// Jacobians at one pose with their determinants.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobians {
    pub jp: Matrix4<f64>,
    pub jd: Vector4<f64>,
    pub det_jp: f64,
    pub det_jd: f64,
}

fn v3(a: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl RobotGeometry {
    /// Default machine: four rails along x, symmetric base rectangle.
    pub fn default_machine() -> RobotGeometry {
        let mut limb = Vec::new();
        for (sy, sz) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            limb.push(Limb {
                a: [-750.0, 300.0 * sy, 150.0 * sz],
                d_hat: [1.0, 0.0, 0.0],
                l: 700.0,
                c: 20.0,
                pb: [0.0, 60.0 * sy, 40.0 * sz],
                branch: Branch::Negative,
            });
        }
        let mut g = RobotGeometry { limb, home: None };
        let home = Pose::new(0.0, 0.0, 0.0, 0.0);
        let d = g.inverse_position(&home).expect("home pose is reachable");
        g.home = Some(HomeConfig { pose: [0.0; 4], d: [d[0], d[1], d[2], d[3]] });
        g
    }

    pub fn validate(&self) -> Result<()> {
        if self.limb.len() != 4 {
            return Err(Error::Config { field: "limb".into(), message: format!("expected 4 limbs, found {}", self.limb.len()) });
        }
        for (i, l) in self.limb.iter().enumerate() {
            let n = v3(&l.d_hat).norm();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::Config { field: format!("limb[{i}].d_hat"), message: format!("must be a unit vector (norm {n})") });
            }
            if !(l.l > 0.0) {
                return Err(Error::Config { field: format!("limb[{i}].l"), message: "must be positive".into() });
            }
        }
        Ok(())
    }

    pub fn home_pose(&self) -> Pose {
        match &self.home {
            Some(h) => Pose::new(h.pose[0], h.pose[1], h.pose[2], h.pose[3].to_radians()),
            None => Pose::new(0.0, 0.0, 0.0, 0.0),
        }
    }

    /// Platform joint `b_i = R_x(α) ᴾb_i`.
    fn b(&self, i: usize, alpha: f64) -> Vector3<f64> {
        let pb = v3(&self.limb[i].pb);
        let (s, c) = alpha.sin_cos();
        Vector3::new(pb.x, c * pb.y - s * pb.z, s * pb.y + c * pb.z)
    }

    /// Radicand of the closed form for each limb.
    pub fn radicands(&self, pose: &Pose) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, l) in self.limb.iter().enumerate() {
            let v = pose.p + self.b(i, pose.alpha) - v3(&l.a);
            let proj = v3(&l.d_hat).dot(&v);
            out[i] = l.l * l.l - (v.norm_squared() - proj * proj);
        }
        out
    }

    /// Closed-form joint displacements.
    pub fn inverse_position(&self, pose: &Pose) -> Result<Vector4<f64>> {
        let mut d = Vector4::zeros();
        for (i, l) in self.limb.iter().enumerate() {
            let v = pose.p + self.b(i, pose.alpha) - v3(&l.a);
            let dh = v3(&l.d_hat);
            let proj = dh.dot(&v);
            let rad = l.l * l.l - (v.norm_squared() - proj * proj);
            if rad < 0.0 {
                return Err(Error::Unreachable { limb: i, radicand: rad });
            }
            if rad < 1e-9 {
                return Err(Error::BranchSingularity { limb: i, radicand: rad });
            }
            d[i] = -l.c + proj + l.branch.sign() * rad.sqrt();
        }
        Ok(d)
    }

    /// Limb vectors `L_i = p + b_i − a_i − (d_i + c_i) d̂_i`.
    pub fn limb_vectors(&self, pose: &Pose, d: &Vector4<f64>) -> [Vector3<f64>; 4] {
        [0, 1, 2, 3].map(|i| {
            let l = &self.limb[i];
            pose.p + self.b(i, pose.alpha) - v3(&l.a) - v3(&l.d_hat) * (d[i] + l.c)
        })
    }

    /// `J_p` rows `[L_iᵀ, (b_i × L_i)·x̂]` and `J_d = diag(d̂_i·L_i)`.
    pub fn jacobians(&self, pose: &Pose, d: &Vector4<f64>) -> Jacobians {
        let ls = self.limb_vectors(pose, d);
        let mut jp = Matrix4::zeros();
        let mut jd = Vector4::zeros();
        for i in 0..4 {
            let b = self.b(i, pose.alpha);
            let li = ls[i];
            jp[(i, 0)] = li.x;
            jp[(i, 1)] = li.y;
            jp[(i, 2)] = li.z;
            jp[(i, 3)] = b.cross(&li).x;
            jd[i] = v3(&self.limb[i].d_hat).dot(&li);
        }
        let det_jp = jp.determinant();
        let det_jd: f64 = jd.iter().product();
        if det_jp.abs() < 1e-9 || det_jd.abs() < 1e-9 {
            warn!("near-singular Jacobian (det Jp {det_jp:e}, det Jd {det_jd:e})");
        }
        Jacobians { jp, jd, det_jp, det_jd }
    }

    /// Jets of `J_p` (row-major) and the diagonal of `J_d` along a motion
    /// whose pose and joint jets are given.
    fn jacobian_jets(&self, pose: &[Jet3; 4], d: &[Jet3; 4]) -> ([[Jet3; 4]; 4], [Jet3; 4]) {
        let (sa, ca) = (pose[3].sin(), pose[3].cos());
        let mut jp = [[Jet3::ZERO; 4]; 4];
        let mut jd = [Jet3::ZERO; 4];
        for i in 0..4 {
            let l = &self.limb[i];
            let b = [Jet3::constant(l.pb[0]), ca * l.pb[1] + sa * (-l.pb[2]), sa * l.pb[1] + ca * l.pb[2]];
            let dc = d[i] + l.c;
            let li: [Jet3; 3] = [0, 1, 2].map(|k| pose[k] + b[k] + (-l.a[k]) - dc * l.d_hat[k]);
            jp[i] = [li[0], li[1], li[2], b[1] * li[2] - b[2] * li[1]];
            jd[i] = li[0] * l.d_hat[0] + li[1] * l.d_hat[1] + li[2] * l.d_hat[2];
        }
        (jp, jd)
    }

    /// Joint displacements and their first three time derivatives from the
    /// pose and its derivatives `P^(1..=3)`, by the recursive Leibniz form
    /// `d^(n+1) = J_d⁻¹ (Σ_k C(n,k) J_p^(n−k) P^(k+1) − Σ_{k<n} C(n,k) J_d^(n−k) d^(k+1))`.
    pub fn joint_derivatives(&self, pose: &Pose, pd: &[Vector4<f64>; 3]) -> Result<(Vector4<f64>, [Vector4<f64>; 3])> {
        let d0 = self.inverse_position(pose)?;
        let pv = pose.as_vector();
        let pj: [Jet3; 4] = [0, 1, 2, 3].map(|k| Jet3::new([pv[k], pd[0][k], pd[1][k], pd[2][k]]));
        let mut dd = [Vector4::zeros(); 3];
        for n in 0..3 {
            let dj: [Jet3; 4] = [0, 1, 2, 3].map(|k| Jet3::new([d0[k], dd[0][k], dd[1][k], dd[2][k]]));
            let (jp, jd) = self.jacobian_jets(&pj, &dj);
            let mut out = Vector4::zeros();
            for i in 0..4 {
                let mut acc = 0.0;
                for k in 0..=n {
                    let c = binom(n, k);
                    for col in 0..4 {
                        acc += c * jp[i][col].d(n - k) * pd[k][col];
                    }
                }
                for k in 0..n {
                    acc -= binom(n, k) * jd[i].d(n - k) * dd[k][i];
                }
                let diag = jd[i].value();
                if diag.abs() < 1e-12 {
                    return Err(Error::SingularJacobian { det: diag });
                }
                out[i] = acc / diag;
            }
            dd[n] = out;
        }
        Ok((d0, dd))
    }

    /// Inverse of [`joint_derivatives`]: pose derivatives from joint
    /// derivatives at a known pose,
    /// `P^(n+1) = J_p⁻¹ (Σ_k C(n,k) J_d^(n−k) d^(k+1) − Σ_{k<n} C(n,k) J_p^(n−k) P^(k+1))`.
    pub fn pose_derivatives(&self, pose: &Pose, dd: &[Vector4<f64>; 3]) -> Result<[Vector4<f64>; 3]> {
        let d0 = self.inverse_position(pose)?;
        let pv = pose.as_vector();
        let dj: [Jet3; 4] = [0, 1, 2, 3].map(|k| Jet3::new([d0[k], dd[0][k], dd[1][k], dd[2][k]]));
        let mut pd = [Vector4::zeros(); 3];
        for n in 0..3 {
            let pj: [Jet3; 4] = [0, 1, 2, 3].map(|k| Jet3::new([pv[k], pd[0][k], pd[1][k], pd[2][k]]));
            let (jp, jd) = self.jacobian_jets(&pj, &dj);
            let mut rhs = Vector4::zeros();
            for i in 0..4 {
                let mut acc = 0.0;
                for k in 0..=n {
                    acc += binom(n, k) * jd[i].d(n - k) * dd[k][i];
                }
                for k in 0..n {
                    let c = binom(n, k);
                    for col in 0..4 {
                        acc -= c * jp[i][col].d(n - k) * pd[k][col];
                    }
                }
                rhs[i] = acc;
            }
            let jp0 = Matrix4::from_fn(|i, j| jp[i][j].value());
            let lu = jp0.lu();
            pd[n] = lu.solve(&rhs).ok_or(Error::SingularJacobian { det: jp0.determinant() })?;
        }
        Ok(pd)
    }

    /// Newton iteration on `‖L_i‖² − l_i² = 0` starting from `guess`. Stops
    /// when the residual is below 1e-10 mm² or after two polishing steps
    /// below 1e-8 mm².
    pub fn forward_position(&self, d: &Vector4<f64>, guess: &Pose) -> Result<Pose> {
        let mut x = guess.as_vector();
        let mut residual = f64::INFINITY;
        let mut polish = 0;
        for _ in 0..50 {
            let pose = Pose::from_vector(&x);
            let ls = self.limb_vectors(&pose, d);
            let f = Vector4::from_fn(|i, _| ls[i].norm_squared() - self.limb[i].l * self.limb[i].l);
            residual = f.amax();
            if residual < 1e-10 {
                return Ok(pose);
            }
            let j = self.jacobians(&pose, d).jp * 2.0;
            let step = j.lu().solve(&f).ok_or(Error::NoConvergence { residual })?;
            x -= step;
            // ‖L‖² carries roundoff near 1e-10 mm² for limbs of several
            // hundred mm: two more steps past 1e-8 reach that floor
            if residual < 1e-8 {
                polish += 1;
                if polish > 2 {
                    return Ok(Pose::from_vector(&x));
                }
            }
        }
        Err(Error::NoConvergence { residual })
    }
}

/// Uniform pose in the 200×200×100 mm box with |α| ≤ 30°, redrawn until
/// the inverse kinematics succeeds.
pub fn random_reachable_pose<R: Rng>(geometry: &RobotGeometry, rng: &mut R) -> Pose {
    loop {
        let pose = Pose::new(
            rng.gen_range(-100.0..=100.0),
            rng.gen_range(-100.0..=100.0),
            rng.gen_range(-50.0..=50.0),
            rng.gen_range(-30.0f64..=30.0).to_radians(),
        );
        if geometry.inverse_position(&pose).is_ok() {
            return pose;
        }
    }
}

/// Analytic test motion: pose and derivatives 1..=3 at `t`.
pub fn test_motion(t: f64) -> (Pose, [Vector4<f64>; 3]) {
    let w = std::f64::consts::TAU;
    let amp = Vector4::new(40.0, 30.0, 20.0, 0.3);
    let freq = Vector4::new(1.0, 1.3, 0.7, 0.9);
    let phase = Vector4::new(0.2, 1.1, -0.4, 0.5);
    let mut p = Vector4::zeros();
    let mut d = [Vector4::zeros(); 3];
    for i in 0..4 {
        let k = w * freq[i];
        let a = k * t + phase[i];
        p[i] = amp[i] * a.sin();
        d[0][i] = amp[i] * k * a.cos();
        d[1][i] = -amp[i] * k * k * a.sin();
        d[2][i] = -amp[i] * k * k * k * a.cos();
    }
    (Pose::from_vector(&p), d)
}

/// Results of [`kinematics_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinCheckReport {
    pub poses: usize,
    /// max |FK(IK(P)) − P| over position (mm).
    pub fk_ik_mm: f64,
    /// max |IK(FK(d)) − d| (mm).
    pub ik_fk_mm: f64,
    /// Largest relative error of `J_d⁻¹J_p Δ` against central differences.
    pub velocity_fd_rel: f64,
    /// Largest relative residual of pose → joint → pose derivative maps.
    pub recursion_inverse_rel: f64,
    /// Relative error of d'' and d''' against finite differences along
    /// the test motion.
    pub d2_fd_rel: f64,
    pub d3_fd_rel: f64,
}

impl KinCheckReport {
    pub fn passed(&self) -> bool {
        self.fk_ik_mm <= 1e-9
            && self.ik_fk_mm <= 1e-9
            && self.velocity_fd_rel <= 1e-5
            && self.recursion_inverse_rel <= 1e-8
            && self.d2_fd_rel <= 1e-3
            && self.d3_fd_rel <= 1e-3
    }
}

fn rel(a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-12)
}

/// Round trips, finite-difference and recursion consistency checks on
/// `poses` random reachable poses drawn from `seed`.
pub fn kinematics_check(geometry: &RobotGeometry, seed: u64, poses: usize) -> Result<KinCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = KinCheckReport {
        poses,
        fk_ik_mm: 0.0,
        ik_fk_mm: 0.0,
        velocity_fd_rel: 0.0,
        recursion_inverse_rel: 0.0,
        d2_fd_rel: 0.0,
        d3_fd_rel: 0.0,
    };
    for _ in 0..poses {
        let pose = random_reachable_pose(geometry, &mut rng);
        let d = geometry.inverse_position(&pose)?;
        let jitter = Vector4::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.01..0.01));
        let back = geometry.forward_position(&d, &Pose::from_vector(&(pose.as_vector() + jitter)))?;
        rep.fk_ik_mm = rep.fk_ik_mm.max((back.p - pose.p).norm());
        let d2 = geometry.inverse_position(&back)?;
        rep.ik_fk_mm = rep.ik_fk_mm.max((d2 - d).amax());

        let dir = Vector4::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.01..0.01));
        let h = 1e-6;
        let plus = geometry.inverse_position(&Pose::from_vector(&(pose.as_vector() + dir * h)))?;
        let minus = geometry.inverse_position(&Pose::from_vector(&(pose.as_vector() - dir * h)))?;
        let fd = (plus - minus) / (2.0 * h);
        let (_, dd) = geometry.joint_derivatives(&pose, &[dir, Vector4::zeros(), Vector4::zeros()])?;
        rep.velocity_fd_rel = rep.velocity_fd_rel.max(rel(&dd[0], &fd));

        let pd = [0, 1, 2].map(|_| {
            Vector4::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-1.0..1.0))
        });
        let (_, jd) = geometry.joint_derivatives(&pose, &pd)?;
        let back = geometry.pose_derivatives(&pose, &jd)?;
        for k in 0..3 {
            rep.recursion_inverse_rel = rep.recursion_inverse_rel.max(rel(&back[k], &pd[k]));
        }
    }
    let h = 1e-4;
    for i in 0..50 {
        let t = i as f64 * 0.02;
        let (pose, pd) = test_motion(t);
        let (_, dd) = geometry.joint_derivatives(&pose, &pd)?;
        let d = |dt: f64| geometry.inverse_position(&test_motion(t + dt).0);
        let (m2, m1, c, p1, p2) = (d(-2.0 * h)?, d(-h)?, d(0.0)?, d(h)?, d(2.0 * h)?);
        let fd2 = (p1 - c * 2.0 + m1) / (h * h);
        let fd3 = (p2 - p1 * 2.0 + m1 * 2.0 - m2) / (2.0 * h * h * h);
        rep.d2_fd_rel = rep.d2_fd_rel.max(rel(&dd[1], &fd2));
        rep.d3_fd_rel = rep.d3_fd_rel.max(rel(&dd[2], &fd3));
    }
    Ok(rep)
}

fn binom(n: usize, k: usize) -> f64 {
    crate::minjerk::bernstein::binom(n, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn home_round_trip() {
        let g = RobotGeometry::default_machine();
        let home = g.home_pose();
        let d = g.inverse_position(&home).unwrap();
        let back = g.forward_position(&d, &Pose::new(1.0, -0.5, 0.3, 0.01)).unwrap();
        assert!((back.as_vector() - home.as_vector()).norm() < 1e-9);
        for (i, l) in g.limb_vectors(&home, &d).iter().enumerate() {
            assert!((l.norm() - g.limb[i].l).abs() < 1e-9);
        }
    }

    #[test]
    fn rail_translation_shifts_all_joints() {
        let g = RobotGeometry::default_machine();
        let p = Pose::new(10.0, 20.0, -5.0, 0.2);
        let q = Pose::new(17.5, 20.0, -5.0, 0.2);
        let d = g.inverse_position(&p).unwrap();
        let e = g.inverse_position(&q).unwrap();
        for i in 0..4 {
            assert!((e[i] - d[i] - 7.5).abs() < 1e-12);
        }
    }

    #[test]
    fn jd_is_diagonal_and_velocity_relation_holds() {
        let g = RobotGeometry::default_machine();
        let pose = Pose::new(30.0, -40.0, 20.0, 0.3);
        let pd1 = Vector4::new(1.0, -2.0, 0.5, 0.1);
        let (d, dd) = g.joint_derivatives(&pose, &[pd1, Vector4::zeros(), Vector4::zeros()]).unwrap();
        let j = g.jacobians(&pose, &d);
        let lhs = j.jp * pd1;
        let rhs = j.jd.component_mul(&dd[0]);
        assert!((lhs - rhs).norm() < 1e-9);
        // x-translation on x rails: joint rates equal the task rate
        let (_, dx) = g.joint_derivatives(&pose, &[Vector4::new(3.0, 0.0, 0.0, 0.0), Vector4::zeros(), Vector4::zeros()]).unwrap();
        for i in 0..4 {
            assert!((dx[0][i] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn self_check_passes_on_default_machine() {
        let rep = kinematics_check(&RobotGeometry::default_machine(), 7, 30).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn unreachable_pose_reports_limb() {
        let g = RobotGeometry::default_machine();
        assert!(matches!(g.inverse_position(&Pose::new(0.0, 900.0, 0.0, 0.0)), Err(Error::Unreachable { .. })));
    }
}
