//! Literal block assembly of the junction constraints and the dense
//! permutation-based solve. This route forms the full square system and
//! serves as a cross-check of the reduced block-tridiagonal solve.

use nalgebra::{DMatrix, DVector};

use super::bernstein::cost_matrix;
use super::{endpoint_matrix, CompositeTrajectory, DerivativeSpec};
use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;

/// The stacked constraint system `A P̄ = b` with the partition of `b` into
/// fixed and free entries.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    /// Square `m(N+1)` block matrix.
    pub a: DMatrix<f64>,
    /// Right-hand side entries; free entries hold NaN.
    pub b: Vec<f64>,
    pub fixed: Vec<bool>,
    /// Permutation matrix ordering `b` as `[fixed; free]`.
    pub m: DMatrix<f64>,
    /// For each free entry, the waypoint whose derivative it is.
    pub free_waypoint: Vec<usize>,
}

/// Assembles rows in the order: start derivatives of segment 0; then for
/// each interior waypoint the end derivatives of the segment before it and
/// the matching rows `[A₁ −A₀]` with zero right-hand side; finally the end
/// derivatives of the last segment.
pub fn assemble_constraints(spec: &DerivativeSpec, tau: &[f64], n: usize) -> Result<ConstraintSystem> {
    let h = spec.validate(n)?;
    let segs = spec.waypoint_count() - 1;
    if tau.len() != segs {
        return Err(Error::InconsistentSpec(format!("{} durations for {} segments", tau.len(), segs)));
    }
    let w = n + 1;
    let size = segs * w;
    let mut a = DMatrix::zeros(size, size);
    let mut b = Vec::with_capacity(size);
    let mut fixed = Vec::with_capacity(size);
    let mut free_waypoint = Vec::new();
    let mut row = 0;
    let mut push = |b: &mut Vec<f64>, fixed: &mut Vec<bool>, v: Option<f64>, wp: usize| match v {
        Some(x) => {
            b.push(x);
            fixed.push(true);
        }
        None => {
            b.push(f64::NAN);
            fixed.push(false);
            free_waypoint.push(wp);
        }
    };
    for k in 0..segs {
        let ak = endpoint_matrix(n, tau[k]);
        if k == 0 {
            for j in 0..h {
                for c in 0..w {
                    a[(row, c)] = ak[(j, c)];
                }
                push(&mut b, &mut fixed, spec.values[0][j], 0);
                row += 1;
            }
        }
        // end derivatives of segment k at waypoint k+1
        for j in 0..h {
            for c in 0..w {
                a[(row, k * w + c)] = ak[(h + j, c)];
            }
            push(&mut b, &mut fixed, spec.values[k + 1][j], k + 1);
            row += 1;
        }
        if k + 1 < segs {
            let next = endpoint_matrix(n, tau[k + 1]);
            for j in 0..h {
                for c in 0..w {
                    a[(row, k * w + c)] = ak[(h + j, c)];
                    a[(row, (k + 1) * w + c)] = -next[(j, c)];
                }
                push(&mut b, &mut fixed, Some(0.0), k + 1);
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, size);
    let order: Vec<usize> = (0..size).filter(|&i| fixed[i]).chain((0..size).filter(|&i| !fixed[i])).collect();
    let mut mm = DMatrix::zeros(size, size);
    for (r, &c) in order.iter().enumerate() {
        mm[(r, c)] = 1.0;
    }
    Ok(ConstraintSystem { a, b, fixed, m: mm, free_waypoint })
}

/// Dense solve through `R = M A⁻ᵀ Q A⁻¹ Mᵀ`. Returns the trajectory and the
/// optimal cost.
pub fn solve_min_jerk_dense(spec: &DerivativeSpec, tau: &[f64], r: usize, n: usize) -> Result<(CompositeTrajectory, f64)> {
    let sys = assemble_constraints(spec, tau, n)?;
    let size = sys.b.len();
    let w = n + 1;
    let segs = tau.len();
    let qu = cost_matrix(n, r)?;
    let mut q = DMatrix::zeros(size, size);
    for k in 0..segs {
        let s = tau[k].powi(1 - 2 * r as i32);
        for i in 0..w {
            for j in 0..w {
                q[(k * w + i, k * w + j)] = qu[(i, j)] * s;
            }
        }
    }
    let a_inv = sys.a.clone().try_inverse().ok_or(Error::SingularRuu { segment: 0 })?;
    let rr = &sys.m * a_inv.transpose() * &q * &a_inv * sys.m.transpose();
    let nk = sys.fixed.iter().filter(|f| **f).count();
    let nu = size - nk;
    let dk = DVector::from_iterator(nk, sys.b.iter().zip(&sys.fixed).filter(|(_, f)| **f).map(|(v, _)| *v));
    let du = if nu > 0 {
        let ruu = rr.view((nk, nk), (nu, nu)).into_owned();
        let ruk = rr.view((nk, 0), (nu, nk)).into_owned();
        let rku = rr.view((0, nk), (nk, nu)).into_owned();
        let lhs = ruu.transpose() + &ruu;
        let rhs = -(rku.transpose() + ruk) * &dk;
        solve_symmetric(&lhs, &rhs, 1e-15)
            .map_err(|e| Error::SingularRuu { segment: sys.free_waypoint[e.index.min(nu - 1)].min(segs - 1) })?
    } else {
        DVector::zeros(0)
    };
    let mut stacked = DVector::zeros(size);
    stacked.rows_mut(0, nk).copy_from(&dk);
    stacked.rows_mut(nk, nu).copy_from(&du);
    let b_full = sys.m.transpose() * &stacked;
    let p = &a_inv * &b_full;
    let cost = (p.transpose() * &q * &p)[(0, 0)];
    let segments = (0..segs).map(|k| p.rows(k * w, w).iter().copied().collect()).collect();
    Ok((CompositeTrajectory::new(n, tau.to_vec(), vec![segments])?, cost))
}
