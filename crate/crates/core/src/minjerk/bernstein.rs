//! Bernstein-basis building blocks: forward differences, Gram matrices,
//! evaluation, and segment costs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64).round()
}

/// `N!/(N−r)!`.
pub fn falling(n: usize, r: usize) -> f64 {
    ((n + 1 - r)..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `(N−r+1)×(N+1)` matrix of `r`-th forward differences.
pub fn forward_diff_matrix(n: usize, r: usize) -> Result<DMatrix<f64>> {
    if r > n {
        return Err(Error::OrderTooHigh { order: r, max: n });
    }
    let mut d = DMatrix::zeros(n - r + 1, n + 1);
    for i in 0..=n - r {
        for j in 0..=r {
            let sign = if (r - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            d[(i, i + j)] = sign * binom(r, j);
        }
    }
    Ok(d)
}

/// `∫₀¹ B(ζ) B(ζ)ᵀ dζ` for the degree-`N−r` Bernstein basis.
pub fn bernstein_gram(n: usize, r: usize) -> DMatrix<f64> {
    assert!(r <= n, "order {r} exceeds degree {n}");
    let m = n - r;
    DMatrix::from_fn(m + 1, m + 1, |i, j| binom(m, i) * binom(m, j) / ((2 * m + 1) as f64 * binom(2 * m, i + j)))
}

/// Degree-`n` Bernstein basis values at `x`.
pub fn bernstein_basis(n: usize, x: f64) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for d in 1..=n {
        for i in (0..=d).rev() {
            let left = if i > 0 { b[i - 1] * x } else { 0.0 };
            b[i] = left + b[i] * (1.0 - x);
        }
    }
    b
}

/// `r`-th derivative with respect to ζ of the Bezier with control points
/// `ctrl`, by forward differencing then de Casteljau.
pub fn bezier_derivative(ctrl: &[f64], zeta: f64, r: usize) -> f64 {
    let n = ctrl.len() - 1;
    if r > n {
        return 0.0;
    }
    let mut buf = [0.0f64; 32];
    let pts = &mut buf[..=n];
    pts.copy_from_slice(ctrl);
    for level in 0..r {
        for i in 0..n - level {
            pts[i] = pts[i + 1] - pts[i];
        }
    }
    let m = n - r;
    for level in 0..m {
        for i in 0..m - level {
            pts[i] = pts[i] + zeta * (pts[i + 1] - pts[i]);
        }
    }
    pts[0] * falling(n, r)
}

/// Unit-duration cost matrix `(N!/(N−r)!)² D_rᵀ F_r D_r`.
pub fn cost_matrix(n: usize, r: usize) -> Result<DMatrix<f64>> {
    let d = forward_diff_matrix(n, r)?;
    let f = bernstein_gram(n, r);
    let k = falling(n, r);
    Ok(d.transpose() * f * d * (k * k))
}

/// `∫₀^τ (d^r ρ/dt^r)² dt` of one Bezier segment.
pub fn segment_cost(ctrl: &[f64], tau: f64, r: usize) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveDuration { segment: 0, tau });
    }
    let n = ctrl.len() - 1;
    let q = cost_matrix(n, r)?;
    let mut acc = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            acc += ctrl[i] * q[(i, j)] * ctrl[j];
        }
    }
    Ok(acc.max(0.0) * tau.powi(1 - 2 * r as i32))
}

/// Degree-elevates Bezier control points by one.
pub fn elevate(ctrl: &[f64]) -> Vec<f64> {
    let n = ctrl.len() - 1;
    let mut out = Vec::with_capacity(n + 2);
    out.push(ctrl[0]);
    for i in 1..=n {
        let a = i as f64 / (n + 1) as f64;
        out.push(a * ctrl[i - 1] + (1.0 - a) * ctrl[i]);
    }
    out.push(ctrl[n]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_examples() {
        let d = forward_diff_matrix(2, 1).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0]));
        let d = forward_diff_matrix(3, 2).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 4, &[1.0, -2.0, 1.0, 0.0, 0.0, 1.0, -2.0, 1.0]));
        assert!(forward_diff_matrix(3, 4).is_err());
    }

    #[test]
    fn gram_examples() {
        assert_eq!(bernstein_gram(3, 3)[(0, 0)], 1.0);
        let f = bernstein_gram(5, 3);
        let expect = [[1.0 / 5.0, 1.0 / 10.0, 1.0 / 30.0], [1.0 / 10.0, 2.0 / 15.0, 1.0 / 10.0], [1.0 / 30.0, 1.0 / 10.0, 1.0 / 5.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((f[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
        for n in 0..10 {
            assert!((bernstein_gram(n, 0).sum() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_segment_has_zero_jerk_cost() {
        let ctrl: Vec<f64> = (0..8).map(|i| 2.0 * i as f64 - 1.0).collect();
        assert!(segment_cost(&ctrl, 1.3, 3).unwrap().abs() < 1e-20);
    }

    #[test]
    fn elevation_preserves_the_curve() {
        let c = [0.0, 1.0, -2.0, 4.0];
        let e = elevate(&c);
        for k in 0..=10 {
            let z = k as f64 / 10.0;
            assert!((bezier_derivative(&c, z, 0) - bezier_derivative(&e, z, 0)).abs() < 1e-14);
        }
    }
}
