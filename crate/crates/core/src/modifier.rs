//! Piecewise ninth-degree "modifier polynomials" approximating the curve
//! parameter as a C³ function of arc length.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use crate::bspline::{ArcLengthTable, BSplineCurve};
use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;

/// Polynomial degree of every segment.
pub const DEGREE: usize = 9;
/// Boundary conditions per segment end (value and three derivatives).
const END_ORDERS: usize = 4;

/// `d^r u / d s^r` at parameter `u`, from inverting `s'(u) = ‖C'(u)‖`:
/// `u' = 1/s'`, `u'' = −s''/s'³`, `u''' = (3 s''² − s' s''')/s'⁵`.
pub fn inverse_arclength_derivatives(curve: &BSplineCurve, u: f64, r: usize) -> Result<f64> {
    if r > 3 {
        return Err(Error::OrderTooHigh { order: r, max: 3 });
    }
    Ok(inverse_derivative_stack(curve, u)?[r])
}

/// `[u, u', u'', u''']` with respect to arc length at parameter `u`.
pub fn inverse_derivative_stack(curve: &BSplineCurve, u: f64) -> Result<[f64; 4]> {
    let [_, c1, c2, c3] = curve.eval_all(u);
    let s1 = c1.norm();
    if s1 < 1e-12 {
        return Err(Error::SingularParameterization { u, speed: s1 });
    }
    let d12 = c1.dot(&c2);
    let s2 = d12 / s1;
    let s3 = (c2.norm_squared() + c1.dot(&c3)) / s1 - d12 * d12 / (s1 * s1 * s1);
    Ok([u, 1.0 / s1, -s2 / (s1 * s1 * s1), (3.0 * s2 * s2 - s1 * s3) / s1.powi(5)])
}

/// One ninth-degree polynomial in the normalized arc length
/// `σ = (s − s_start)/(s_end − s_start)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifierPolySegment {
    pub coefficients: [f64; DEGREE + 1],
    pub s_start: f64,
    pub s_end: f64,
    /// Mean squared parameter error over the fitted samples.
    pub mse: f64,
    /// Number of table samples the fit used.
    pub samples: usize,
    /// Set when the segment could not be split further yet still misses the
    /// tolerance.
    pub unreachable: bool,
}

impl ModifierPolySegment {
    pub fn span_scale(&self) -> f64 {
        1.0 / (self.s_end - self.s_start)
    }

    /// `r`-th derivative of the polynomial with respect to σ.
    pub fn eval_sigma(&self, sigma: f64, r: usize) -> f64 {
        let a = &self.coefficients;
        let mut acc = 0.0;
        for n in (r..=DEGREE).rev() {
            acc = acc * sigma + falling(n, r) * a[n];
        }
        acc
    }
}

/// `n!/(n−r)!`.
fn falling(n: usize, r: usize) -> f64 {
    ((n + 1 - r)..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Constraint row of the `r`-th σ-derivative at `sigma`.
fn omega_row(sigma: f64, r: usize) -> [f64; DEGREE + 1] {
    let mut row = [0.0; DEGREE + 1];
    for (n, slot) in row.iter_mut().enumerate().skip(r) {
        *slot = falling(n, r) * sigma.powi((n - r) as i32);
    }
    row
}

/// Boundary data at one segment end: `[u, du/dσ, d²u/dσ², d³u/dσ³]`.
pub type EndConditions = [f64; END_ORDERS];

/// Degree-9 Bernstein-to-monomial change of basis: `a = T β`.
fn bernstein_to_monomial() -> [[f64; DEGREE + 1]; DEGREE + 1] {
    let n = DEGREE;
    let mut t = [[0.0; DEGREE + 1]; DEGREE + 1];
    for (k, row) in t.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate().take(k + 1) {
            let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
            *slot = sign * binom(n, i) * binom(n - i, k - i);
        }
    }
    t
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64).round()
}

fn bernstein_row(x: f64) -> [f64; DEGREE + 1] {
    let mut b = [0.0; DEGREE + 1];
    b[0] = 1.0;
    for d in 1..=DEGREE {
        for i in (0..=d).rev() {
            let left = if i > 0 { b[i - 1] * x } else { 0.0 };
            b[i] = left + b[i] * (1.0 - x);
        }
    }
    b
}

/// Equality-constrained least-squares fit of one segment: the bordered
/// system `[ΦᵀΦ Ωᵀ; Ω 0] [α; λ] = [Φᵀu*; η]`. It is assembled in Bernstein
/// coordinates, where the normal matrix is far better conditioned, and the
/// solution is mapped back to monomial coefficients.
pub fn fit_segment(sigma: &[f64], u_star: &[f64], start: &EndConditions, end: &EndConditions) -> Result<[f64; DEGREE + 1]> {
    assert_eq!(sigma.len(), u_star.len());
    if sigma.len() < DEGREE + 1 {
        return Err(Error::TooFewWaypoints { needed: DEGREE + 1, got: sigma.len() });
    }
    let nc = DEGREE + 1;
    let m = 2 * END_ORDERS;
    let t = bernstein_to_monomial();
    let mut kkt = DMatrix::<f64>::zeros(nc + m, nc + m);
    let mut rhs = DVector::<f64>::zeros(nc + m);
    for (&x, &u) in sigma.iter().zip(u_star) {
        let b = bernstein_row(x);
        for i in 0..nc {
            rhs[i] += b[i] * u;
            for j in 0..nc {
                kkt[(i, j)] += b[i] * b[j];
            }
        }
    }
    for r in 0..END_ORDERS {
        for (k, (sig, val)) in [(0.0, start[r]), (1.0, end[r])].into_iter().enumerate() {
            let row = nc + 2 * r + k;
            let omega = omega_row(sig, r);
            for i in 0..nc {
                let w: f64 = (0..nc).map(|n| omega[n] * t[n][i]).sum();
                kkt[(row, i)] = w;
                kkt[(i, row)] = w;
            }
            rhs[row] = val;
        }
    }
    let sol = solve_symmetric(&kkt, &rhs, 1e-15).map_err(|_| Error::RankDeficientKkt)?;
    let mut a = [0.0; DEGREE + 1];
    for (k, slot) in a.iter_mut().enumerate() {
        *slot = (0..nc).map(|i| t[k][i] * sol[i]).sum();
    }
    Ok(a)
}

/// Ordered modifier segments covering `[0, S_Σ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifierPolySet {
    segments: Vec<ModifierPolySegment>,
    tolerance: f64,
}

impl ModifierPolySet {
    pub fn segments(&self) -> &[ModifierPolySegment] {
        &self.segments
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn total_length(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.s_end)
    }

    /// True when some segment missed the tolerance at minimal size.
    pub fn any_unreachable(&self) -> bool {
        self.segments.iter().any(|s| s.unreachable)
    }

    pub fn segment_index(&self, s: f64) -> usize {
        self.segments.partition_point(|seg| seg.s_start <= s).saturating_sub(1).min(self.segments.len() - 1)
    }

    /// `d^r u / d s^r` at arc length `s`.
    pub fn eval_u_of_s(&self, s: f64, r: usize) -> Result<f64> {
        let total = self.total_length();
        if !(0.0..=total).contains(&s) {
            return Err(Error::ArcLengthOutOfRange { value: s, total });
        }
        if r > 3 {
            return Err(Error::OrderTooHigh { order: r, max: 3 });
        }
        Ok(self.eval_unchecked(s, r))
    }

    /// `eval_u_of_s` with `s` clamped into range.
    pub fn eval_unchecked(&self, s: f64, r: usize) -> f64 {
        let s = s.clamp(0.0, self.total_length());
        let seg = &self.segments[self.segment_index(s)];
        let k = seg.span_scale();
        seg.eval_sigma((s - seg.s_start) * k, r) * k.powi(r as i32)
    }

    /// Derivative stack `[u, u', u'', u''']` at `s`.
    pub fn eval_stack(&self, s: f64) -> [f64; 4] {
        let s = s.clamp(0.0, self.total_length());
        let seg = &self.segments[self.segment_index(s)];
        let k = seg.span_scale();
        let sigma = (s - seg.s_start) * k;
        [0, 1, 2, 3].map(|r| seg.eval_sigma(sigma, r) * k.powi(r as i32))
    }

    /// Largest relative mismatch of orders 0..=3 between neighbors at the
    /// junctions.
    pub fn junction_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.segments.windows(2) {
            let (l, r) = (&w[0], &w[1]);
            for order in 0..=3 {
                let a = l.eval_sigma(1.0, order) * l.span_scale().powi(order as i32);
                let b = r.eval_sigma(0.0, order) * r.span_scale().powi(order as i32);
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
            }
        }
        worst
    }
}

/// Recursive fit-and-split over the arc-length table rows.
pub fn fit_modifier_polynomials(table: &ArcLengthTable, curve: &BSplineCurve, eps_mse: f64) -> Result<ModifierPolySet> {
    if !(eps_mse > 0.0) {
        return Err(Error::Config { field: "eps_mse".into(), message: "must be positive".into() });
    }
    let s = table.lengths();
    let u = table.params();
    if s.len() < DEGREE + 1 {
        return Err(Error::TooFewWaypoints { needed: DEGREE + 1, got: s.len() });
    }
    let mut ends: Vec<Option<[f64; 4]>> = vec![None; s.len()];
    let mut segments = Vec::new();
    let mut stack = vec![(0usize, s.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        for idx in [a, b] {
            if ends[idx].is_none() {
                let mut d = inverse_derivative_stack(curve, u[idx])?;
                d[0] = u[idx];
                ends[idx] = Some(d);
            }
        }
        let span = s[b] - s[a];
        let to_sigma = |d: [f64; 4]| [d[0], d[1] * span, d[2] * span * span, d[3] * span * span * span];
        let start = to_sigma(ends[a].unwrap());
        let end = to_sigma(ends[b].unwrap());
        let sigma: Vec<f64> = s[a..=b].iter().map(|x| (x - s[a]) / span).collect();
        let coefficients = fit_segment(&sigma, &u[a..=b], &start, &end)?;
        let mut seg = ModifierPolySegment { coefficients, s_start: s[a], s_end: s[b], mse: 0.0, samples: b - a + 1, unreachable: false };
        seg.mse = sigma.iter().zip(&u[a..=b]).map(|(&x, &us)| (us - seg.eval_sigma(x, 0)).powi(2)).sum::<f64>() / sigma.len() as f64;
        if seg.mse <= eps_mse {
            segments.push(seg);
            continue;
        }
        // split by sample count; the middle sample is shared and the extra
        // interval goes to the left half
        let mid = a + (b - a).div_ceil(2);
        if mid - a + 1 < DEGREE + 1 || b - mid + 1 < DEGREE + 1 {
            warn!("modifier segment [{:.6}, {:.6}] mm misses tolerance: mse {:e} > {:e}", seg.s_start, seg.s_end, seg.mse, eps_mse);
            seg.unreachable = true;
            segments.push(seg);
            continue;
        }
        // right half pushed first so the left is processed first
        stack.push((mid, b));
        stack.push((a, mid));
    }
    segments.sort_by(|x, y| x.s_start.total_cmp(&y.s_start));
    debug!("modifier polynomials: {} segments at tolerance {:e}", segments.len(), eps_mse);
    Ok(ModifierPolySet { segments, tolerance: eps_mse })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn falling_factorials() {
        assert_eq!(falling(9, 0), 1.0);
        assert_eq!(falling(9, 3), 504.0);
        assert_eq!(falling(3, 3), 6.0);
    }

    #[test]
    fn bernstein_change_of_basis() {
        let t = bernstein_to_monomial();
        for &x in &[0.0, 0.3, 0.77, 1.0] {
            let b = bernstein_row(x);
            let mono: f64 = (0..=DEGREE).map(|k| (0..=DEGREE).map(|i| t[k][i] * b[i]).sum::<f64>() * x.powi(k as i32)).sum();
            let direct: f64 = b.iter().map(|v| v * v).sum();
            // evaluate sum_i b_i * b_i(x) two ways
            assert!((mono - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_data_gives_identity_polynomial() {
        let sigma: Vec<f64> = (0..20).map(|k| k as f64 / 19.0).collect();
        let a = fit_segment(&sigma, &sigma, &[0.0, 1.0, 0.0, 0.0], &[1.0, 1.0, 0.0, 0.0]).unwrap();
        for (i, c) in a.iter().enumerate() {
            let expect = if i == 1 { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-10, "a[{i}] = {c}");
        }
    }

    #[test]
    fn quadratic_data_is_reproduced() {
        let sigma: Vec<f64> = (0..31).map(|k| k as f64 / 30.0).collect();
        let u: Vec<f64> = sigma.iter().map(|x| x * x).collect();
        let a = fit_segment(&sigma, &u, &[0.0, 0.0, 2.0, 0.0], &[1.0, 2.0, 2.0, 0.0]).unwrap();
        let seg = ModifierPolySegment { coefficients: a, s_start: 0.0, s_end: 1.0, mse: 0.0, samples: 31, unreachable: false };
        let mse: f64 = sigma.iter().zip(&u).map(|(x, v)| (seg.eval_sigma(*x, 0) - v).powi(2)).sum::<f64>() / 31.0;
        assert!(mse <= 1e-18, "mse {mse:e}");
        for r in 0..4 {
            let row = omega_row(1.0, r);
            let lhs: f64 = row.iter().zip(&a).map(|(w, c)| w * c).sum();
            assert!((lhs - [1.0, 2.0, 2.0, 0.0][r]).abs() < 1e-9);
        }
    }
}
