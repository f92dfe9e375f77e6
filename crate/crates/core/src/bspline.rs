//! Clamped B-spline curves in matrix form, interpolatory fitting, and the
//! arc-length lookup table.

use log::warn;
use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, GaussRule};

/// Highest derivative order served by [`BSplineCurve::eval`].
pub const MAX_ORDER: usize = 3;

/// Clamped, non-rational B-spline curve in three dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineCurve {
    degree: usize,
    knots: Vec<f64>,
    control_points: Vec<Vector3<f64>>,
    /// Control points of the hodographs of orders 1..=MAX_ORDER (empty when
    /// the degree is too low).
    hodographs: Vec<Vec<Vector3<f64>>>,
}

impl BSplineCurve {
    /// Builds a curve, checking the clamped-knot invariants.
    pub fn new(degree: usize, knots: Vec<f64>, control_points: Vec<Vector3<f64>>) -> Result<Self> {
        let n = control_points.len();
        if degree == 0 || n < degree + 1 {
            return Err(Error::TooFewWaypoints { needed: degree + 1, got: n });
        }
        if knots.len() != n + degree + 1 {
            return Err(Error::InvalidPath(format!("knot count {} does not match {} control points of degree {}", knots.len(), n, degree)));
        }
        let clamped = knots[..=degree].iter().all(|&k| k == 0.0) && knots[n..].iter().all(|&k| k == 1.0);
        let sorted = knots.windows(2).all(|w| w[0] <= w[1]);
        if !clamped || !sorted {
            return Err(Error::InvalidPath("knot vector must be clamped on [0, 1] and nondecreasing".into()));
        }
        let mut hodographs = Vec::new();
        let mut prev = control_points.clone();
        for r in 1..=MAX_ORDER.min(degree) {
            let p = (degree + 1 - r) as f64;
            let next: Vec<Vector3<f64>> = (0..prev.len() - 1)
                .map(|i| {
                    let span = knots[i + degree + 1] - knots[i + r];
                    if span > 0.0 {
                        (prev[i + 1] - prev[i]) * (p / span)
                    } else {
                        Vector3::zeros()
                    }
                })
                .collect();
            hodographs.push(next.clone());
            prev = next;
        }
        Ok(BSplineCurve { degree, knots, control_points, hodographs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn control_points(&self) -> &[Vector3<f64>] {
        &self.control_points
    }

    /// Index `i` of the knot span `[u_i, u_{i+1})` containing `u`; `u = 1`
    /// belongs to the last non-empty span.
    pub fn span_index(&self, u: f64) -> usize {
        span_index(&self.knots, self.degree, self.control_points.len(), u)
    }

    /// Distinct knot values (span boundaries) in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if b.last() != Some(&k) {
                b.push(k);
            }
        }
        b
    }

    /// Full basis row at `u`: one entry per control point.
    pub fn blending_basis(&self, u: f64) -> Result<Vec<f64>> {
        check_unit(u)?;
        let n = self.control_points.len();
        let i = self.span_index(u);
        let local = matrix_basis(&self.knots, self.degree, i, u);
        let mut row = vec![0.0; n];
        row[i - self.degree..=i].copy_from_slice(&local);
        Ok(row)
    }

    /// `r`-th parametric derivative at `u`.
    pub fn eval(&self, u: f64, r: usize) -> Result<Vector3<f64>> {
        check_unit(u)?;
        if r > MAX_ORDER {
            return Err(Error::OrderTooHigh { order: r, max: MAX_ORDER });
        }
        if r > self.degree {
            return Ok(Vector3::zeros());
        }
        Ok(self.eval_unchecked(u, r))
    }

    /// `eval` without range checks; `u` is clamped into [0, 1].
    pub fn eval_unchecked(&self, u: f64, r: usize) -> Vector3<f64> {
        if r > self.degree {
            return Vector3::zeros();
        }
        let u = u.clamp(0.0, 1.0);
        let (cps, knots) = if r == 0 {
            (&self.control_points[..], &self.knots[..])
        } else {
            (&self.hodographs[r - 1][..], &self.knots[r..self.knots.len() - r])
        };
        let p = self.degree - r;
        let i = span_index(knots, p, cps.len(), u);
        let basis = matrix_basis(knots, p, i, u);
        let mut acc = Vector3::zeros();
        for (k, b) in basis.iter().enumerate() {
            acc += cps[i - p + k] * *b;
        }
        acc
    }

    /// Value and derivatives of orders 0..=3 at `u`.
    pub fn eval_all(&self, u: f64) -> [Vector3<f64>; 4] {
        [0, 1, 2, 3].map(|r| self.eval_unchecked(u, r))
    }

    /// The same point set traversed backwards: `C_rev(u) = C(1 − u)`.
    pub fn reversed(&self) -> BSplineCurve {
        let knots: Vec<f64> = self.knots.iter().rev().map(|k| 1.0 - k).collect();
        let cps: Vec<Vector3<f64>> = self.control_points.iter().rev().copied().collect();
        BSplineCurve::new(self.degree, knots, cps).expect("reversal preserves invariants")
    }
}

fn check_unit(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::ParamOutOfRange { value: u, lo: 0.0, hi: 1.0 });
    }
    Ok(())
}

fn span_index(knots: &[f64], p: usize, n_ctrl: usize, u: f64) -> usize {
    let last = n_ctrl - 1;
    if u >= knots[last + 1] {
        // clamped end: the last non-empty span
        let mut i = last;
        while i > p && knots[i] == knots[i + 1] {
            i -= 1;
        }
        return i;
    }
    if u <= knots[p] {
        return p;
    }
    // largest i with knots[i] <= u, searched in [p, last]
    let (mut lo, mut hi) = (p, last + 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if knots[mid] <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Nonzero basis functions `N_{i−p..=i, p}(u)` by successive multiplication
/// with the two-diagonal blending matrices: `b_d = b_{d−1} · N_d`, where row
/// `k` of `N_d` carries `1 − v` on the diagonal and `v` to its right, with
/// `v = (u − u_j) / (u_{j+d} − u_j)`, `j = i − d + k`.
pub fn matrix_basis(knots: &[f64], p: usize, i: usize, u: f64) -> Vec<f64> {
    let mut b = vec![0.0; p + 1];
    b[0] = 1.0;
    for d in 1..=p {
        let mut next = [0.0f64; 16];
        for k in 0..d {
            let j = i + 1 + k - d;
            let den = knots[j + d] - knots[j];
            let v = if den > 0.0 { (u - knots[j]) / den } else { 0.0 };
            next[k] += (1.0 - v) * b[k];
            next[k + 1] += v * b[k];
        }
        b[..=d].copy_from_slice(&next[..=d]);
    }
    b
}

/// Centripetal parameters: increments proportional to square roots of the
/// chord lengths, normalized to end at exactly 1.
pub fn centripetal_params(points: &[Vector3<f64>]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::TooFewWaypoints { needed: 2, got: points.len() });
    }
    let mut roots = Vec::with_capacity(points.len() - 1);
    for (k, w) in points.windows(2).enumerate() {
        let chord = (w[1] - w[0]).norm();
        if chord == 0.0 {
            return Err(Error::DuplicateConsecutiveWaypoint { index: k });
        }
        roots.push(chord.sqrt());
    }
    Ok(params_from_increments(&roots))
}

/// Cumulative normalized sums of positive increments, ending at exactly 1.
pub fn params_from_increments(inc: &[f64]) -> Vec<f64> {
    let total: f64 = inc.iter().sum();
    let mut out = Vec::with_capacity(inc.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for d in inc {
        acc += d;
        out.push(acc / total);
    }
    *out.last_mut().unwrap() = 1.0;
    out
}

/// Clamped knot vector whose interior knots are running means of `p`
/// consecutive parameters.
pub fn averaged_knots(params: &[f64], p: usize) -> Result<Vec<f64>> {
    let count = params.len();
    if count < p + 1 {
        return Err(Error::TooFewWaypoints { needed: p + 1, got: count });
    }
    let n = count - 1;
    let mut knots = vec![0.0; p + 1];
    for j in 1..=n - p {
        let mean = params[j..j + p].iter().sum::<f64>() / p as f64;
        knots.push(mean);
    }
    knots.extend(std::iter::repeat_n(1.0, p + 1));
    Ok(knots)
}

/// Interpolating B-spline through `points` at the given parameters.
pub fn fit_through(points: &[Vector3<f64>], params: &[f64], p: usize) -> Result<BSplineCurve> {
    let knots = averaged_knots(params, p)?;
    let n = points.len();
    let mut phi = DMatrix::<f64>::zeros(n, n);
    for (k, &u) in params.iter().enumerate() {
        let i = span_index(&knots, p, n, u);
        let local = matrix_basis(&knots, p, i, u);
        for (c, v) in local.iter().enumerate() {
            phi[(k, i - p + c)] = *v;
        }
    }
    let lu = phi.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::SingularCollocationMatrix { condition: f64::INFINITY })?;
    let condition = one_norm(&phi) * one_norm(&inv);
    if !condition.is_finite() || condition > 1e16 {
        return Err(Error::SingularCollocationMatrix { condition });
    }
    if condition > 1e12 {
        warn!("collocation matrix is ill-conditioned (condition estimate {condition:e})");
    }
    let mut rhs = DMatrix::<f64>::zeros(n, 3);
    for (k, q) in points.iter().enumerate() {
        for d in 0..3 {
            rhs[(k, d)] = q[d];
        }
    }
    let lu = phi.clone().lu();
    let mut sol = lu.solve(&rhs).ok_or(Error::SingularCollocationMatrix { condition })?;
    // one refinement step
    let resid = &rhs - &phi * &sol;
    if let Some(corr) = lu.solve(&resid) {
        sol += corr;
    }
    let cps = (0..n).map(|k| Vector3::new(sol[(k, 0)], sol[(k, 1)], sol[(k, 2)])).collect();
    BSplineCurve::new(p, knots, cps)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|c| m.column(c).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Fits the interpolating spline of degree `p` through positions using
/// centripetal parameters and averaged knots. Returns the curve and the
/// waypoint parameters.
pub fn fit_interpolating_spline(points: &[Vector3<f64>], p: usize) -> Result<(BSplineCurve, Vec<f64>)> {
    if points.len() < p + 1 {
        return Err(Error::TooFewWaypoints { needed: p + 1, got: points.len() });
    }
    let params = centripetal_params(points)?;
    let curve = fit_through(points, &params, p)?;
    Ok((curve, params))
}

/// Cumulative arc length against curve parameter, recorded at the
/// boundaries of accepted adaptive-Simpson intervals.
#[derive(Debug, Clone)]
pub struct ArcLengthTable {
    params: Vec<f64>,
    lengths: Vec<f64>,
    max_leaf_error: f64,
}

/// Settings for [`arc_length_table`].
#[derive(Debug, Clone, Copy)]
pub struct ArcLengthSettings {
    pub tolerance: f64,
    pub max_depth: usize,
    /// Every knot span is split into at least `2^min_depth` leaves.
    pub min_depth: usize,
}

impl Default for ArcLengthSettings {
    fn default() -> Self {
        ArcLengthSettings { tolerance: 1e-10, max_depth: 32, min_depth: 3 }
    }
}

/// Speed `‖C'(u)‖`.
pub fn speed(curve: &BSplineCurve, u: f64) -> f64 {
    curve.eval_unchecked(u, 1).norm()
}

/// Integrates the curve speed over each knot span with adaptive Simpson.
pub fn arc_length_table(curve: &BSplineCurve, settings: ArcLengthSettings) -> Result<ArcLengthTable> {
    if !(settings.tolerance > 0.0) {
        return Err(Error::Config { field: "quadrature_tolerance".into(), message: "must be positive".into() });
    }
    let f = |u: f64| speed(curve, u);
    let mut params = vec![0.0];
    let mut lengths = vec![0.0];
    let mut max_leaf_error = 0.0f64;
    let mut acc = 0.0;
    let breaks = curve.breakpoints();
    // at least 32 rows overall so short curves still feed the modifier fit
    let spans = breaks.len() - 1;
    let mut min_depth = settings.min_depth;
    while (spans << min_depth) < 32 {
        min_depth += 1;
    }
    for w in breaks.windows(2) {
        let out = adaptive_simpson(&f, w[0], w[1], settings.tolerance, settings.max_depth, min_depth);
        if let Some(at) = out.depth_exceeded_at {
            return Err(Error::QuadratureDepthExceeded { depth: settings.max_depth, at });
        }
        for leaf in out.leaves {
            acc += leaf.value;
            max_leaf_error = max_leaf_error.max(leaf.error);
            params.push(leaf.b);
            lengths.push(acc);
        }
    }
    *params.last_mut().unwrap() = 1.0;
    Ok(ArcLengthTable { params, lengths, max_leaf_error })
}

impl ArcLengthTable {
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn total_length(&self) -> f64 {
        *self.lengths.last().unwrap()
    }

    pub fn max_leaf_error(&self) -> f64 {
        self.max_leaf_error
    }

    /// Arc length from 0 to `u`: table lookup plus 16-point Gauss–Legendre
    /// over the remainder of the row interval.
    pub fn length_at(&self, curve: &BSplineCurve, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let j = self.params.partition_point(|&x| x <= u).saturating_sub(1);
        if self.params[j] == u {
            return self.lengths[j];
        }
        thread_local! {
            static RULE: GaussRule = GaussRule::new(16);
        }
        RULE.with(|r| self.lengths[j] + r.integrate(self.params[j], u, |x| speed(curve, x)))
    }

    /// Curve parameter at arc length `s` by safeguarded Newton iteration.
    pub fn param_at(&self, curve: &BSplineCurve, s: f64) -> f64 {
        let total = self.total_length();
        if s <= 0.0 {
            return 0.0;
        }
        if s >= total {
            return 1.0;
        }
        let j = self.lengths.partition_point(|&x| x <= s).saturating_sub(1).min(self.params.len() - 2);
        let (mut lo, mut hi) = (self.params[j], self.params[j + 1]);
        let (s0, s1) = (self.lengths[j], self.lengths[j + 1]);
        let mut u = lo + (hi - lo) * (s - s0) / (s1 - s0);
        for _ in 0..60 {
            let g = self.length_at(curve, u) - s;
            if g.abs() <= 1e-14 * total.max(1.0) {
                break;
            }
            if g > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let sp = speed(curve, u);
            let mut next = u - g / sp;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= 1e-17 {
                u = next;
                break;
            }
            u = next;
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cox–de Boor recursion, used only as an oracle.
    fn cox_de_boor(knots: &[f64], i: usize, p: usize, u: f64) -> f64 {
        if p == 0 {
            let in_span = knots[i] <= u && u < knots[i + 1];
            let closes_end = u == 1.0 && knots[i] < 1.0 && knots[i + 1] == 1.0;
            return if in_span || closes_end { 1.0 } else { 0.0 };
        }
        let mut acc = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            acc += (u - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, u);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            acc += (knots[i + p + 1] - u) / d2 * cox_de_boor(knots, i + 1, p - 1, u);
        }
        acc
    }

    fn sample_curve() -> BSplineCurve {
        let pts: Vec<Vector3<f64>> =
            (0..9).map(|k| Vector3::new(k as f64 * 3.0, (k as f64 * 0.9).sin() * 5.0, (k as f64).powi(2) * 0.2)).collect();
        fit_interpolating_spline(&pts, 5).unwrap().0
    }

    #[test]
    fn matrix_basis_agrees_with_cox_de_boor() {
        let c = sample_curve();
        for k in 0..=200 {
            let u = k as f64 / 200.0;
            let row = c.blending_basis(u).unwrap();
            for (i, v) in row.iter().enumerate() {
                let o = cox_de_boor(c.knots(), i, 5, u);
                assert!((v - o).abs() < 1e-13, "u={u} i={i}: {v} vs {o}");
            }
        }
    }

    #[test]
    fn centripetal_examples() {
        let p = |x: f64| Vector3::new(x, 0.0, 0.0);
        assert_eq!(centripetal_params(&[p(0.0), p(1.0), p(2.0)]).unwrap(), vec![0.0, 0.5, 1.0]);
        let v = centripetal_params(&[p(0.0), p(1.0), p(5.0)]).unwrap();
        assert!((v[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(centripetal_params(&[p(0.0), p(2.0)]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(centripetal_params(&[p(0.0), p(1.0), p(1.0)]), Err(Error::DuplicateConsecutiveWaypoint { index: 1 }));
    }

    #[test]
    fn averaged_knot_examples() {
        let ub = [0.0, 0.1, 0.2, 0.5, 0.8, 0.9, 1.0];
        let k = averaged_knots(&ub, 5).unwrap();
        assert_eq!(k.len(), 13);
        assert!((k[6] - 0.5).abs() < 1e-15);
        let k = averaged_knots(&ub[..6], 5).unwrap();
        assert_eq!(k, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(averaged_knots(&ub[..5], 5), Err(Error::TooFewWaypoints { .. })));
    }

    #[test]
    fn hodographs_match_finite_differences() {
        let c = sample_curve();
        let h = 1e-5;
        for &u in &[0.13, 0.37, 0.61, 0.88] {
            for r in 1..=3 {
                let fd = (c.eval(u + h, r - 1).unwrap() - c.eval(u - h, r - 1).unwrap()) / (2.0 * h);
                let an = c.eval(u, r).unwrap();
                assert!((fd - an).norm() <= 1e-5 * an.norm().max(1.0), "u={u} r={r}");
            }
        }
    }
}
