//! Monotone, C³, jerk-minimal piecewise Bezier map `w(s)` synchronizing the
//! orientation parameter with path length.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;
use crate::minjerk::bernstein::{bernstein_gram, bezier_derivative, cost_matrix, falling, forward_diff_matrix};

/// Piecewise Bezier function of arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseBezier {
    degree: usize,
    breakpoints: Vec<f64>,
    control: Vec<Vec<f64>>,
}

impl PiecewiseBezier {
    pub fn new(degree: usize, breakpoints: Vec<f64>, control: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() != control.len() + 1 || control.iter().any(|c| c.len() != degree + 1) {
            return Err(Error::InconsistentSpec("breakpoints and control points do not match".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath("breakpoints must be strictly increasing".into()));
        }
        Ok(PiecewiseBezier { degree, breakpoints, control })
    }

    /// The identity-like linear map from `[s0, s1]` onto `[0, 1]`.
    pub fn linear(s0: f64, s1: f64, degree: usize) -> Self {
        let ctrl = (0..=degree).map(|i| i as f64 / degree as f64).collect();
        PiecewiseBezier { degree, breakpoints: vec![s0, s1], control: vec![ctrl] }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn control(&self) -> &[Vec<f64>] {
        &self.control
    }

    fn interval(&self, s: f64) -> usize {
        let n = self.control.len();
        self.breakpoints[1..n].partition_point(|&b| b <= s)
    }

    /// `d^r w/ds^r` at `s`.
    pub fn eval(&self, s: f64, r: usize) -> Result<f64> {
        let (lo, hi) = (self.breakpoints[0], *self.breakpoints.last().unwrap());
        if !(lo..=hi).contains(&s) {
            return Err(Error::ArcLengthOutOfRange { value: s, total: hi });
        }
        if r > 3 {
            return Err(Error::OrderTooHigh { order: r, max: 3 });
        }
        Ok(self.eval_unchecked(s, r))
    }

    /// `eval` with `s` clamped into range.
    pub fn eval_unchecked(&self, s: f64, r: usize) -> f64 {
        let s = s.clamp(self.breakpoints[0], *self.breakpoints.last().unwrap());
        let k = self.interval(s);
        let ds = self.breakpoints[k + 1] - self.breakpoints[k];
        let sigma = ((s - self.breakpoints[k]) / ds).clamp(0.0, 1.0);
        bezier_derivative(&self.control[k], sigma, r) / ds.powi(r as i32)
    }

    /// `[w, w', w'', w''']` at `s`.
    pub fn eval_stack(&self, s: f64) -> [f64; 4] {
        [0, 1, 2, 3].map(|r| self.eval_unchecked(s, r))
    }

    /// `Σ ∫ (d³w/ds³)² ds`.
    pub fn jerk_objective(&self) -> f64 {
        let d = forward_diff_matrix(self.degree, 3).expect("degree at least 3");
        let f = bernstein_gram(self.degree, 3);
        let k3 = falling(self.degree, 3);
        let mut total = 0.0;
        for (k, c) in self.control.iter().enumerate() {
            let ds = self.breakpoints[k + 1] - self.breakpoints[k];
            let diffs: Vec<f64> = (0..d.nrows()).map(|i| (0..c.len()).map(|j| d[(i, j)] * c[j]).sum()).collect();
            let mut acc = 0.0;
            for i in 0..diffs.len() {
                for j in 0..diffs.len() {
                    acc += diffs[i] * f[(i, j)] * diffs[j];
                }
            }
            total += acc * k3 * k3 / ds.powi(5);
        }
        total
    }

    /// Largest relative mismatch of derivatives of orders 0..=3 across the
    /// junctions.
    pub fn junction_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.control.len().saturating_sub(1) {
            let dl = self.breakpoints[k + 1] - self.breakpoints[k];
            let dr = self.breakpoints[k + 2] - self.breakpoints[k + 1];
            for r in 0..=3 {
                let a = bezier_derivative(&self.control[k], 1.0, r) / dl.powi(r as i32);
                let b = bezier_derivative(&self.control[k + 1], 0.0, r) / dr.powi(r as i32);
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
            }
        }
        worst
    }

    /// True when every interval's control points are nondecreasing.
    pub fn control_monotone(&self) -> bool {
        self.control.iter().all(|c| c.windows(2).all(|w| w[1] >= w[0]))
    }
}

/// Options for [`fit_w_of_s`].
#[derive(Debug, Clone, Copy)]
pub struct SyncSettings {
    pub degree: usize,
    /// Pin `w'`, `w''`, `w'''` to zero at both path ends.
    pub pin_boundary_rates: bool,
    /// Optional weight of an added `∫(w'')² ds` term (0 by default).
    pub regularization: f64,
    pub max_iterations: usize,
}

impl Default for SyncSettings {
    fn default() -> Self {
        SyncSettings { degree: 7, pin_boundary_rates: false, regularization: 0.0, max_iterations: 2000 }
    }
}

/// Fitted map plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct SyncFit {
    pub map: PiecewiseBezier,
    pub objective: f64,
    pub iterations: usize,
    /// Norm of the Lagrangian gradient at the returned point, relative to
    /// the norm of the Hessian and linear gradient terms.
    pub kkt_residual: f64,
    /// Most negative inequality multiplier in the final working set.
    pub min_multiplier: f64,
    pub active_constraints: usize,
    pub stalled: bool,
}

/// Minimizes the jerk objective subject to interpolation, C³ junction
/// matching and control-point monotonicity.
pub fn fit_w_of_s(s: &[f64], w: &[f64], settings: SyncSettings) -> Result<SyncFit> {
    let n = settings.degree;
    if n < 7 {
        return Err(Error::Unsupported(format!("sync degree {n}: at least 7 is needed for C3 with free interior control points")));
    }
    if s.len() != w.len() || s.len() < 2 {
        return Err(Error::TooFewWaypoints { needed: 2, got: s.len().min(w.len()) });
    }
    if s.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidPath("sync breakpoints must be strictly increasing".into()));
    }
    if w.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::InfeasibleMonotonicity);
    }
    let m = s.len() - 1;
    if m == 1 && !settings.pin_boundary_rates {
        // jerk alone leaves every quadratic through the end values optimal;
        // the linear map is the one among them with zero acceleration
        let map = PiecewiseBezier::new(n, s.to_vec(), vec![(0..=n).map(|i| w[0] + (w[1] - w[0]) * i as f64 / n as f64).collect()])?;
        return Ok(SyncFit {
            map,
            objective: 0.0,
            iterations: 0,
            kkt_residual: 0.0,
            min_multiplier: 0.0,
            active_constraints: 0,
            stalled: false,
        });
    }
    let total = s[m] - s[0];
    let ds: Vec<f64> = (0..m).map(|k| (s[k + 1] - s[k]) / total).collect();
    let w_ = n + 1;
    let nv = m * w_;
    let var = |k: usize, i: usize| k * w_ + i;

    // fixed values (NaN = free); feasible start is the step function
    let mut fixed = vec![f64::NAN; nv];
    let mut x0 = vec![0.0; nv];
    for k in 0..m {
        let constant = w[k + 1] == w[k];
        for i in 0..=n {
            let step = if i <= n / 2 { w[k] } else { w[k + 1] };
            x0[var(k, i)] = step;
            if constant {
                fixed[var(k, i)] = w[k];
            }
        }
        fixed[var(k, 0)] = w[k];
        fixed[var(k, n)] = w[k + 1];
    }
    if settings.pin_boundary_rates {
        for i in 0..=3 {
            fixed[var(0, i)] = w[0];
            fixed[var(m - 1, n - i)] = w[m];
        }
    }
    for i in 0..nv {
        if !fixed[i].is_nan() {
            x0[i] = fixed[i];
        }
    }
    let free: Vec<usize> = (0..nv).filter(|&i| fixed[i].is_nan()).collect();
    let mut pos = vec![usize::MAX; nv];
    for (j, &i) in free.iter().enumerate() {
        pos[i] = j;
    }
    let nf = free.len();

    // Hessian over all variables (block diagonal)
    let q3 = cost_matrix(n, 3)?;
    let q2 = cost_matrix(n, 2)?;
    let mut hess_blocks = Vec::with_capacity(m);
    for k in 0..m {
        hess_blocks.push(&q3 * ds[k].powi(-5) + &q2 * (settings.regularization * ds[k].powi(-3)));
    }

    // equality rows over all variables: C^r matching, r = 1..3
    let mut eq_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for k in 0..m.saturating_sub(1) {
        for r in 1..=3 {
            let d = forward_diff_matrix(n, r)?;
            let last = d.nrows() - 1;
            let mut row = Vec::new();
            for c in 0..=n {
                let a = d[(last, c)] / ds[k].powi(r as i32);
                let b = d[(0, c)] / ds[k + 1].powi(r as i32);
                if a != 0.0 {
                    row.push((var(k, c), a));
                }
                if b != 0.0 {
                    row.push((var(k + 1, c), -b));
                }
            }
            eq_rows.push(row);
        }
    }
    // inequality rows: ρ_{i+1} − ρ_i ≥ 0
    let mut ineq_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for k in 0..m {
        for i in 0..n {
            ineq_rows.push(vec![(var(k, i + 1), 1.0), (var(k, i), -1.0)]);
        }
    }
    // reduce to free variables: row·x = row_f·x_f + const
    let reduce = |row: &[(usize, f64)]| -> (DVector<f64>, f64) {
        let mut v = DVector::zeros(nf);
        let mut c = 0.0;
        for &(i, a) in row {
            if pos[i] != usize::MAX {
                v[pos[i]] += a;
            } else {
                c += a * fixed[i];
            }
        }
        (v, c)
    };
    let mut e_rows = Vec::new();
    let mut e_rhs = Vec::new();
    for row in &eq_rows {
        let (v, c) = reduce(row);
        let norm = v.norm();
        if norm == 0.0 {
            if c.abs() > 1e-12 {
                return Err(Error::InfeasibleMonotonicity);
            }
            continue;
        }
        e_rows.push(v / norm);
        e_rhs.push(-c / norm);
    }
    let mut g_rows = Vec::new();
    let mut g_rhs = Vec::new();
    for row in &ineq_rows {
        let (v, c) = reduce(row);
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        g_rows.push(v / norm);
        g_rhs.push(-c / norm);
    }

    let mut hess = DMatrix::<f64>::zeros(nf, nf);
    let mut lin = DVector::<f64>::zeros(nf);
    for k in 0..m {
        let hb = &hess_blocks[k];
        for a in 0..=n {
            let ia = var(k, a);
            if pos[ia] == usize::MAX {
                continue;
            }
            for b in 0..=n {
                let ib = var(k, b);
                if pos[ib] != usize::MAX {
                    hess[(pos[ia], pos[ib])] += hb[(a, b)];
                } else {
                    lin[pos[ia]] += hb[(a, b)] * fixed[ib];
                }
            }
        }
    }

    // Jacobi change of variables x = D y: with unequal intervals the
    // Hessian spans many decades (ds⁻⁵) while constraint rows are unit
    let scale = DVector::from_iterator(nf, (0..nf).map(|j| if hess[(j, j)] > 0.0 { hess[(j, j)].sqrt().recip() } else { 1.0 }));
    for j in 0..nf {
        for i in 0..nf {
            hess[(i, j)] *= scale[i] * scale[j];
        }
        lin[j] *= scale[j];
    }
    for (rows, rhs) in [(&mut e_rows, &mut e_rhs), (&mut g_rows, &mut g_rhs)] {
        for (row, b) in rows.iter_mut().zip(rhs.iter_mut()) {
            row.component_mul_assign(&scale);
            let norm = row.norm();
            *row /= norm;
            *b /= norm;
        }
    }
    let mut x = DVector::from_iterator(nf, free.iter().map(|&i| x0[i])).component_div(&scale);
    let mut stalled = false;
    let mut iterations = 0;
    let mut kkt_residual = 0.0;
    let mut min_multiplier = 0.0;
    let mut working: Vec<usize> = Vec::new();
    if nf > 0 {
        // initial working set: equalities, then active inequalities kept only
        // when linearly independent of the rows already chosen
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let independent = |v: &DVector<f64>, basis: &mut Vec<DVector<f64>>| -> bool {
            let mut r = v.clone();
            for b in basis.iter() {
                let c = r.dot(b);
                r -= b * c;
            }
            for b in basis.iter() {
                let c = r.dot(b);
                r -= b * c;
            }
            let nr = r.norm();
            if nr > 1e-9 * v.norm() {
                basis.push(r / nr);
                true
            } else {
                false
            }
        };
        for e in &e_rows {
            if !independent(e, &mut basis) {
                return Err(Error::InconsistentSpec("dependent synchronization equalities".into()));
            }
        }
        for (i, g) in g_rows.iter().enumerate() {
            if (g.dot(&x) - g_rhs[i]).abs() <= 1e-14 && independent(g, &mut basis) {
                working.push(i);
            }
        }
        let ne = e_rows.len();
        // set after a full unblocked step: x minimizes on the working set
        let mut at_minimum = false;
        loop {
            iterations += 1;
            if iterations > settings.max_iterations {
                stalled = true;
                warn!("synchronization QP stopped at the iteration cap ({})", settings.max_iterations);
                break;
            }
            let na = ne + working.len();
            let dim = nf + na;
            let mut kkt = DMatrix::<f64>::zeros(dim, dim);
            kkt.view_mut((0, 0), (nf, nf)).copy_from(&hess);
            for (r, row) in e_rows.iter().chain(working.iter().map(|&i| &g_rows[i])).enumerate() {
                for c in 0..nf {
                    kkt[(nf + r, c)] = row[c];
                    kkt[(c, nf + r)] = row[c];
                }
            }
            let grad = &hess * &x + &lin;
            let mut rhs = DVector::<f64>::zeros(dim);
            rhs.rows_mut(0, nf).copy_from(&(-&grad));
            let sol = solve_symmetric(&kkt, &rhs, 1e-15).map_err(|_| Error::RankDeficientKkt)?;
            let p = sol.rows(0, nf).into_owned();
            let lambda: Vec<f64> = (0..na).map(|i| -sol[nf + i]).collect();
            if at_minimum || p.amax() <= 1e-13 * x.amax().max(1.0) {
                at_minimum = false;
                // multipliers of inequalities must be nonnegative
                let (mut worst, mut worst_i) = (0.0f64, usize::MAX);
                for (j, &lam) in lambda[ne..].iter().enumerate() {
                    if lam < worst {
                        worst = lam;
                        worst_i = j;
                    }
                }
                let mscale = grad.amax().max(1e-300);
                if worst_i == usize::MAX || worst >= -1e-10 * mscale {
                    let mut lag = grad.clone();
                    for (r, row) in e_rows.iter().chain(working.iter().map(|&i| &g_rows[i])).enumerate() {
                        lag -= row * lambda[r];
                    }
                    // relative to the gradient terms, which cancel from ~1e10
                    let terms = (&hess * &x).norm() + lin.norm();
                    kkt_residual = lag.norm() / terms.max(1.0);
                    min_multiplier = lambda[ne..].iter().copied().fold(0.0, f64::min);
                    break;
                }
                working.remove(worst_i);
                continue;
            }
            // step to the first blocking constraint; rows dependent on the
            // working set are only "blocking" through rounding and are skipped
            let active_basis = orthonormal_basis(e_rows.iter().chain(working.iter().map(|&i| &g_rows[i])));
            let pnorm = p.norm();
            let mut alpha = 1.0;
            let mut block = None;
            for (i, g) in g_rows.iter().enumerate() {
                if working.contains(&i) {
                    continue;
                }
                let gp = g.dot(&p);
                if gp < -1e-12 * pnorm {
                    let slack = (g.dot(&x) - g_rhs[i]).max(0.0);
                    let a = slack / -gp;
                    if a < alpha && !in_span(g, &active_basis) {
                        alpha = a;
                        block = Some(i);
                    }
                }
            }
            x += &p * alpha;
            match block {
                Some(i) => working.push(i),
                None => at_minimum = true,
            }
        }
        // project tiny negative differences caused by rounding
        for (i, g) in g_rows.iter().enumerate() {
            let v = g.dot(&x) - g_rhs[i];
            if v < 0.0 && v > -1e-12 {
                debug!("monotonicity row {i} violated by {v:e} after solve");
            }
        }
    }
    let mut full = x0.clone();
    for (j, &i) in free.iter().enumerate() {
        full[i] = x[j] * scale[j];
    }
    let control: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut c: Vec<f64> = full[k * w_..(k + 1) * w_].to_vec();
            // enforce exact monotonicity against rounding
            c[n] = w[k + 1];
            for i in 1..n {
                c[i] = c[i].clamp(c[i - 1], w[k + 1]);
            }
            c
        })
        .collect();
    let map = PiecewiseBezier::new(n, s.to_vec(), control)?;
    let objective = map.jerk_objective();
    Ok(SyncFit { map, objective, iterations, kkt_residual, min_multiplier, active_constraints: working.len(), stalled })
}

/// Orthonormal basis of the span of `rows` (modified Gram–Schmidt, twice).
fn orthonormal_basis<'a>(rows: impl Iterator<Item = &'a DVector<f64>>) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in rows {
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = r.dot(b);
                r -= b * c;
            }
        }
        let nr = r.norm();
        if nr > 1e-9 * v.norm() {
            basis.push(r / nr);
        }
    }
    basis
}

fn in_span(v: &DVector<f64>, basis: &[DVector<f64>]) -> bool {
    let mut r = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = r.dot(b);
            r -= b * c;
        }
    }
    r.norm() <= 1e-9 * v.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_give_linear_map() {
        let fit = fit_w_of_s(&[0.0, 5.0], &[0.0, 1.0], SyncSettings::default()).unwrap();
        for (i, c) in fit.map.control()[0].iter().enumerate() {
            assert!((c - i as f64 / 7.0).abs() < 1e-9, "{:?}", fit.map.control());
        }
        assert!(fit.objective < 1e-12);
    }

    #[test]
    fn constant_data_gives_constant_map() {
        let fit = fit_w_of_s(&[0.0, 1.0, 3.0], &[0.4, 0.4, 0.4], SyncSettings::default()).unwrap();
        for c in fit.map.control() {
            assert!(c.iter().all(|v| *v == 0.4));
        }
        assert_eq!(fit.objective, 0.0);
    }

    #[test]
    fn decreasing_data_is_rejected() {
        assert_eq!(fit_w_of_s(&[0.0, 1.0, 2.0], &[0.0, 0.6, 0.5], SyncSettings::default()).err(), Some(Error::InfeasibleMonotonicity));
    }

    #[test]
    fn interior_data_is_interpolated_and_c3() {
        let s = [0.0, 1.0, 2.5, 3.0, 5.0];
        let w = [0.0, 0.1, 0.5, 0.55, 1.0];
        let fit = fit_w_of_s(&s, &w, SyncSettings::default()).unwrap();
        for (a, b) in s.iter().zip(&w) {
            assert!((fit.map.eval(*a, 0).unwrap() - b).abs() < 1e-12);
        }
        assert!(fit.map.junction_residual() < 1e-8);
        assert!(fit.map.control_monotone());
        assert!(fit.kkt_residual < 1e-6, "{}", fit.kkt_residual);
        assert!(!fit.stalled);
    }

    #[test]
    fn short_interval_next_to_long_ones() {
        let s = [0.0, 41.261777351179056, 88.61367030349919, 137.2002292428727, 138.43007622618393];
        let w = [0.0, 0.14772390813642114, 0.2931654994072538, 0.7024225503797572, 1.0];
        let fit = fit_w_of_s(&s, &w, SyncSettings::default()).unwrap();
        assert!(!fit.stalled);
        assert!(fit.map.control_monotone());
        assert!(fit.map.junction_residual() < 1e-8);
        assert!(fit.min_multiplier >= -1e-9);
        for (sk, wk) in s.iter().zip(&w) {
            assert!((fit.map.eval(*sk, 0).unwrap() - wk).abs() < 1e-12);
        }
    }
}
