//! Minimum-derivative composite Bezier trajectories in time.

pub mod bernstein;
pub mod constraints;
pub mod timing;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::BandedLdlt;
use bernstein::{bernstein_basis, bezier_derivative, binom, cost_matrix, falling, forward_diff_matrix};

pub use constraints::{assemble_constraints, solve_min_jerk_dense, ConstraintSystem};
pub use timing::{optimize_segment_times, time_scale_optimize, KinematicLimits, ScaleConstraint, ScaleReport, TimeAllocation};

/// Piecewise Bezier trajectory in time; every axis shares the segment
/// durations.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeTrajectory {
    degree: usize,
    durations: Vec<f64>,
    starts: Vec<f64>,
    /// `axes[a][k]` are the control points of axis `a` on segment `k`.
    axes: Vec<Vec<Vec<f64>>>,
}

impl CompositeTrajectory {
    pub fn new(degree: usize, durations: Vec<f64>, axes: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for (k, &tau) in durations.iter().enumerate() {
            if !(tau > 0.0) {
                return Err(Error::NonPositiveDuration { segment: k, tau });
            }
        }
        for axis in &axes {
            if axis.len() != durations.len() || axis.iter().any(|c| c.len() != degree + 1) {
                return Err(Error::InconsistentSpec("control point layout does not match segments".into()));
            }
        }
        let mut starts = Vec::with_capacity(durations.len() + 1);
        let mut t = 0.0;
        starts.push(t);
        for d in &durations {
            t += d;
            starts.push(t);
        }
        Ok(CompositeTrajectory { degree, durations, starts, axes })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    /// Segment start times, with the total duration appended.
    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn total_time(&self) -> f64 {
        *self.starts.last().unwrap()
    }

    pub fn segment_count(&self) -> usize {
        self.durations.len()
    }

    pub fn axis_count(&self) -> usize {
        self.axes.len()
    }

    pub fn control_points(&self, axis: usize, segment: usize) -> &[f64] {
        &self.axes[axis][segment]
    }

    pub fn axes(&self) -> &[Vec<Vec<f64>>] {
        &self.axes
    }

    /// Segment containing `t` (the last segment owns its end point).
    pub fn segment_at(&self, t: f64) -> usize {
        let m = self.durations.len();
        self.starts[1..m].partition_point(|&s| s <= t)
    }

    /// `r`-th time derivative of axis `a` inside segment `k` at local time
    /// `t − t_k`.
    pub fn eval_in_segment(&self, a: usize, k: usize, local: f64, r: usize) -> f64 {
        let tau = self.durations[k];
        bezier_derivative(&self.axes[a][k], (local / tau).clamp(0.0, 1.0), r) / tau.powi(r as i32)
    }

    /// `r`-th time derivative of axis `a` at `t` (clamped to the time span).
    pub fn eval(&self, a: usize, t: f64, r: usize) -> f64 {
        let t = t.clamp(0.0, self.total_time());
        let k = self.segment_at(t);
        self.eval_in_segment(a, k, t - self.starts[k], r)
    }

    /// Same trajectory with every duration multiplied by `k`.
    pub fn time_scaled(&self, k: f64) -> CompositeTrajectory {
        let durations = self.durations.iter().map(|d| d * k).collect();
        CompositeTrajectory::new(self.degree, durations, self.axes.clone()).expect("positive scale")
    }

    /// Conservative bound on `|d^r/dt^r|` of axis `a` from the convex hull of
    /// the derivative control points.
    pub fn hull_bound(&self, a: usize, r: usize) -> f64 {
        let n = self.degree;
        if r > n {
            return 0.0;
        }
        let d = forward_diff_matrix(n, r).expect("order within degree");
        let mut worst = 0.0f64;
        for (k, ctrl) in self.axes[a].iter().enumerate() {
            let scale = falling(n, r) / self.durations[k].powi(r as i32);
            for i in 0..d.nrows() {
                let v: f64 = (0..=n).map(|j| d[(i, j)] * ctrl[j]).sum();
                worst = worst.max((v * scale).abs());
            }
        }
        worst
    }

    /// `∫ (d^r ρ_a/dt^r)² dt` over the whole trajectory.
    pub fn cost(&self, a: usize, r: usize) -> f64 {
        let q = cost_matrix(self.degree, r).expect("order within degree");
        let mut total = 0.0;
        for (k, ctrl) in self.axes[a].iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..=self.degree {
                for j in 0..=self.degree {
                    acc += ctrl[i] * q[(i, j)] * ctrl[j];
                }
            }
            total += acc * self.durations[k].powi(1 - 2 * r as i32);
        }
        total
    }
}

/// Specified (`Some`) or free (`None`) time derivatives at every waypoint,
/// orders `0..h` with `h = (N+1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSpec {
    pub values: Vec<Vec<Option<f64>>>,
}

impl DerivativeSpec {
    /// Positions fixed at the waypoints; all higher derivatives zero at both
    /// ends and free at interior waypoints.
    pub fn rest_to_rest(positions: &[f64], h: usize) -> Self {
        let last = positions.len() - 1;
        let values = positions
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                (0..h)
                    .map(|o| {
                        if o == 0 {
                            Some(p)
                        } else if j == 0 || j == last {
                            Some(0.0)
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect();
        DerivativeSpec { values }
    }

    /// Every entry fixed.
    pub fn fully_fixed(stacks: &[Vec<f64>]) -> Self {
        DerivativeSpec { values: stacks.iter().map(|s| s.iter().map(|v| Some(*v)).collect()).collect() }
    }

    pub fn waypoint_count(&self) -> usize {
        self.values.len()
    }

    pub fn orders(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    fn validate(&self, n: usize) -> Result<usize> {
        if n.is_multiple_of(2) || n < 1 {
            return Err(Error::InconsistentSpec(format!("Bezier degree must be odd, got {n}")));
        }
        let h = n.div_ceil(2);
        if self.values.len() < 2 {
            return Err(Error::InconsistentSpec("at least two waypoints are required".into()));
        }
        for (j, v) in self.values.iter().enumerate() {
            if v.len() != h {
                return Err(Error::InconsistentSpec(format!("waypoint {j} has {} orders, expected {h}", v.len())));
            }
            if v[0].is_none() {
                return Err(Error::InconsistentSpec(format!("position of waypoint {j} must be fixed")));
            }
        }
        Ok(h)
    }
}

/// Endpoint map at unit duration: rows are `d^j/dζ^j` at ζ = 0 for
/// `j < h`, then at ζ = 1.
pub fn unit_endpoint_matrix(n: usize) -> DMatrix<f64> {
    let h = n.div_ceil(2);
    let mut a = DMatrix::zeros(2 * h, n + 1);
    for (end, zeta) in [0.0, 1.0].into_iter().enumerate() {
        for j in 0..h {
            let d = forward_diff_matrix(n, j).expect("order within degree");
            let b = bernstein_basis(n - j, zeta);
            let k = falling(n, j);
            for c in 0..=n {
                a[(end * h + j, c)] = k * (0..=n - j).map(|i| b[i] * d[(i, c)]).sum::<f64>();
            }
        }
    }
    a
}

/// Endpoint map of a segment of duration `tau`: rows scaled by `τ^{−j}`.
pub fn endpoint_matrix(n: usize, tau: f64) -> DMatrix<f64> {
    let h = n.div_ceil(2);
    let mut a = unit_endpoint_matrix(n);
    for row in 0..2 * h {
        let s = tau.powi(-((row % h) as i32));
        a.row_mut(row).scale_mut(s);
    }
    a
}

/// Precomputed per-degree data for the reduced (free-derivative) solve.
#[derive(Debug, Clone)]
pub struct MinJerkKernel {
    n: usize,
    r: usize,
    h: usize,
    h_unit: DMatrix<f64>,
}

impl MinJerkKernel {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if n.is_multiple_of(2) {
            return Err(Error::InconsistentSpec(format!("Bezier degree must be odd, got {n}")));
        }
        if r > n {
            return Err(Error::OrderTooHigh { order: r, max: n });
        }
        let a = unit_endpoint_matrix(n);
        let a_inv = a.clone().try_inverse().ok_or_else(|| Error::InconsistentSpec("endpoint map is singular".into()))?;
        let q = cost_matrix(n, r)?;
        let h_unit = a_inv.transpose() * q * &a_inv;
        Ok(MinJerkKernel { n, r, h: n.div_ceil(2), h_unit })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn orders(&self) -> usize {
        self.h
    }

    /// Cost matrix of one segment in endpoint-derivative coordinates.
    fn segment_h(&self, tau: f64, a: usize, b: usize) -> f64 {
        let (ja, jb) = ((a % self.h) as i32, (b % self.h) as i32);
        self.h_unit[(a, b)] * tau.powi(1 - 2 * self.r as i32 + ja + jb)
    }

    /// Control points from endpoint derivatives `[start orders, end orders]`.
    ///
    /// Each end fixes `h` control points through its forward (backward)
    /// differences `Δʲρ₀ = τʲ x⁽ʲ⁾(0) / (N!/(N−j)!)`, so zero end
    /// derivatives give exactly repeated control points.
    pub fn control_points(&self, tau: f64, ends: &[f64]) -> Vec<f64> {
        let (n, h) = (self.n, self.h);
        let mut c = vec![0.0; n + 1];
        let mut tj = 1.0;
        for j in 0..h {
            let k = falling(n, j);
            // Δʲc₀ = Σ_i (−1)^{j−i} C(j,i) c_i
            let mut acc = tj * ends[j] / k;
            for i in 0..j {
                let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
                acc -= sign * binom(j, i) * c[i];
            }
            c[j] = acc;
            // ∇ʲc_N = Σ_i (−1)^i C(j,i) c_{N−i}, derivative (N!/(N−j)!) ∇ʲc_N
            let mut acc = tj * ends[h + j] / k;
            for i in 0..j {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                acc -= sign * binom(j, i) * c[n - i];
            }
            c[n - j] = if j % 2 == 0 { acc } else { -acc };
            tj *= tau;
        }
        c
    }
}

/// Result of the reduced solve.
#[derive(Debug, Clone)]
pub struct MinJerkSolution {
    pub trajectory: CompositeTrajectory,
    pub cost: f64,
    /// Derivative stacks at every waypoint after the solve.
    pub waypoint_derivatives: Vec<Vec<f64>>,
    /// Norm of the cost gradient with respect to the free derivatives.
    pub stationarity: f64,
}

/// Solves for the free derivatives and builds the trajectory for one axis.
pub fn solve_min_jerk(spec: &DerivativeSpec, tau: &[f64], r: usize, n: usize) -> Result<MinJerkSolution> {
    let kernel = MinJerkKernel::new(n, r)?;
    solve_with_kernel(&kernel, spec, tau)
}

/// As [`solve_min_jerk`] with a precomputed kernel.
pub fn solve_with_kernel(kernel: &MinJerkKernel, spec: &DerivativeSpec, tau: &[f64]) -> Result<MinJerkSolution> {
    let h = spec.validate(kernel.n)?;
    let m = spec.waypoint_count() - 1;
    if tau.len() != m {
        return Err(Error::InconsistentSpec(format!("{} durations for {} segments", tau.len(), m)));
    }
    for (k, &t) in tau.iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::NonPositiveDuration { segment: k, tau: t });
        }
    }
    let nv = (m + 1) * h;
    let mut x: Vec<f64> = vec![0.0; nv];
    let mut free_of = vec![usize::MAX; nv];
    let mut free_vars = Vec::new();
    for (j, vals) in spec.values.iter().enumerate() {
        for (o, v) in vals.iter().enumerate() {
            let g = j * h + o;
            match v {
                Some(val) => x[g] = *val,
                None => {
                    free_of[g] = free_vars.len();
                    free_vars.push(g);
                }
            }
        }
    }
    // global cost matrix entry between variables g1, g2 (block tridiagonal)
    let entry = |g1: usize, g2: usize| -> f64 {
        let (j1, j2) = (g1 / h, g2 / h);
        let mut acc = 0.0;
        // segments k touching both waypoints
        let lo = j1.max(j2).saturating_sub(1);
        let hi = j1.min(j2).min(m - 1);
        for k in lo..=hi {
            if j1 < k || j1 > k + 1 || j2 < k || j2 > k + 1 {
                continue;
            }
            let a = (j1 - k) * h + g1 % h;
            let b = (j2 - k) * h + g2 % h;
            acc += kernel.segment_h(tau[k], a, b);
        }
        acc
    };
    let nu = free_vars.len();
    let mut stationarity = 0.0;
    if nu > 0 {
        let mut rhs = vec![0.0; nu];
        for (i, &g) in free_vars.iter().enumerate() {
            let j = g / h;
            let mut acc = 0.0;
            for g2 in j.saturating_sub(1) * h..((j + 2) * h).min(nv) {
                if free_of[g2] == usize::MAX {
                    acc += entry(g, g2) * x[g2];
                }
            }
            rhs[i] = -acc;
        }
        let diag: Vec<f64> = free_vars.iter().map(|&g| entry(g, g).abs().sqrt().max(f64::MIN_POSITIVE)).collect();
        // bandwidth in free ordering: at most two waypoints' worth of entries
        let bw = 2 * h - 1;
        let get = |i: usize, j: usize| -> f64 {
            let (gi, gj) = (free_vars[i], free_vars[j]);
            if (gi / h).abs_diff(gj / h) > 1 {
                return 0.0;
            }
            entry(gi, gj) / (diag[i] * diag[j])
        };
        let fac = BandedLdlt::new(nu, bw, get, 1e-14).map_err(|e| Error::SingularRuu { segment: (free_vars[e.index] / h).min(m - 1) })?;
        let scaled_rhs: Vec<f64> = rhs.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut y = fac.solve(&scaled_rhs);
        // one refinement step on the scaled system
        let res: Vec<f64> = (0..nu)
            .map(|i| {
                let mut acc = scaled_rhs[i];
                for j in i.saturating_sub(bw)..(i + bw + 1).min(nu) {
                    acc -= get(i.max(j), i.min(j)) * y[j];
                }
                acc
            })
            .collect();
        let corr = fac.solve(&res);
        for (yi, ci) in y.iter_mut().zip(&corr) {
            *yi += ci;
        }
        for (i, &g) in free_vars.iter().enumerate() {
            x[g] = y[i] / diag[i];
        }
        let mut grad2 = 0.0;
        for &g in &free_vars {
            let j = g / h;
            let mut acc = 0.0;
            for g2 in j.saturating_sub(1) * h..((j + 2) * h).min(nv) {
                acc += entry(g, g2) * x[g2];
            }
            grad2 += (2.0 * acc).powi(2);
        }
        stationarity = grad2.sqrt();
    }
    let mut segs = Vec::with_capacity(m);
    let mut cost = 0.0;
    for k in 0..m {
        let ends = &x[k * h..(k + 2) * h];
        for a in 0..2 * h {
            for b in 0..2 * h {
                cost += ends[a] * kernel.segment_h(tau[k], a, b) * ends[b];
            }
        }
        segs.push(kernel.control_points(tau[k], ends));
    }
    let waypoint_derivatives = (0..=m).map(|j| x[j * h..(j + 1) * h].to_vec()).collect();
    Ok(MinJerkSolution {
        trajectory: CompositeTrajectory::new(kernel.n, tau.to_vec(), vec![segs])?,
        cost: cost.max(0.0),
        waypoint_derivatives,
        stationarity,
    })
}

/// Stacks single-axis solutions sharing durations into one trajectory.
pub fn merge_axes(parts: &[CompositeTrajectory]) -> Result<CompositeTrajectory> {
    let first = parts.first().ok_or_else(|| Error::InconsistentSpec("no axes".into()))?;
    let mut axes = Vec::new();
    for p in parts {
        if p.durations != first.durations || p.degree != first.degree {
            return Err(Error::InconsistentSpec("axes disagree on segment timing".into()));
        }
        axes.extend(p.axes.iter().cloned());
    }
    CompositeTrajectory::new(first.degree, first.durations.clone(), axes)
}
