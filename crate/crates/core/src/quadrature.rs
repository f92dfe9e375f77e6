//! Gauss–Legendre rules and adaptive Simpson integration.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed Gauss–Legendre rule mapped to arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussRule { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(m + h * x);
        }
        acc * h
    }
}

/// An accepted leaf of adaptive Simpson integration.
#[derive(Debug, Clone, Copy)]
pub struct SimpsonLeaf {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    pub error: f64,
}

/// Result of an adaptive Simpson run: accepted leaves in order.
#[derive(Debug, Clone)]
pub struct SimpsonOutcome {
    pub leaves: Vec<SimpsonLeaf>,
    /// Set when a leaf had to be accepted at the depth limit.
    pub depth_exceeded_at: Option<f64>,
}

/// Classic recursive adaptive Simpson: accept when `|S_whole − S_halves| / 15`
/// is within the local tolerance, halving the tolerance at each level. Leaves
/// are refined to at least `min_depth` levels.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: usize, min_depth: usize) -> SimpsonOutcome {
    let mut out = SimpsonOutcome { leaves: Vec::new(), depth_exceeded_at: None };
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 0, max_depth, min_depth, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    max_depth: usize,
    min_depth: usize,
    out: &mut SimpsonOutcome,
) {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = (left + right - whole).abs() / 15.0;
    if depth >= min_depth && err <= tol {
        out.leaves.push(SimpsonLeaf { a, b, value: left + right + (left + right - whole) / 15.0, error: err });
        return;
    }
    if depth >= max_depth {
        out.depth_exceeded_at.get_or_insert(m);
        out.leaves.push(SimpsonLeaf { a, b, value: left + right, error: err });
        return;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, max_depth, min_depth, out);
    recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, max_depth, min_depth, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 64] {
            let r = GaussRule::new(n);
            let deg = 2 * n - 1;
            let v = r.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((v - exact).abs() < 1e-12 * exact, "n={n}: {v} vs {exact}");
            let wsum: f64 = gauss_legendre(n).1.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn adaptive_simpson_on_smooth_integrand() {
        let out = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-12, 32, 2);
        let total: f64 = out.leaves.iter().map(|l| l.value).sum();
        assert!((total - 2.0).abs() < 1e-11);
        assert!(out.depth_exceeded_at.is_none());
        for w in out.leaves.windows(2) {
            assert_eq!(w[0].b, w[1].a);
        }
    }
}
