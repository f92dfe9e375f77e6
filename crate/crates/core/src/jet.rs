//! Truncated Taylor jets: a value together with its first three derivatives
//! with respect to one independent variable.

use std::ops::{Add, Mul, Neg, Sub};

/// `[f, f', f'', f''']` of a scalar function.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet3(pub [f64; 4]);

impl Jet3 {
    pub const ZERO: Jet3 = Jet3([0.0; 4]);

    pub fn constant(v: f64) -> Self {
        Jet3([v, 0.0, 0.0, 0.0])
    }

    /// The independent variable itself at `v`.
    pub fn variable(v: f64) -> Self {
        Jet3([v, 1.0, 0.0, 0.0])
    }

    pub fn new(d: [f64; 4]) -> Self {
        Jet3(d)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn d(&self, order: usize) -> f64 {
        self.0[order]
    }

    pub fn scale(self, k: f64) -> Self {
        Jet3(self.0.map(|x| x * k))
    }

    /// `f(self)` given `f` and its first three derivatives evaluated at
    /// `self.value()`.
    pub fn compose(self, f: [f64; 4]) -> Self {
        let [_, g1, g2, g3] = self.0;
        Jet3([f[0], f[1] * g1, f[2] * g1 * g1 + f[1] * g2, f[3] * g1 * g1 * g1 + 3.0 * f[2] * g1 * g2 + f[1] * g3])
    }

    /// Chain rule for an inner jet in a different variable: if `self` holds
    /// derivatives of `f(x)` with respect to `x`, and `inner` holds `x(t)`,
    /// returns derivatives of `f(x(t))` with respect to `t`.
    pub fn chain(self, inner: Jet3) -> Self {
        inner.compose(self.0)
    }

    pub fn recip(self) -> Self {
        let x = self.0[0];
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn sqrt(self) -> Self {
        let x = self.0[0];
        let s = x.sqrt();
        self.compose([s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)])
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.0[0].sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.0[0].sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn atan(self) -> Self {
        let x = self.0[0];
        let q = 1.0 / (1.0 + x * x);
        self.compose([x.atan(), q, -2.0 * x * q * q, (6.0 * x * x - 2.0) * q * q * q])
    }

    /// Two-argument arctangent of `self / x` with the usual quadrant rules for
    /// the value and derivatives from `(x y' − y x') / (x² + y²)`.
    pub fn atan2(self, x: Jet3) -> Self {
        let y = self;
        let value = y.0[0].atan2(x.0[0]);
        let num = x * y.diff() - y * x.diff();
        let den = x * x + y * y;
        let rate = num * den.recip();
        Jet3([value, rate.0[0], rate.0[1], rate.0[2]])
    }

    /// Derivative jet with the top order unknown (set to zero).
    pub fn diff(self) -> Self {
        Jet3([self.0[1], self.0[2], self.0[3], 0.0])
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        Jet3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2], self.0[3] + o.0[3]])
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        Jet3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2], self.0[3] - o.0[3]])
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, o: Jet3) -> Jet3 {
        let a = self.0;
        let b = o.0;
        Jet3([
            a[0] * b[0],
            a[1] * b[0] + a[0] * b[1],
            a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
            a[3] * b[0] + 3.0 * a[2] * b[1] + 3.0 * a[1] * b[2] + a[0] * b[3],
        ])
    }
}

impl Mul<f64> for Jet3 {
    type Output = Jet3;
    fn mul(self, k: f64) -> Jet3 {
        self.scale(k)
    }
}

impl Add<f64> for Jet3 {
    type Output = Jet3;
    fn add(self, k: f64) -> Jet3 {
        let mut r = self;
        r.0[0] += k;
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> [f64; 3] {
        let f1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let f2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let f3 = (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h);
        [f1, f2, f3]
    }

    #[test]
    fn product_and_composition_match_finite_differences() {
        let x0 = 0.7;
        let g = |t: f64| (t.sin() * (1.0 + t * t).sqrt()).atan2(t.cos() + 2.0);
        let t = Jet3::variable(x0);
        let j = (t.sin() * (t * t + 1.0).sqrt()).atan2(t.cos() + 2.0);
        let ref_ = fd(g, x0, 1e-3);
        assert!((j.value() - g(x0)).abs() < 1e-14);
        for k in 0..3 {
            assert!((j.0[k + 1] - ref_[k]).abs() < 1e-4 * (1.0 + ref_[k].abs()), "order {}", k + 1);
        }
    }

    #[test]
    fn recip_of_polynomial() {
        // 1/(1+t)^... derivatives of 1/x at x = 2: -1/4, 2/8, -6/16
        let j = Jet3::variable(2.0).recip();
        assert_eq!(j.0, [0.5, -0.25, 0.25, -0.375]);
    }
}
