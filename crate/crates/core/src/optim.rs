//! Derivative-free optimizers: Nelder–Mead and golden-section search.

/// Outcome of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadSettings {
    pub initial_step: f64,
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values falls below
    /// `f_tol · (|f_best| + f_tol)`.
    pub f_tol: f64,
    pub x_tol: f64,
    pub restarts: usize,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        NelderMeadSettings { initial_step: 0.5, max_evaluations: 20_000, f_tol: 1e-12, x_tol: 1e-9, restarts: 1 }
    }
}

/// Minimizes `f` with dimension-adaptive Nelder–Mead coefficients, restarting
/// from the best point `restarts` times.
pub fn nelder_mead(f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64], s: NelderMeadSettings) -> NelderMeadResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return NelderMeadResult { x: vec![], f: v, evaluations: evals, converged: true };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut converged = false;
    for _round in 0..=s.restarts {
        let mut simplex: Vec<Vec<f64>> = vec![best_x.clone()];
        let mut values = vec![best_f];
        for i in 0..n {
            let mut x = best_x.clone();
            x[i] += s.initial_step;
            values.push(eval(&x, &mut evals));
            simplex.push(x);
        }
        converged = false;
        while evals < s.max_evaluations {
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            values = idx.iter().map(|&i| values[i]).collect();
            let spread = values[n] - values[0];
            let size =
                simplex[1..].iter().map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
            if spread <= s.f_tol * (values[0].abs() + s.f_tol) || size <= s.x_tol {
                converged = true;
                break;
            }
            let mut c = vec![0.0; n];
            for x in &simplex[..n] {
                for (ci, xi) in c.iter_mut().zip(x) {
                    *ci += xi / nf;
                }
            }
            let along = |t: f64| -> Vec<f64> { c.iter().zip(&simplex[n]).map(|(ci, wi)| ci + t * (ci - wi)).collect() };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < values[0] {
                let xe = along(gamma);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let x = along(rho);
                    let v = eval(&x, &mut evals);
                    (x, v)
                } else {
                    let x = along(-rho);
                    let v = eval(&x, &mut evals);
                    (x, v)
                };
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    for i in 1..=n {
                        let x: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, xi)| b + sigma * (xi - b)).collect();
                        values[i] = eval(&x, &mut evals);
                        simplex[i] = x;
                    }
                }
            }
        }
        let (ib, fb) = values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
        if fb < best_f {
            best_f = fb;
            best_x = simplex[ib].clone();
        }
        if evals >= s.max_evaluations {
            break;
        }
    }
    NelderMeadResult { x: best_x, f: best_f, evaluations: evals, converged }
}

/// Maximizes a unimodal `f` on `[a, b]` by golden-section search; returns
/// `(argmax, max)`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
