//! Dense symmetric-indefinite and banded symmetric factorizations.

use nalgebra::{DMatrix, DVector};

/// Bunch–Kaufman factorization `P A Pᵀ = L D Lᵀ` of a symmetric matrix,
/// with `D` block diagonal (1×1 and 2×2 blocks).
#[derive(Debug, Clone)]
pub struct SymmetricFactor {
    n: usize,
    l: DMatrix<f64>,
    /// Diagonal blocks: `d[k]` on the diagonal, `off[k]` couples `k` and `k+1`
    /// when a 2×2 block starts at `k`.
    d: Vec<f64>,
    off: Vec<f64>,
    block2: Vec<bool>,
    perm: Vec<usize>,
    min_pivot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularMatrix {
    pub index: usize,
}

impl SymmetricFactor {
    /// Factorizes `a`. Only symmetry of the input is assumed; a pivot whose
    /// magnitude falls below `rel_tol · max|a|` is treated as singular.
    pub fn new(a: &DMatrix<f64>, rel_tol: f64) -> Result<Self, SingularMatrix> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = rel_tol * scale.max(f64::MIN_POSITIVE);
        let mut s = a.clone();
        let mut l = DMatrix::<f64>::identity(n, n);
        let mut d = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut block2 = vec![false; n];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;

        let swap = |s: &mut DMatrix<f64>, l: &mut DMatrix<f64>, perm: &mut Vec<usize>, k: usize, i: usize, j: usize| {
            if i == j {
                return;
            }
            s.swap_rows(i, j);
            s.swap_columns(i, j);
            for c in 0..k {
                let t = l[(i, c)];
                l[(i, c)] = l[(j, c)];
                l[(j, c)] = t;
            }
            perm.swap(i, j);
        };

        let mut k = 0;
        while k < n {
            let absakk = s[(k, k)].abs();
            let (mut imax, mut colmax) = (k, 0.0f64);
            for i in k + 1..n {
                if s[(i, k)].abs() > colmax {
                    colmax = s[(i, k)].abs();
                    imax = i;
                }
            }
            if absakk.max(colmax) <= tol {
                return Err(SingularMatrix { index: perm[k] });
            }
            let two_by_two;
            if absakk >= alpha * colmax {
                two_by_two = false;
            } else {
                let mut rowmax = 0.0f64;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(s[(imax, j)].abs());
                    }
                }
                if absakk * rowmax >= alpha * colmax * colmax {
                    two_by_two = false;
                } else if s[(imax, imax)].abs() >= alpha * rowmax {
                    two_by_two = false;
                    swap(&mut s, &mut l, &mut perm, k, k, imax);
                } else {
                    two_by_two = true;
                    swap(&mut s, &mut l, &mut perm, k, k + 1, imax);
                }
            }
            if !two_by_two {
                let piv = s[(k, k)];
                if piv.abs() <= tol {
                    return Err(SingularMatrix { index: perm[k] });
                }
                min_pivot = min_pivot.min(piv.abs());
                d[k] = piv;
                for i in k + 1..n {
                    l[(i, k)] = s[(i, k)] / piv;
                }
                for j in k + 1..n {
                    let sj = s[(j, k)];
                    if sj == 0.0 {
                        continue;
                    }
                    for i in k + 1..n {
                        s[(i, j)] -= l[(i, k)] * sj;
                    }
                }
                k += 1;
            } else {
                let (a11, a21, a22) = (s[(k, k)], s[(k + 1, k)], s[(k + 1, k + 1)]);
                let det = a11 * a22 - a21 * a21;
                if det.abs() <= tol * tol {
                    return Err(SingularMatrix { index: perm[k] });
                }
                min_pivot = min_pivot.min(det.abs().sqrt());
                d[k] = a11;
                d[k + 1] = a22;
                off[k] = a21;
                block2[k] = true;
                for i in k + 2..n {
                    let (c1, c2) = (s[(i, k)], s[(i, k + 1)]);
                    l[(i, k)] = (c1 * a22 - c2 * a21) / det;
                    l[(i, k + 1)] = (c2 * a11 - c1 * a21) / det;
                }
                for j in k + 2..n {
                    let (c1, c2) = (s[(j, k)], s[(j, k + 1)]);
                    for i in k + 2..n {
                        s[(i, j)] -= l[(i, k)] * c1 + l[(i, k + 1)] * c2;
                    }
                }
                k += 2;
            }
        }
        Ok(SymmetricFactor { n, l, d, off, block2, perm, min_pivot })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot magnitude met during factorization.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Number of (positive, negative) eigenvalues of the factored matrix.
    pub fn inertia(&self) -> (usize, usize) {
        let (mut pos, mut neg) = (0, 0);
        let mut k = 0;
        while k < self.n {
            if self.block2[k] {
                // a 2x2 Bunch-Kaufman block always has one eigenvalue of each
                // sign unless its determinant is positive
                let det = self.d[k] * self.d[k + 1] - self.off[k] * self.off[k];
                if det < 0.0 {
                    pos += 1;
                    neg += 1;
                } else if self.d[k] > 0.0 {
                    pos += 2;
                } else {
                    neg += 2;
                }
                k += 2;
            } else {
                if self.d[k] > 0.0 {
                    pos += 1;
                } else {
                    neg += 1;
                }
                k += 1;
            }
        }
        (pos, neg)
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut z = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for j in 0..n {
            let zj = z[j];
            if zj != 0.0 {
                for i in j + 1..n {
                    z[i] -= self.l[(i, j)] * zj;
                }
            }
        }
        let mut k = 0;
        while k < n {
            if self.block2[k] {
                let (a11, a21, a22) = (self.d[k], self.off[k], self.d[k + 1]);
                let det = a11 * a22 - a21 * a21;
                let (z1, z2) = (z[k], z[k + 1]);
                z[k] = (a22 * z1 - a21 * z2) / det;
                z[k + 1] = (a11 * z2 - a21 * z1) / det;
                k += 2;
            } else {
                z[k] /= self.d[k];
                k += 1;
            }
        }
        for j in (0..n).rev() {
            let mut acc = z[j];
            for i in j + 1..n {
                acc -= self.l[(i, j)] * z[i];
            }
            z[j] = acc;
        }
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        x
    }
}

/// Solves a symmetric system after symmetric diagonal equilibration, which
/// keeps bordered systems with mixed units well scaled. One step of iterative
/// refinement is applied.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>, SingularMatrix> {
    let n = a.nrows();
    let mut scale = DVector::from_element(n, 1.0);
    for i in 0..n {
        let m = a.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 {
            scale[i] = 1.0 / m.sqrt();
        }
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * scale[i] * scale[j]);
    let f = SymmetricFactor::new(&scaled, rel_tol)?;
    let rhs = b.component_mul(&scale);
    let mut y = f.solve(&rhs);
    let r = &rhs - &scaled * &y;
    y += f.solve(&r);
    Ok(y.component_mul(&scale))
}

/// LDLᵀ factorization of a symmetric positive-definite banded matrix without
/// pivoting. Storage is row-wise lower band: `band[i][k]` holds `A[i][i-bw+k]`.
#[derive(Debug, Clone)]
pub struct BandedLdlt {
    n: usize,
    bw: usize,
    l: Vec<Vec<f64>>,
    d: Vec<f64>,
}

impl BandedLdlt {
    /// `get(i, j)` returns `A[i][j]` for `j ≤ i`, `i − j ≤ bw`.
    pub fn new(n: usize, bw: usize, get: impl Fn(usize, usize) -> f64, rel_tol: f64) -> Result<Self, SingularMatrix> {
        let mut l = vec![vec![0.0; bw + 1]; n];
        let mut d = vec![0.0; n];
        let mut diag_max = 0.0f64;
        for i in 0..n {
            diag_max = diag_max.max(get(i, i).abs());
        }
        let tol = rel_tol * diag_max.max(f64::MIN_POSITIVE);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut acc = get(i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    acc -= l[i][k + bw - i] * l[j][k + bw - j] * d[k];
                }
                if j == i {
                    if acc <= tol {
                        return Err(SingularMatrix { index: i });
                    }
                    d[i] = acc;
                    l[i][bw] = 1.0;
                } else {
                    l[i][j + bw - i] = acc / d[j];
                }
            }
        }
        Ok(BandedLdlt { n, bw, l, d })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut z = b.to_vec();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut acc = z[i];
            for j in j0..i {
                acc -= self.l[i][j + bw - i] * z[j];
            }
            z[i] = acc;
        }
        for i in 0..n {
            z[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in i + 1..(i + bw + 1).min(n) {
                acc -= self.l[k][i + bw - k] * z[k];
            }
            z[i] = acc;
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn indefinite_kkt_solve_matches_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2, 3, 5, 9, 14] {
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let mut a = &m + m.transpose();
            // zero diagonal block forces 2x2 pivots
            for i in 0..n / 2 {
                a[(i, i)] = 0.0;
            }
            let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let f = SymmetricFactor::new(&a, 1e-14).unwrap();
            let x = f.solve(&b);
            assert!((&a * &x - &b).norm() < 1e-9 * (1.0 + b.norm()), "n={n}");
            let (p, q) = f.inertia();
            assert_eq!(p + q, n);
        }
    }

    #[test]
    fn kkt_inertia() {
        // [[I, B^T],[B, 0]] with B full rank 2x4 has inertia (4, 2)
        let mut a = DMatrix::zeros(6, 6);
        for i in 0..4 {
            a[(i, i)] = 1.0;
        }
        let b = [[1.0, 2.0, 0.0, 1.0], [0.0, 1.0, 1.0, -1.0]];
        for (r, row) in b.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                a[(4 + r, c)] = *v;
                a[(c, 4 + r)] = *v;
            }
        }
        let f = SymmetricFactor::new(&a, 1e-14).unwrap();
        assert_eq!(f.inertia(), (4, 2));
    }

    #[test]
    fn singular_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(SymmetricFactor::new(&a, 1e-12).is_err());
    }

    #[test]
    fn banded_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, bw) = (17, 3);
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if (i as isize - j as isize).abs() <= bw as isize {
                    a[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
        }
        let spd = &a * a.transpose() + DMatrix::identity(n, n);
        let f = BandedLdlt::new(n, 2 * bw, |i, j| spd[(i, j)], 1e-14).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let r = &spd * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.norm() < 1e-11);
    }
}
