//! Small dense complex linear algebra: Hermitian Cholesky, triangular
//! inversion, and a cyclic Jacobi eigensolver for Hermitian matrices.
//!
//! Everything here targets the matrix sizes this crate actually produces
//! (Gram matrices up to a documented dimension cap of ~2000, covariance
//! matrices of a few dozen rows), so plain dense algorithms are used
//! throughout and no external backend is pulled in.

use crate::{C64, Error, Result};

/// Dense row-major complex matrix.
#[derive(Clone, Debug)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> CMatrix {
        CMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> CMatrix {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from Hermitian symmetry, `max |A - A^*|`.
    pub fn hermitian_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut d = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// In-place averaging with the adjoint; call after building a matrix that
    /// is Hermitian up to roundoff.
    pub fn hermitize(&mut self) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in i..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)].conj());
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factorization `A = L L^*` of a Hermitian positive definite
/// matrix; returns the lower factor. Fails with a [`Error::Numerical`] when a
/// pivot drops below `tol` times the largest diagonal entry, which is how
/// Gram-matrix breakdowns (under-resolved quadrature, too-strong metric
/// perturbations) surface.
pub fn cholesky(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let scale = (0..n).map(|i| a[(i, i)].re).fold(0.0f64, f64::max);
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        // negated form deliberately catches NaN pivots as failures
        if !(d > tol * scale) {
            return Err(Error::Numerical(format!(
                "cholesky pivot {j} is {d:.3e} (scale {scale:.3e}); matrix not positive definite"
            )));
        }
        let dj = d.sqrt();
        l[(j, j)] = C64::new(dj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

/// Solve `U x = b` for upper-triangular `U`.
pub fn solve_upper(u: &CMatrix, b: &[C64]) -> Vec<C64> {
    assert_eq!(u.rows, u.cols);
    let n = u.rows;
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            let c = x[k];
            x[i] -= u[(i, k)] * c;
        }
        x[i] /= u[(i, i)];
    }
    x
}

/// Inverse of an upper-triangular matrix by back substitution.
pub fn invert_upper(u: &CMatrix) -> CMatrix {
    assert_eq!(u.rows, u.cols);
    let n = u.rows;
    let mut inv = CMatrix::zeros(n, n);
    for j in (0..n).rev() {
        inv[(j, j)] = C64::new(1.0, 0.0) / u[(j, j)];
        for i in (0..j).rev() {
            let mut s = C64::new(0.0, 0.0);
            for k in i + 1..=j {
                s += u[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / u[(i, i)];
        }
    }
    inv
}

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order with matching orthonormal
/// eigenvectors as the columns of the second component.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    m.hermitize();
    let mut v = CMatrix::identity(n);
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + m.max_abs()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let g = apq.norm();
                if g < 1e-300 {
                    continue;
                }
                let phase = apq / g;
                let tau = (m[(q, q)].re - m[(p, p)].re) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Unitary rotation J: J[p][p]=c, J[p][q]=s*phase,
                // J[q][p]=-s*conj(phase), J[q][q]=c; update M <- J^* M J.
                let jpq = s * phase;
                let jqp = -s * phase.conj();
                // M <- M J
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c + mkq * jqp;
                    m[(k, q)] = mkp * jpq + mkq * c;
                }
                // M <- J^* M
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk + jqp.conj() * mqk;
                    m[(q, k)] = jpq.conj() * mpk + c * mqk;
                }
                // V <- V J
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * c;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (m[(i, i)].re, i)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| v[(i, pairs[j].1)]);
    (vals, vecs)
}

/// Gauss-Legendre nodes and weights on [0, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Initial guess on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> [0, 1].
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let b = CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        let mut h = b.adjoint().mul(&b);
        h.hermitize();
        h
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = random_hermitian(12, 7);
        let l = cholesky(&a, 1e-13).unwrap();
        let rec = l.mul(&l.adjoint());
        let mut err = 0.0f64;
        for i in 0..12 {
            for j in 0..12 {
                err = err.max((rec[(i, j)] - a[(i, j)]).norm());
            }
        }
        assert!(err < 1e-12 * a.max_abs(), "reconstruction error {err}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = CMatrix::identity(3);
        a[(2, 2)] = C64::new(-1.0, 0.0);
        assert!(cholesky(&a, 1e-13).is_err());
    }

    #[test]
    fn upper_inverse() {
        let a = random_hermitian(9, 3);
        let l = cholesky(&a, 1e-13).unwrap();
        let u = l.adjoint();
        let uinv = invert_upper(&u);
        let prod = u.mul(&uinv);
        for i in 0..9 {
            for j in 0..9 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = random_hermitian(14, 11);
        let (vals, vecs) = hermitian_eigen(&a);
        // A V = V diag(vals)
        for j in 0..14 {
            let col: Vec<C64> = (0..14).map(|i| vecs[(i, j)]).collect();
            let av = a.matvec(&col);
            for i in 0..14 {
                assert!((av[i] - vals[j] * col[i]).norm() < 1e-10 * (1.0 + a.max_abs()));
            }
        }
        // eigenvalues ascending
        for w in vals.windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        // n-point rule integrates polynomials of degree 2n-1 on [0,1].
        let (x, w) = gauss_legendre_01(8);
        for k in 0..16 {
            let quad: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum();
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((quad - exact).abs() < 1e-14, "degree {k}: {quad} vs {exact}");
        }
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
