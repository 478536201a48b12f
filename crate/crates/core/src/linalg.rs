//! Dense Cholesky factorization and the solves built on it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factorizes `a + jitter·I`. Only the lower triangle of `a` is read.
    pub fn new(a: &DMatrix<f64>, jitter: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::input(format!("cholesky of non-square {}x{} matrix", n, a.ncols())));
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)] + jitter;
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Factorization { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solves `L x = b` in place (forward substitution), column by column.
    pub fn solve_lower_mut(&self, b: &mut DMatrix<f64>) {
        let n = self.dim();
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut s = b[(i, c)];
                for k in 0..i {
                    s -= self.l[(i, k)] * b[(k, c)];
                }
                b[(i, c)] = s / self.l[(i, i)];
            }
        }
    }

    /// Solves `Lᵀ x = b` in place (back substitution).
    pub fn solve_upper_mut(&self, b: &mut DMatrix<f64>) {
        let n = self.dim();
        for c in 0..b.ncols() {
            for i in (0..n).rev() {
                let mut s = b[(i, c)];
                for k in (i + 1)..n {
                    s -= self.l[(k, i)] * b[(k, c)];
                }
                b[(i, c)] = s / self.l[(i, i)];
            }
        }
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        self.solve_lower_mut(&mut x);
        self.solve_upper_mut(&mut x);
        x
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = b.clone();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `L⁻¹ b` for a single vector.
    pub fn half_solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = b.clone();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Full inverse `A⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.solve(&DMatrix::identity(n, n))
    }
}

/// Default jitter `1e-8·trace(A)/n`.
pub fn default_jitter(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows().max(1);
    1e-8 * a.trace().abs() / n as f64
}

/// `A⁻¹ B` through a Cholesky factorization of `A + jitter·I`.
pub fn chol_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>> {
    if b.nrows() != a.nrows() {
        return Err(Error::input(format!(
            "right-hand side has {} rows, matrix has {}",
            b.nrows(),
            a.nrows()
        )));
    }
    Ok(Cholesky::new(a, jitter)?.solve(b))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Least squares `min ‖A x − b‖`.
///
/// Householder QR when `A` has full column rank; otherwise the minimum-norm
/// solution from an SVD with relative cutoff `1e-12`.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = a.shape();
    if b.nrows() != m {
        return Err(Error::input(format!("least squares: A has {m} rows, b has {}", b.nrows())));
    }
    if m >= n && n > 0 {
        let qr = a.clone().qr();
        let r = qr.r();
        let diag_max = r.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if r.diagonal().iter().all(|v| v.abs() > 1e-12 * diag_max) {
            let qtb = qr.q().transpose() * b;
            if let Some(x) = r.solve_upper_triangular(&qtb) {
                return Ok(x);
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |acc, v| acc.max(*v));
    svd.solve(b, 1e-12 * smax.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn random_pd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut r = RngStream::new(seed, 0).rng();
        let g = DMatrix::from_fn(n, n, |_, _| r.normal());
        &g * g.transpose() + DMatrix::identity(n, n) * (n as f64) * 0.1
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let b = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 3.5]);
        let x = chol_solve(&DMatrix::identity(3, 3), &b, 0.0).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let b = DMatrix::from_column_slice(2, 1, &[2.0, 4.0]);
        let x = chol_solve(&a, &b, 0.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn failing_pivot_is_reported() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        match Cholesky::new(&a, 0.0) {
            Err(Error::Factorization { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("expected factorization error, got {other:?}"),
        }
    }

    #[test]
    fn residual_bound_on_random_systems() {
        for (k, n) in [1usize, 2, 5, 17, 50, 120, 200].iter().enumerate() {
            let a = random_pd(*n, k as u64);
            let mut r = RngStream::new(99, k as u64).rng();
            let b = DMatrix::from_fn(*n, 3, |_, _| r.normal());
            let x = chol_solve(&a, &b, 0.0).unwrap();
            let resid = max_abs(&(&a * &x - &b));
            assert!(resid <= 1e-8 * max_abs(&b), "n={n} resid={resid}");
        }
    }

    #[test]
    fn log_det_matches_eigenvalues() {
        let a = random_pd(6, 3);
        let c = Cholesky::new(&a, 0.0).unwrap();
        let eig = a.clone().symmetric_eigen();
        let ld: f64 = eig.eigenvalues.iter().map(|v| v.ln()).sum();
        assert!((c.log_det() - ld).abs() < 1e-10);
    }

    #[test]
    fn qr_least_squares_matches_normal_equations() {
        let mut r = RngStream::new(5, 0).rng();
        let a = DMatrix::from_fn(30, 4, |_, _| r.normal());
        let b = DMatrix::from_fn(30, 2, |_, _| r.normal());
        let x = lstsq(&a, &b).unwrap();
        let ne = chol_solve(&(a.transpose() * &a), &(a.transpose() * &b), 0.0).unwrap();
        assert!(max_abs(&(x - ne)) < 1e-10);
    }

    #[test]
    fn rank_deficient_least_squares_is_min_norm() {
        // duplicated column: min-norm solution splits the weight evenly
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let b = DMatrix::from_column_slice(3, 1, &[2.0, 4.0, 6.0]);
        let x = lstsq(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }
}
