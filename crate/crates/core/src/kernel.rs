//! Squared-exponential kernel with per-dimension lengthscales.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
}

impl KernelConfig {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64) -> Result<Self> {
        let cfg = Self {
            family: KernelFamily::SquaredExponential,
            lengthscales,
            signal_variance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same lengthscale on every one of `dim` inputs.
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], signal_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::input("kernel needs at least one lengthscale"));
        }
        if self.lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::input(format!("lengthscales must be positive, got {:?}", self.lengthscales)));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::input(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    #[inline]
    fn eval_unchecked<'a>(&self, x: impl Iterator<Item = &'a f64>, x2: impl Iterator<Item = &'a f64>) -> f64 {
        let mut r2 = 0.0;
        for ((a, b), l) in x.zip(x2).zip(&self.lengthscales) {
            let z = (a - b) / l;
            r2 += z * z;
        }
        self.signal_variance * (-0.5 * r2).exp()
    }
}

/// `σf²·exp(−½ Σ ((x_i − x2_i)/ℓ_i)²)`.
pub fn kernel_eval(cfg: &KernelConfig, x: &[f64], x2: &[f64]) -> Result<f64> {
    if x.len() != cfg.dim() || x2.len() != cfg.dim() {
        return Err(Error::input(format!(
            "kernel of dimension {} evaluated on points of dimension {} and {}",
            cfg.dim(),
            x.len(),
            x2.len()
        )));
    }
    Ok(cfg.eval_unchecked(x.iter(), x2.iter()))
}

/// Cross-Gram matrix between the rows of `x` and the rows of `x2`.
pub fn gram(cfg: &KernelConfig, x: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != cfg.dim() || x2.ncols() != cfg.dim() {
        return Err(Error::input(format!(
            "gram: kernel dimension {} but inputs have {} and {} columns",
            cfg.dim(),
            x.ncols(),
            x2.ncols()
        )));
    }
    let d = cfg.dim();
    // Pre-scale rows so each entry is one squared distance.
    let scale = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..d).map(|j| m[(i, j)] / cfg.lengthscales[j]).collect())
            .collect()
    };
    let a = scale(x);
    let b = scale(x2);
    let sv = cfg.signal_variance;
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        let r2: f64 = a[i].iter().zip(&b[j]).map(|(p, q)| (p - q) * (p - q)).sum();
        sv * (-0.5 * r2).exp()
    }))
}

/// Symmetric Gram of `x` with itself; exact symmetry is enforced.
pub fn gram_sym(cfg: &KernelConfig, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut k = gram(cfg, x, x)?;
    let n = k.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Gram between two 1-D samples.
pub fn gram_1d(cfg: &KernelConfig, a: &[f64], b: &[f64]) -> Result<DMatrix<f64>> {
    if cfg.dim() != 1 {
        return Err(Error::input("gram_1d needs a one-dimensional kernel"));
    }
    let l = cfg.lengthscales[0];
    let sv = cfg.signal_variance;
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        let z = (a[i] - b[j]) / l;
        sv * (-0.5 * z * z).exp()
    }))
}

/// Median of pairwise absolute differences; falls back to 1 for degenerate samples.
pub fn median_heuristic(values: &[f64]) -> f64 {
    let mut d = Vec::with_capacity(values.len() * values.len().saturating_sub(1) / 2);
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            d.push((values[i] - values[j]).abs());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(|a, b| a.total_cmp(b));
    let m = d[d.len() / 2];
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

/// Column standard deviations of `x`, floored at `floor`.
pub fn column_scales(x: &DMatrix<f64>, floor: f64) -> Vec<f64> {
    (0..x.ncols())
        .map(|j| {
            let col: DVector<f64> = x.column(j).into_owned();
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(1.0);
            var.sqrt().max(floor)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn zero_distance_gives_signal_variance() {
        let k = KernelConfig::new(vec![0.3, 2.0], 1.7).unwrap();
        assert_eq!(kernel_eval(&k, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.7);
    }

    #[test]
    fn unit_distance() {
        let k = KernelConfig::isotropic(2, 1.0, 1.0).unwrap();
        let v = kernel_eval(&k, &[0.0, 0.0], &[0.6, 0.8]).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let k = KernelConfig::isotropic(2, 1.0, 1.0).unwrap();
        assert!(kernel_eval(&k, &[0.0], &[0.0, 1.0]).unwrap_err().is_validation());
        let x = DMatrix::zeros(3, 3);
        assert!(gram(&k, &x, &x).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(KernelConfig::new(vec![0.0], 1.0).is_err());
        assert!(KernelConfig::new(vec![1.0], -1.0).is_err());
        assert!(KernelConfig::new(vec![], 1.0).is_err());
    }

    #[test]
    fn single_row_gram() {
        let k = KernelConfig::isotropic(3, 0.5, 2.5).unwrap();
        let x = DMatrix::from_row_slice(1, 3, &[0.1, 0.2, 0.3]);
        let g = gram(&k, &x, &x).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(g[(0, 0)], 2.5);
    }

    #[test]
    fn gram_psd_and_transpose_over_random_configs() {
        for draw in 0..100u64 {
            let mut r = RngStream::new(draw, 11).rng();
            let d = 1 + r.below(4);
            let n = 2 + r.below(30);
            let ls: Vec<f64> = (0..d).map(|_| (r.normal()).exp()).collect();
            let k = KernelConfig::new(ls, (r.normal()).exp()).unwrap();
            let x = DMatrix::from_fn(n, d, |_, _| 2.0 * r.normal());
            let x2 = DMatrix::from_fn(n + 3, d, |_, _| 2.0 * r.normal());
            let g = gram_sym(&k, &x).unwrap();
            let min_eig = g.clone().symmetric_eigen().eigenvalues.min();
            assert!(min_eig >= -1e-10, "draw {draw}: min eig {min_eig}");
            let a = gram(&k, &x, &x2).unwrap();
            let b = gram(&k, &x2, &x).unwrap();
            assert!((a - b.transpose()).abs().max() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn kernel_symmetric(a in proptest::collection::vec(-5.0f64..5.0, 3),
                            b in proptest::collection::vec(-5.0f64..5.0, 3),
                            l in 0.1f64..3.0) {
            let k = KernelConfig::isotropic(3, l, 1.3).unwrap();
            prop_assert_eq!(kernel_eval(&k, &a, &b).unwrap(), kernel_eval(&k, &b, &a).unwrap());
        }
    }

    #[test]
    fn median_heuristic_simple() {
        assert_eq!(median_heuristic(&[0.0, 1.0, 3.0]), 2.0);
        assert_eq!(median_heuristic(&[2.0, 2.0]), 1.0);
    }
}
