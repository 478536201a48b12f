//! Exact Gaussian-process regression with a per-row noise diagonal.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{column_scales, gram, gram_sym, KernelConfig};
use crate::linalg::Cholesky;
use crate::optim::multi_start;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Closed-form leave-one-out predictive moments.
///
/// With `C = K + diag(noise)`, point `i` held out has predictive mean
/// `y_i − [C⁻¹y]_i / [C⁻¹]_ii` and variance `1 / [C⁻¹]_ii` (variance of the
/// noisy observation).
pub fn loo_predictive(k: &DMatrix<f64>, noise: &DVector<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = k.nrows();
    if k.ncols() != n || noise.len() != n || y.len() != n {
        return Err(Error::input("loo_predictive: inconsistent dimensions"));
    }
    if noise.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::input("loo_predictive: noise must be positive"));
    }
    let mut c = k.clone();
    for i in 0..n {
        c[(i, i)] += noise[i];
    }
    let chol = Cholesky::new(&c, 0.0)?;
    let cinv = chol.inverse();
    let a = chol.solve_vec(y);
    let mut means = DVector::zeros(n);
    let mut vars = DVector::zeros(n);
    for i in 0..n {
        let d = cinv[(i, i)];
        means[i] = y[i] - a[i] / d;
        vars[i] = 1.0 / d;
    }
    Ok((means, vars))
}

/// Log density of `y` under `N(mean, var)`.
#[inline]
pub fn gaussian_log_density(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (y - mean) * (y - mean) / var)
}

/// A conditioned GP: zero-mean prior around a constant `offset`.
#[derive(Debug, Clone)]
pub struct ExactGp {
    kernel: KernelConfig,
    inputs: DMatrix<f64>,
    noise: DVector<f64>,
    offset: f64,
    chol: Cholesky,
    weights: DVector<f64>,
}

impl ExactGp {
    pub fn condition(
        kernel: KernelConfig,
        inputs: DMatrix<f64>,
        targets: &DVector<f64>,
        noise: DVector<f64>,
        offset: f64,
    ) -> Result<Self> {
        let n = inputs.nrows();
        if targets.len() != n || noise.len() != n {
            return Err(Error::input("gp: inputs, targets and noise lengths differ"));
        }
        let mut c = gram_sym(&kernel, &inputs)?;
        for i in 0..n {
            c[(i, i)] += noise[i];
        }
        let chol = Cholesky::new(&c, 0.0)?;
        let centered = targets.map(|v| v - offset);
        let weights = chol.solve_vec(&centered);
        Ok(Self {
            kernel,
            inputs,
            noise,
            offset,
            chol,
            weights,
        })
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn noise(&self) -> &DVector<f64> {
        &self.noise
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    /// Posterior mean and latent-function variance at the rows of `xq`.
    pub fn predict(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if xq.ncols() != self.inputs.ncols() {
            return Err(Error::input(format!(
                "query has {} columns, model trained on {}",
                xq.ncols(),
                self.inputs.ncols()
            )));
        }
        let ks = gram(&self.kernel, &self.inputs, xq)?;
        let mean = ks.transpose() * &self.weights;
        let mut v = ks;
        self.chol.solve_lower_mut(&mut v);
        let prior = self.kernel.signal_variance;
        let var = DVector::from_iterator(
            xq.nrows(),
            v.column_iter()
                .map(|c| (prior - c.norm_squared()).max(prior * 1e-12)),
        );
        Ok((mean.map(|m| m + self.offset), var))
    }

    /// Posterior mean only.
    pub fn predict_mean(&self, xq: &DMatrix<f64>) -> Result<DVector<f64>> {
        let ks = gram(&self.kernel, &self.inputs, xq)?;
        Ok((ks.transpose() * &self.weights).map(|m| m + self.offset))
    }

    /// Log marginal likelihood of the conditioning targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        // (y−m)ᵀC⁻¹(y−m) = wᵀCw = ‖Lᵀw‖² with w = C⁻¹(y−m).
        let l = self.chol.l();
        let n = self.weights.len();
        let quad: f64 = (0..n)
            .map(|i| (i..n).map(|k| l[(k, i)] * self.weights[k]).sum::<f64>().powi(2))
            .sum();
        -0.5 * (quad + self.chol.log_det() + n as f64 * LN_2PI)
    }
}

/// Log marginal likelihood of `y` under `N(offset, K + diag(noise))`.
pub fn log_marginal(k: &DMatrix<f64>, noise: &DVector<f64>, y: &DVector<f64>, offset: f64) -> Result<f64> {
    let n = k.nrows();
    let mut c = k.clone();
    for i in 0..n {
        c[(i, i)] += noise[i];
    }
    let chol = Cholesky::new(&c, 0.0)?;
    let z = chol.half_solve_vec(&y.map(|v| v - offset));
    Ok(-0.5 * (z.norm_squared() + chol.log_det() + n as f64 * LN_2PI))
}

/// Hyperparameters of a homoscedastic GP fitted by marginal likelihood.
#[derive(Debug, Clone)]
pub struct GpHyper {
    pub kernel: KernelConfig,
    pub noise: f64,
}

/// Options for [`fit_gp`].
#[derive(Debug, Clone)]
pub struct GpFitOptions {
    pub budget: usize,
    pub starts: usize,
    /// Lower bound on the noise variance as a fraction of the target variance.
    pub min_noise_frac: f64,
    /// Optimize a full lengthscale vector instead of one scale over column spreads.
    pub ard: bool,
}

impl Default for GpFitOptions {
    fn default() -> Self {
        Self {
            budget: 400,
            starts: 3,
            min_noise_frac: 1e-8,
            ard: false,
        }
    }
}

/// Maximizes the marginal likelihood over lengthscales, signal and noise.
///
/// Parameters live in log space. Without `ard`, the lengthscales are one
/// shared multiplier on the per-column standard deviations.
pub fn fit_gp(x: &DMatrix<f64>, y: &DVector<f64>, opts: &GpFitOptions) -> Result<(GpHyper, f64)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Fit("need at least two rows to fit a GP".into()));
    }
    let offset = y.mean();
    let yvar = y.iter().map(|v| (v - offset).powi(2)).sum::<f64>() / n as f64;
    if !(yvar > 0.0) {
        return Err(Error::Fit("targets have zero variance".into()));
    }
    let base = column_scales(x, 1e-12);
    let d = x.ncols();
    let n_ls = if opts.ard { d } else { 1 };
    let min_noise = opts.min_noise_frac * yvar;

    let unpack = |p: &[f64]| -> Option<GpHyper> {
        let ls: Vec<f64> = if opts.ard {
            (0..d).map(|j| base[j] * p[j].clamp(-8.0, 8.0).exp()).collect()
        } else {
            base.iter().map(|b| b * p[0].clamp(-8.0, 8.0).exp()).collect()
        };
        let sv = yvar * p[n_ls].clamp(-10.0, 10.0).exp();
        let noise = min_noise + yvar * p[n_ls + 1].clamp(-25.0, 5.0).exp();
        Some(GpHyper {
            kernel: KernelConfig::new(ls, sv).ok()?,
            noise,
        })
    };
    let mut objective = |p: &[f64]| -> f64 {
        let Some(h) = unpack(p) else { return f64::INFINITY };
        let Ok(k) = gram_sym(&h.kernel, x) else { return f64::INFINITY };
        match log_marginal(&k, &DVector::from_element(n, h.noise), y, offset) {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|s| {
            let mut p = vec![0.0; n_ls + 2];
            let ls0 = [0.0, -1.0, 1.0, -2.0][s % 4];
            for v in p.iter_mut().take(n_ls) {
                *v = ls0;
            }
            p[n_ls] = 0.0;
            p[n_ls + 1] = [-4.0, -8.0, -2.0, -12.0][s % 4];
            p
        })
        .collect();
    let res = multi_start(&mut objective, &starts, 1.0, opts.budget, 1e-10);
    let h = unpack(&res.x).ok_or_else(|| Error::Fit("optimizer returned invalid hyperparameters".into()))?;
    if !res.value.is_finite() {
        return Err(Error::Fit("marginal likelihood not finite at any start".into()));
    }
    Ok((h, -res.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    /// Predicts held-out point `i` from a GP conditioned on the others.
    fn refit_oracle(k: &DMatrix<f64>, noise: &DVector<f64>, y: &DVector<f64>, i: usize) -> (f64, f64) {
        let n = y.len();
        let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let k_rest = k.select_rows(&keep).select_columns(&keep);
        let mut c = k_rest.clone();
        for (a, &j) in keep.iter().enumerate() {
            c[(a, a)] += noise[j];
        }
        let cinv = c.try_inverse().unwrap();
        let kstar = DVector::from_iterator(keep.len(), keep.iter().map(|&j| k[(i, j)]));
        let yr = DVector::from_iterator(keep.len(), keep.iter().map(|&j| y[j]));
        let mean = (kstar.transpose() * &cinv * yr)[0];
        let var = k[(i, i)] + noise[i] - (kstar.transpose() * &cinv * &kstar)[0];
        (mean, var)
    }

    #[test]
    fn loo_matches_explicit_refit() {
        for seed in 0..10u64 {
            let mut r = RngStream::new(seed, 3).rng();
            let n = 3 + r.below(18);
            let x = DMatrix::from_fn(n, 2, |_, _| r.normal());
            let kcfg = KernelConfig::new(vec![0.7, 1.3], 1.5).unwrap();
            let k = gram_sym(&kcfg, &x).unwrap();
            let noise = DVector::from_fn(n, |_, _| 0.01 + 0.2 * r.uniform());
            let y = DVector::from_fn(n, |_, _| r.normal());
            let (m, v) = loo_predictive(&k, &noise, &y).unwrap();
            for i in 0..n {
                let (mo, vo) = refit_oracle(&k, &noise, &y, i);
                assert!((m[i] - mo).abs() <= 1e-8 * mo.abs().max(1.0), "mean {} vs {}", m[i], mo);
                assert!((v[i] - vo).abs() <= 1e-8 * vo.abs(), "var {} vs {}", v[i], vo);
            }
        }
    }

    #[test]
    fn loo_two_points_identity_kernel() {
        // Independent points: held-out mean is the prior mean 0, variance K_ii + noise_i.
        let k = DMatrix::identity(2, 2);
        let noise = DVector::from_element(2, 1.0);
        let y = DVector::from_column_slice(&[0.7, -1.2]);
        let (m, v) = loo_predictive(&k, &noise, &y).unwrap();
        assert!(m.iter().all(|x| x.abs() < 1e-15));
        assert!(v.iter().all(|x| (x - 2.0).abs() < 1e-15));
    }

    #[test]
    fn loo_huge_noise_limit() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 0.3, 0.9, 1.4]);
        let k = gram_sym(&KernelConfig::isotropic(1, 1.0, 1.0).unwrap(), &x).unwrap();
        let noise = DVector::from_column_slice(&[0.1, 0.1, 1e12, 0.1]);
        let y = DVector::from_column_slice(&[1.0, 0.5, -0.2, 0.3]);
        let (_, v) = loo_predictive(&k, &noise, &y).unwrap();
        assert!((v[2] / 1e12 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn loo_rejects_nonpositive_noise() {
        let k = DMatrix::identity(2, 2);
        let y = DVector::zeros(2);
        assert!(loo_predictive(&k, &DVector::from_element(2, 0.0), &y).is_err());
    }

    #[test]
    fn marginal_likelihood_routes_agree() {
        let mut r = RngStream::new(8, 0).rng();
        let x = DMatrix::from_fn(12, 1, |_, _| r.uniform_in(0.0, 5.0));
        let y = DVector::from_fn(12, |i, _| x[(i, 0)].sin() + 0.05 * r.normal());
        let kcfg = KernelConfig::isotropic(1, 0.8, 1.1).unwrap();
        let noise = DVector::from_element(12, 0.01);
        let gp = ExactGp::condition(kcfg.clone(), x.clone(), &y, noise.clone(), 0.2).unwrap();
        let k = gram_sym(&kcfg, &x).unwrap();
        let direct = log_marginal(&k, &noise, &y, 0.2).unwrap();
        assert!((gp.log_marginal_likelihood() - direct).abs() < 1e-9);
    }

    #[test]
    fn fitted_gp_interpolates_smooth_function() {
        let mut r = RngStream::new(2, 0).rng();
        let x = DMatrix::from_fn(25, 1, |_, _| r.uniform_in(0.0, 6.0));
        let y = DVector::from_fn(25, |i, _| x[(i, 0)].sin());
        let (h, _) = fit_gp(&x, &y, &GpFitOptions::default()).unwrap();
        let gp = ExactGp::condition(h.kernel, x, &y, DVector::from_element(25, h.noise), y.mean()).unwrap();
        let xq = DMatrix::from_column_slice(3, 1, &[1.0, 2.5, 4.0]);
        let (m, v) = gp.predict(&xq).unwrap();
        for i in 0..3 {
            assert!((m[i] - xq[(i, 0)].sin()).abs() < 1e-2);
            assert!(v[i] > 0.0);
        }
    }
}
