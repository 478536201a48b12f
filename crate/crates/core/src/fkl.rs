//! Kernel ridge regression with an HSIC reward for dependence on a physical
//! model's outputs, and error-vs-dependence curves over candidate models.

use nalgebra::{DMatrix, DVector};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::kernel::{column_scales, gram, gram_sym, median_heuristic, KernelConfig};
use crate::linalg::Cholesky;
use crate::rng::RngStream;
use crate::stats::rmse;
use crate::synth::make_ocean_dataset;

/// Kernel used on one side of an HSIC estimate.
#[derive(Debug, Clone)]
pub enum HsicKernel {
    Linear,
    /// Linear kernel on inputs divided by the given scale.
    ScaledLinear(f64),
    Rbf(KernelConfig),
}

/// How the Gram over physical-model outputs is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitiveKernel {
    /// RBF with the median-heuristic lengthscale.
    MedianRbf,
    /// Linear kernel on the outputs scaled to unit standard deviation.
    StandardizedLinear,
}

impl SensitiveKernel {
    pub fn build(self, values: &[f64]) -> Result<HsicKernel> {
        match self {
            SensitiveKernel::MedianRbf => HsicKernel::median_rbf(values),
            SensitiveKernel::StandardizedLinear => {
                let sd = crate::stats::variance(values).sqrt();
                if !(sd > 0.0) {
                    return Err(Error::input("sensitive outputs are constant"));
                }
                Ok(HsicKernel::ScaledLinear(sd))
            }
        }
    }
}

impl HsicKernel {
    pub fn gram(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            HsicKernel::Linear => Ok(x * x.transpose()),
            HsicKernel::ScaledLinear(s) => Ok(x * x.transpose() / (s * s)),
            HsicKernel::Rbf(k) => gram_sym(k, x),
        }
    }

    /// RBF with the median-heuristic lengthscale on a 1-D sample.
    pub fn median_rbf(values: &[f64]) -> Result<Self> {
        Ok(HsicKernel::Rbf(KernelConfig::isotropic(1, median_heuristic(values), 1.0)?))
    }
}

/// `H K H` with `H = I − (1/n)·11ᵀ`.
pub fn center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / n as f64).collect();
    let all = row_means.iter().sum::<f64>() / n as f64;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + all)
}

/// `trace(K_a H K_b H) / (n − 1)²` from precomputed Grams.
pub fn hsic_gram(ka: &DMatrix<f64>, kb: &DMatrix<f64>) -> Result<f64> {
    let n = ka.nrows();
    if kb.nrows() != n || n < 2 {
        return Err(Error::input("hsic needs equal sample counts n >= 2"));
    }
    let ca = center(ka);
    let cb = center(kb);
    // trace(A H B H) = Σ_ij (HAH)_ij B_ij; centering one side is enough but both is symmetric.
    Ok(ca.component_mul(&cb).sum() / ((n - 1) as f64).powi(2))
}

/// HSIC between two samples with rows as observations.
pub fn hsic(a: &DMatrix<f64>, b: &DMatrix<f64>, k_a: &HsicKernel, k_b: &HsicKernel) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::input(format!("hsic: {} vs {} samples", a.nrows(), b.nrows())));
    }
    hsic_gram(&k_a.gram(a)?, &k_b.gram(b)?)
}

/// `HSIC(a, b) / sqrt(HSIC(a, a)·HSIC(b, b))`; 0 when either side is constant.
pub fn normalized_hsic(a: &DMatrix<f64>, b: &DMatrix<f64>, k_a: &HsicKernel, k_b: &HsicKernel) -> Result<f64> {
    let ga = k_a.gram(a)?;
    let gb = k_b.gram(b)?;
    let ab = hsic_gram(&ga, &gb)?;
    let aa = hsic_gram(&ga, &ga)?;
    let bb = hsic_gram(&gb, &gb)?;
    if aa <= 0.0 || bb <= 0.0 {
        return Ok(0.0);
    }
    Ok(ab / (aa * bb).sqrt())
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

#[derive(Debug, Clone)]
pub struct FklModel {
    pub alpha: DVector<f64>,
    pub k_in: KernelConfig,
    pub ridge: f64,
    pub dep_weight: f64,
    pub offset: f64,
    /// `H K_s H` over the training rows.
    pub sensitive_centered: DMatrix<f64>,
    inputs: DMatrix<f64>,
}

impl FklModel {
    pub fn predict(&self, xq: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok((gram(&self.k_in, xq, &self.inputs)? * &self.alpha).map(|v| v + self.offset))
    }

    /// `M = KᵀK + ridge·K − dep·K H K_s H K` at the stored weights.
    pub fn system_matrix(&self) -> Result<DMatrix<f64>> {
        let k = gram_sym(&self.k_in, &self.inputs)?;
        Ok(system_matrix(&k, &self.sensitive_centered, self.ridge, self.dep_weight))
    }
}

fn system_matrix(k: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64, dep: f64) -> DMatrix<f64> {
    let m = k.transpose() * k + ridge * k - dep * (k * b * k);
    0.5 * (&m + m.transpose())
}

/// Symmetric square root of a PSD matrix, negative eigenvalues clipped.
fn sqrt_psd(k: &DMatrix<f64>) -> DMatrix<f64> {
    let e = k.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// `M` is PD iff `K^½(I − dep·B)K^½ + ridge·I` is, which avoids squaring `K`.
fn is_admissible(k_half: &DMatrix<f64>, k: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64, dep: f64) -> bool {
    let n = k.nrows();
    let mut nmat = k - dep * (k_half * b * k_half);
    for i in 0..n {
        nmat[(i, i)] += ridge;
    }
    let nmat = 0.5 * (&nmat + nmat.transpose());
    Cholesky::new(&nmat, 0.0).is_ok()
}

/// Fits `α = M⁻¹Kᵀy` for the objective
/// `‖y − Kα‖² + ridge·αᵀKα − dep·(n−1)²·HSIC(Kα, s)` with a linear kernel on
/// the predictions, so the dependence reward is `dep·αᵀK H K_s H Kα`.
pub fn fkl_fit(
    train: &Dataset,
    sensitive: &[f64],
    k_in: &KernelConfig,
    k_s: &HsicKernel,
    ridge: f64,
    dep_weight: f64,
) -> Result<FklModel> {
    let n = train.len();
    if sensitive.len() != n {
        return Err(Error::input("sensitive outputs must match the training rows"));
    }
    if !(ridge > 0.0) || !(dep_weight >= 0.0) {
        return Err(Error::input("fkl needs ridge > 0 and dep_weight >= 0"));
    }
    let k = gram_sym(k_in, train.inputs())?;
    let s = DMatrix::from_column_slice(n, 1, sensitive);
    let b = center(&k_s.gram(&s)?);
    let k_half = sqrt_psd(&k);
    if dep_weight > 0.0 && !is_admissible(&k_half, &k, &b, ridge, dep_weight) {
        let (mut lo, mut hi) = (0.0, dep_weight);
        for _ in 0..8 {
            let mid = 0.5 * (lo + hi);
            if is_admissible(&k_half, &k, &b, ridge, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Err(Error::DependenceTooLarge { max_admissible: lo });
    }
    let offset = train.targets().mean();
    let y = train.targets().map(|v| v - offset);
    // M = K·A with A = K + ridge·I − dep·B K, and K is invertible, so Mα = Ky ⇔ Aα = y.
    let mut a = &k - dep_weight * (&b * &k);
    for i in 0..n {
        a[(i, i)] += ridge;
    }
    let alpha = a
        .lu()
        .solve(&y)
        .ok_or_else(|| Error::Numerical("singular dependence-regularized system".into()))?;
    Ok(FklModel {
        alpha,
        k_in: k_in.clone(),
        ridge,
        dep_weight,
        offset,
        sensitive_centered: b,
        inputs: train.inputs().clone(),
    })
}

/// Largest admissible dependence weight below `upper`, by `steps` bisections.
pub fn max_admissible_dep(train: &Dataset, sensitive: &[f64], k_in: &KernelConfig, k_s: &HsicKernel, ridge: f64, upper: f64, steps: usize) -> Result<f64> {
    let k = gram_sym(k_in, train.inputs())?;
    let b = center(&k_s.gram(&DMatrix::from_column_slice(sensitive.len(), 1, sensitive))?);
    let k_half = sqrt_psd(&k);
    if is_admissible(&k_half, &k, &b, ridge, upper) {
        return Ok(upper);
    }
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if is_admissible(&k_half, &k, &b, ridge, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Input kernel on column-standardized distances.
pub fn input_kernel(x: &DMatrix<f64>, multiplier: f64) -> Result<KernelConfig> {
    KernelConfig::new(column_scales(x, 1e-12).iter().map(|s| s * multiplier).collect(), 1.0)
}

/// One point of a consistency curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub model: usize,
    pub dep_weight: f64,
    pub rmse: f64,
    /// Normalized HSIC between test predictions (linear kernel) and the model outputs (RBF).
    pub hsic: f64,
    pub predictions: DVector<f64>,
}

/// Test RMSE and prediction dependence along `dep_grid` for each candidate
/// model; rows sorted by (model, dep_weight).
pub fn fkl_consistency_curve(
    train: &Dataset,
    test: &Dataset,
    sensitive_train: &[Vec<f64>],
    sensitive_test: &[Vec<f64>],
    dep_grid: &[f64],
    k_in: &KernelConfig,
    ridge: f64,
    sensitive_kernel: SensitiveKernel,
) -> Result<Vec<CurvePoint>> {
    if dep_grid.len() < 2 {
        return Err(Error::input("consistency curve needs at least two grid points"));
    }
    if sensitive_train.len() != sensitive_test.len() {
        return Err(Error::input("train and test sensitive model lists differ"));
    }
    let mut grid = dep_grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    let mut out = Vec::new();
    for (m, (s_tr, s_te)) in sensitive_train.iter().zip(sensitive_test).enumerate() {
        let k_s = sensitive_kernel.build(s_tr)?;
        for &dep in &grid {
            let model = fkl_fit(train, s_tr, k_in, &k_s, ridge, dep)?;
            let pred = model.predict(test.inputs())?;
            let h = normalized_hsic(&column(&pred), &DMatrix::from_column_slice(s_te.len(), 1, s_te), &HsicKernel::Linear, &k_s)?;
            out.push(CurvePoint {
                model: m,
                dep_weight: dep,
                rmse: rmse(pred.as_slice(), test.targets().as_slice()),
                hsic: h,
                predictions: pred,
            });
        }
    }
    Ok(out)
}

/// Dependence weight from `dep_grid` with the lowest K-fold RMSE on `train`.
pub fn tune_dep_weight(
    train: &Dataset,
    sensitive: &[f64],
    dep_grid: &[f64],
    k_in: &KernelConfig,
    ridge: f64,
    folds: usize,
    sensitive_kernel: SensitiveKernel,
) -> Result<f64> {
    let n = train.len();
    let k_s = sensitive_kernel.build(sensitive)?;
    let mut best = (f64::INFINITY, 0.0);
    for &dep in dep_grid {
        let mut total = 0.0;
        for f in 0..folds {
            let test_rows: Vec<usize> = (0..n).filter(|i| i % folds == f).collect();
            let train_rows: Vec<usize> = (0..n).filter(|i| i % folds != f).collect();
            let tr = train.select(&train_rows)?;
            let te = train.select(&test_rows)?;
            let s_tr: Vec<f64> = train_rows.iter().map(|&i| sensitive[i]).collect();
            let model = match fkl_fit(&tr, &s_tr, k_in, &k_s, ridge, dep) {
                Ok(m) => m,
                Err(Error::DependenceTooLarge { .. }) => {
                    total = f64::INFINITY;
                    break;
                }
                Err(e) => return Err(e),
            };
            total += rmse(model.predict(te.inputs())?.as_slice(), te.targets().as_slice());
        }
        if total < best.0 {
            best = (total, dep);
        }
    }
    Ok(best.1)
}

/// Settings for [`fkl_benchmark`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FklConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub target_sd: f64,
    pub ridge: f64,
    pub kernel_multiplier: f64,
    /// Grid as fractions of the smallest admissible weight across the four models.
    pub dep_fractions: Vec<f64>,
    pub folds: usize,
    /// Index of the generating model among the candidates.
    pub generating_model: usize,
    pub sensitive_kernel: SensitiveKernel,
}

impl Default for FklConfig {
    fn default() -> Self {
        Self {
            n_train: 30,
            n_test: 200,
            target_sd: 0.05,
            ridge: 2.0,
            kernel_multiplier: 1.0,
            dep_fractions: vec![0.0, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.95],
            folds: 30,
            generating_model: 3,
            sensitive_kernel: SensitiveKernel::StandardizedLinear,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FklBenchmark {
    pub curve: Vec<CurvePoint>,
    /// Minimum test RMSE along each model's curve.
    pub min_rmse: [f64; 4],
    pub dep_grid: Vec<f64>,
    pub tuned_dep: f64,
    pub rmse_zero: f64,
    pub rmse_tuned: f64,
}

impl FklBenchmark {
    /// Index of the model with the strictly lowest minimum RMSE, if unique.
    pub fn best_model(&self) -> Option<usize> {
        let (mut best, mut second) = ((usize::MAX, f64::INFINITY), f64::INFINITY);
        for (m, &v) in self.min_rmse.iter().enumerate() {
            if v < best.1 {
                second = best.1;
                best = (m, v);
            } else if v < second {
                second = v;
            }
        }
        (best.1 < second).then_some(best.0)
    }
}

/// One seed of the model-ranking experiment on the synthetic ocean-color data.
pub fn fkl_benchmark(rng: &RngStream, cfg: &FklConfig) -> Result<FklBenchmark> {
    if cfg.generating_model >= 4 || cfg.folds < 2 || cfg.dep_fractions.len() < 2 {
        return Err(Error::input("fkl benchmark needs a model index < 4, folds >= 2 and two grid points"));
    }
    if cfg.dep_fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
        return Err(Error::input("dependence fractions must lie in [0, 1)"));
    }
    let tr = make_ocean_dataset(&rng.child(0), cfg.n_train, cfg.target_sd)?;
    let te = make_ocean_dataset(&rng.child(1), cfg.n_test, cfg.target_sd)?;
    let train = Dataset::uniform(tr.inputs.clone(), tr.targets.clone(), Provenance::Real)?;
    let test = Dataset::uniform(te.inputs.clone(), te.targets.clone(), Provenance::Real)?;
    let k_in = input_kernel(train.inputs(), cfg.kernel_multiplier)?;
    let s_tr: Vec<Vec<f64>> = (0..4).map(|m| tr.model_outputs.column(m).iter().cloned().collect()).collect();
    let s_te: Vec<Vec<f64>> = (0..4).map(|m| te.model_outputs.column(m).iter().cloned().collect()).collect();
    let caps = s_tr
        .iter()
        .map(|s| max_admissible_dep(&train, s, &k_in, &cfg.sensitive_kernel.build(s)?, cfg.ridge, 1e3, 40))
        .collect::<Result<Vec<f64>>>()?;
    let cap = caps.iter().cloned().fold(f64::INFINITY, f64::min);
    let dep_grid: Vec<f64> = cfg.dep_fractions.iter().map(|f| f * cap).collect();
    let curve = fkl_consistency_curve(&train, &test, &s_tr, &s_te, &dep_grid, &k_in, cfg.ridge, cfg.sensitive_kernel)?;
    let mut min_rmse = [f64::INFINITY; 4];
    for p in &curve {
        min_rmse[p.model] = min_rmse[p.model].min(p.rmse);
    }
    let g = cfg.generating_model;
    let tune_grid: Vec<f64> = cfg.dep_fractions.iter().map(|f| f * caps[g]).collect();
    let tuned_dep = tune_dep_weight(&train, &s_tr[g], &tune_grid, &k_in, cfg.ridge, cfg.folds, cfg.sensitive_kernel)?;
    let k_s = cfg.sensitive_kernel.build(&s_tr[g])?;
    let score = |dep: f64| -> Result<f64> {
        let m = fkl_fit(&train, &s_tr[g], &k_in, &k_s, cfg.ridge, dep)?;
        Ok(rmse(m.predict(test.inputs())?.as_slice(), test.targets().as_slice()))
    };
    Ok(FklBenchmark {
        curve,
        min_rmse,
        rmse_zero: score(0.0)?,
        rmse_tuned: score(tuned_dep)?,
        tuned_dep,
        dep_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn hsic_constant_and_self() {
        let a = col(&[0.1, 0.7, -0.3, 1.2]);
        let c = col(&[2.0; 4]);
        let rbf = HsicKernel::Rbf(KernelConfig::isotropic(1, 1.0, 1.0).unwrap());
        assert!(hsic(&a, &c, &rbf, &rbf).unwrap().abs() < 1e-12);
        assert!(hsic(&a, &a, &rbf, &rbf).unwrap() > 0.0);
        assert!(hsic(&a, &col(&[1.0, 2.0]), &rbf, &rbf).is_err());
    }

    #[test]
    fn hsic_three_points_by_hand() {
        // Linear kernels: K_a = aaᵀ, K_b = bbᵀ, so trace(K_a H K_b H) = ((Ha)·b)².
        let a = [1.0, 2.0, 4.0];
        let b = [0.0, 1.0, 3.0];
        let ma = 7.0 / 3.0;
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * y).sum();
        let expected = cov * cov / 4.0;
        let got = hsic(&col(&a), &col(&b), &HsicKernel::Linear, &HsicKernel::Linear).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        // explicit 3×3 trace with RBF kernels
        let k = KernelConfig::isotropic(1, 1.5, 1.0).unwrap();
        let ka = gram_sym(&k, &col(&a)).unwrap();
        let kb = gram_sym(&k, &col(&b)).unwrap();
        let h = DMatrix::identity(3, 3) - DMatrix::from_element(3, 3, 1.0 / 3.0);
        let direct = (&ka * &h * &kb * &h).trace() / 4.0;
        let rbf = HsicKernel::Rbf(k);
        assert!((hsic(&col(&a), &col(&b), &rbf, &rbf).unwrap() - direct).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn hsic_nonnegative_and_joint_permutation_invariant(
            pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..15),
            rot in 0usize..15,
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let rbf = HsicKernel::Rbf(KernelConfig::isotropic(1, 1.0, 1.0).unwrap());
            let v = hsic(&col(&a), &col(&b), &rbf, &rbf).unwrap();
            prop_assert!(v >= -1e-12);
            let r = rot % a.len();
            let (mut ap, mut bp) = (a.clone(), b.clone());
            ap.rotate_left(r);
            bp.rotate_left(r);
            prop_assert!((hsic(&col(&ap), &col(&bp), &rbf, &rbf).unwrap() - v).abs() < 1e-12);
        }
    }

    fn toy(seed: u64, n: usize) -> (Dataset, Vec<f64>) {
        let mut r = RngStream::new(seed, 0).rng();
        let x = DMatrix::from_fn(n, 2, |_, _| r.uniform_in(-2.0, 2.0));
        let s: Vec<f64> = (0..n).map(|i| x[(i, 0)].sin()).collect();
        let y = DVector::from_fn(n, |i, _| s[i] + 0.2 * x[(i, 1)] + 0.1 * r.normal());
        (Dataset::uniform(x, y, Provenance::Real).unwrap(), s)
    }

    #[test]
    fn zero_dependence_is_kernel_ridge() {
        let (d, s) = toy(1, 30);
        let k_in = input_kernel(d.inputs(), 1.0).unwrap();
        let m = fkl_fit(&d, &s, &k_in, &HsicKernel::median_rbf(&s).unwrap(), 0.1, 0.0).unwrap();
        let k = gram(&k_in, d.inputs(), d.inputs()).unwrap();
        let off = d.targets().mean();
        let alpha = (k + DMatrix::identity(30, 30) * 0.1).lu().solve(&d.targets().map(|v| v - off)).unwrap();
        assert!((&m.alpha - alpha).abs().max() < 1e-8);
    }

    #[test]
    fn stationarity_residual_is_small() {
        let (d, s) = toy(2, 25);
        let k_in = input_kernel(d.inputs(), 1.0).unwrap();
        let k_s = HsicKernel::median_rbf(&s).unwrap();
        let m = fkl_fit(&d, &s, &k_in, &k_s, 0.1, 0.05).unwrap();
        let k = gram_sym(&k_in, d.inputs()).unwrap();
        let mm = m.system_matrix().unwrap();
        let rhs = k.transpose() * d.targets().map(|v| v - m.offset);
        let resid = (&mm * &m.alpha - &rhs).abs().max();
        assert!(resid <= 1e-8 * rhs.abs().max().max(1.0), "{resid}");
        // M is PD at an admissible weight
        assert!(mm.symmetric_eigen().eigenvalues.min() > -1e-10);
    }

    #[test]
    fn oversized_dependence_reports_admissible_bound() {
        let (d, s) = toy(3, 20);
        let k_in = input_kernel(d.inputs(), 1.0).unwrap();
        let k_s = HsicKernel::median_rbf(&s).unwrap();
        match fkl_fit(&d, &s, &k_in, &k_s, 0.1, 1e6) {
            Err(Error::DependenceTooLarge { max_admissible }) => {
                assert!(max_admissible < 1e6);
                if max_admissible > 0.0 {
                    assert!(fkl_fit(&d, &s, &k_in, &k_s, 0.1, max_admissible).is_ok());
                }
            }
            other => panic!("expected dependence error, got {other:?}"),
        }
    }

    #[test]
    fn independent_sensitive_barely_moves_heldout_dependence() {
        let mut small = 0;
        for seed in 0..20u64 {
            let (all, _) = toy(100 + seed, 80);
            let d = all.select(&(0..40).collect::<Vec<_>>()).unwrap();
            let t = all.select(&(40..80).collect::<Vec<_>>()).unwrap();
            let mut shuffled: Vec<f64> = all.targets().iter().cloned().collect();
            RngStream::new(seed, 5).rng().shuffle(&mut shuffled);
            let (s_tr, s_te) = shuffled.split_at(40);
            let k_in = input_kernel(d.inputs(), 1.0).unwrap();
            let k_s = HsicKernel::median_rbf(s_tr).unwrap();
            let cap = max_admissible_dep(&d, s_tr, &k_in, &k_s, 0.1, 10.0, 30).unwrap();
            let grid: Vec<f64> = [0.0, 0.01, 0.03, 0.1, 0.3, 0.5].iter().map(|f| f * cap).collect();
            let dep = tune_dep_weight(&d, s_tr, &grid, &k_in, 0.1, 5, SensitiveKernel::MedianRbf).unwrap();
            let h = |m: &FklModel| {
                let p = m.predict(t.inputs()).unwrap();
                normalized_hsic(&col(p.as_slice()), &col(s_te), &HsicKernel::Linear, &k_s).unwrap()
            };
            let h0 = h(&fkl_fit(&d, s_tr, &k_in, &k_s, 0.1, 0.0).unwrap());
            let h1 = h(&fkl_fit(&d, s_tr, &k_in, &k_s, 0.1, dep).unwrap());
            if ((h1 - h0) / h0).abs() < 0.1 {
                small += 1;
            }
        }
        assert!(small >= 16, "{small}/20");
    }

    #[test]
    fn curve_at_zero_is_shared_and_hsic_recomputes() {
        let (d, s) = toy(4, 30);
        let (t, st) = toy(5, 20);
        let k_in = input_kernel(d.inputs(), 1.0).unwrap();
        let sens_tr = vec![s.clone(), d.targets().iter().cloned().collect()];
        let sens_te = vec![st.clone(), t.targets().iter().cloned().collect()];
        let curve = fkl_consistency_curve(&d, &t, &sens_tr, &sens_te, &[0.01, 0.0], &k_in, 0.1, SensitiveKernel::MedianRbf).unwrap();
        assert_eq!(curve.len(), 4);
        assert_eq!(curve[0].dep_weight, 0.0);
        assert!((curve[0].rmse - curve[2].rmse).abs() < 1e-12);
        for p in &curve {
            let k_s = HsicKernel::median_rbf(&sens_tr[p.model]).unwrap();
            let again = normalized_hsic(&col(p.predictions.as_slice()), &col(&sens_te[p.model]), &HsicKernel::Linear, &k_s).unwrap();
            assert!((again - p.hsic).abs() < 1e-12);
        }
        assert!(fkl_consistency_curve(&d, &t, &sens_tr, &sens_te, &[0.0], &k_in, 0.1, SensitiveKernel::MedianRbf).is_err());
    }
}
