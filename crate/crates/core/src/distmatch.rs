//! Kernel ridge regression with a consistency term on simulated pairs and an
//! MMD penalty pulling the predictive distribution toward a reference sample.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{column_scales, gram, gram_sym, median_heuristic, KernelConfig};
use crate::stats::{mae, r2, rmse};

/// Biased V-statistic estimate of MMD².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdEstimate {
    pub value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

fn k1(k: &KernelConfig, a: f64, b: f64) -> f64 {
    let z = (a - b) / k.lengthscales[0];
    k.signal_variance * (-0.5 * z * z).exp()
}

fn mean_kernel(a: &[f64], b: &[f64], k: &KernelConfig) -> f64 {
    let mut s = 0.0;
    for &x in a {
        for &y in b {
            s += k1(k, x, y);
        }
    }
    s / (a.len() * b.len()) as f64
}

/// `mean(K_aa) − 2·mean(K_ab) + mean(K_bb)` with a 1-D kernel.
pub fn mmd(a: &[f64], b: &[f64], k: &KernelConfig) -> Result<MmdEstimate> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("mmd needs two nonempty samples"));
    }
    if k.dim() != 1 {
        return Err(Error::input("mmd needs a one-dimensional kernel"));
    }
    let value = mean_kernel(a, a, k) - 2.0 * mean_kernel(a, b, k) + mean_kernel(b, b, k);
    Ok(MmdEstimate {
        value,
        n_a: a.len(),
        n_b: b.len(),
    })
}

/// MMD² of `p` against `b` and its gradient with respect to `p`.
fn mmd_with_grad(p: &[f64], b: &[f64], kbb: f64, k: &KernelConfig) -> (f64, Vec<f64>) {
    let n = p.len() as f64;
    let m = b.len() as f64;
    let l2 = k.lengthscales[0].powi(2);
    let mut paa = p.len() as f64 * k.signal_variance;
    let mut pab = 0.0;
    let mut grad = vec![0.0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        for (j, &y) in p.iter().enumerate().skip(i + 1) {
            let v = k1(k, x, y);
            paa += 2.0 * v;
            let g = 2.0 / (n * n) * (-v * (x - y) / l2);
            grad[i] += g;
            grad[j] -= g;
        }
        let mut g = 0.0;
        for &y in b {
            let v = k1(k, x, y);
            pab += v;
            g -= 2.0 / (n * m) * (-v * (x - y) / l2);
        }
        grad[i] += g;
    }
    (paa / (n * n) - 2.0 * pab / (n * m) + kbb, grad)
}

/// Weights of the error, consistency and distribution terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub mu: f64,
    pub lambda: f64,
    pub nu: f64,
}

impl LossWeights {
    pub fn new(mu: f64, lambda: f64, nu: f64) -> Result<Self> {
        if [mu, lambda, nu].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::input("loss weights must be finite and nonnegative"));
        }
        if mu == 0.0 && lambda == 0.0 {
            return Err(Error::input("at least one of mu, lambda must be positive"));
        }
        Ok(Self { mu, lambda, nu })
    }
}

#[derive(Debug, Clone)]
pub struct MmdKrrOptions {
    /// Weight of the RKHS-norm penalty `αᵀKα`.
    pub ridge: f64,
    /// Maximum descent steps when `nu > 0`.
    pub steps: usize,
    /// Relative loss decrease below which descent stops.
    pub tol: f64,
}

impl Default for MmdKrrOptions {
    fn default() -> Self {
        Self {
            ridge: 1e-3,
            steps: 200,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MmdKrrModel {
    pub alpha: DVector<f64>,
    pub kernel_in: KernelConfig,
    pub kernel_out: KernelConfig,
    pub weights: LossWeights,
    pub offset: f64,
    /// Loss after the closed-form start and after every accepted step.
    pub loss_trace: Vec<f64>,
    basis: DMatrix<f64>,
}

impl MmdKrrModel {
    pub fn predict(&self, xq: &DMatrix<f64>) -> Result<DVector<f64>> {
        let k = gram(&self.kernel_in, xq, &self.basis)?;
        Ok((k * &self.alpha).map(|v| v + self.offset))
    }

    /// Predictions at the basis (training) inputs.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

/// Input kernel over column-standardized distances times `multiplier`.
pub fn input_kernel(x: &DMatrix<f64>, multiplier: f64) -> Result<KernelConfig> {
    KernelConfig::new(column_scales(x, 1e-12).iter().map(|s| s * multiplier).collect(), 1.0)
}

/// Output kernel with the median-heuristic lengthscale on `targets`.
pub fn output_kernel(targets: &[f64]) -> Result<KernelConfig> {
    KernelConfig::isotropic(1, median_heuristic(targets), 1.0)
}

struct Problem {
    k: DMatrix<f64>,
    n_real: usize,
    y_real: DVector<f64>,
    y_sim: DVector<f64>,
    w: LossWeights,
    ridge: f64,
}

impl Problem {
    fn quadratic(&self, alpha: &DVector<f64>) -> f64 {
        let n = self.k.nrows();
        let f = &self.k * alpha;
        let er = f.rows(0, self.n_real) - &self.y_real;
        let mut l = self.w.mu * er.norm_squared() + self.ridge * alpha.dot(&f);
        if self.w.lambda > 0.0 && n > self.n_real {
            let es = f.rows(self.n_real, n - self.n_real) - &self.y_sim;
            l += self.w.lambda * es.norm_squared();
        }
        l
    }
}

/// Minimizes `μ‖y_r − K_r α‖² + λ‖y_s − K_s α‖² + ridge·αᵀKα + ν·MMD²(Kα, ref)`.
///
/// The basis holds the real rows, plus the simulated rows whenever `λ > 0` or
/// `ν > 0`. Targets are centered on the real mean. With `ν = 0` the closed-form
/// minimizer is returned; otherwise descent starts there, steps along the
/// gradient preconditioned by the quadratic part, and backtracks until the
/// Armijo condition holds, so the loss never increases.
pub fn mmdkrr_fit(
    real: &Dataset,
    sim: &Dataset,
    ref_targets: &[f64],
    w: LossWeights,
    k_in: &KernelConfig,
    k_out: &KernelConfig,
    opts: &MmdKrrOptions,
) -> Result<MmdKrrModel> {
    if opts.steps < 1 {
        return Err(Error::input("steps must be at least 1"));
    }
    if w.nu > 0.0 && ref_targets.is_empty() {
        return Err(Error::input("distribution term needs a nonempty reference sample"));
    }
    let use_sim = w.lambda > 0.0 || w.nu > 0.0;
    let n_real = real.len();
    let basis = if use_sim {
        real.concat(sim)?.inputs().clone()
    } else {
        real.inputs().clone()
    };
    let n = basis.nrows();
    let offset = real.targets().mean();
    let k = gram_sym(k_in, &basis)?;
    let p = Problem {
        n_real,
        y_real: real.targets().map(|v| v - offset),
        y_sim: if use_sim { sim.targets().map(|v| v - offset) } else { DVector::zeros(0) },
        w,
        ridge: opts.ridge,
        k,
    };

    // Stationarity of the quadratic part is K·[(DK + ridge·I)α − D y] = 0 with
    // D = diag(μ on real rows, λ on simulated rows), so solve the bracket.
    let d = DVector::from_fn(n, |i, _| if i < n_real { w.mu } else { w.lambda });
    let mut a = DMatrix::from_fn(n, n, |i, j| d[i] * p.k[(i, j)]);
    for i in 0..n {
        a[(i, i)] += opts.ridge;
    }
    let lu = a.lu();
    let mut dy = DVector::zeros(n);
    dy.rows_mut(0, n_real).copy_from(&(w.mu * &p.y_real));
    if use_sim {
        dy.rows_mut(n_real, n - n_real).copy_from(&(w.lambda * &p.y_sim));
    }
    let mut alpha = lu
        .solve(&dy)
        .ok_or_else(|| Error::Numerical("singular kernel ridge system".into()))?;

    let kbb = if w.nu > 0.0 { mean_kernel(ref_targets, ref_targets, k_out) } else { 0.0 };
    // Gradient is K·h; h is returned so the preconditioned step avoids K⁻¹.
    let loss_and_h = |alpha: &DVector<f64>| -> (f64, DVector<f64>) {
        let f = &p.k * alpha;
        let mut h = 2.0 * (d.component_mul(&f) + opts.ridge * alpha - &dy);
        let mut loss = p.quadratic(alpha);
        if w.nu > 0.0 {
            let fo: Vec<f64> = f.iter().map(|v| v + offset).collect();
            let (m2, g) = mmd_with_grad(&fo, ref_targets, kbb, k_out);
            loss += w.nu * m2;
            h += w.nu * DVector::from_vec(g);
        }
        (loss, h)
    };
    let (mut loss, mut h) = loss_and_h(&alpha);
    if !loss.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            detail: "non-finite loss at the closed-form start".into(),
        });
    }
    let mut trace = vec![loss];
    if w.nu > 0.0 {
        for step in 1..=opts.steps {
            let Some(dir) = lu.solve(&h) else { break };
            let dir = -0.5 * dir;
            let slope = (&p.k * &h).dot(&dir);
            if !(slope < 0.0) {
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let cand = &alpha + t * &dir;
                let (l, hc) = loss_and_h(&cand);
                if !l.is_finite() && t < 1e-12 {
                    return Err(Error::Divergence {
                        step,
                        detail: "non-finite loss during line search".into(),
                    });
                }
                if l <= loss + 1e-4 * t * slope {
                    accepted = Some((cand, l, hc));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, l, hc)) = accepted else { break };
            let rel = (loss - l) / loss.abs().max(1e-300);
            alpha = cand;
            loss = l;
            trace.push(loss);
            if rel < opts.tol {
                break;
            }
            h = hc;
        }
    }
    Ok(MmdKrrModel {
        alpha,
        kernel_in: k_in.clone(),
        kernel_out: k_out.clone(),
        weights: w,
        offset,
        loss_trace: trace,
        basis,
    })
}

/// Interleaved fold assignment: row `i` goes to fold `i % k`.
pub fn kfold_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    for i in 0..n {
        folds[i % k].push(i);
    }
    folds
}

fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !fold.contains(i)).collect()
}

/// Out-of-fold predictions on the real rows for one weight setting.
pub fn cv_predictions(
    real: &Dataset,
    sim: &Dataset,
    ref_targets: &[f64],
    w: LossWeights,
    k_in: &KernelConfig,
    k_out: &KernelConfig,
    opts: &MmdKrrOptions,
    folds: usize,
) -> Result<DVector<f64>> {
    let n = real.len();
    let mut out = DVector::zeros(n);
    for fold in kfold_indices(n, folds) {
        if fold.len() < 2 || n - fold.len() < 2 {
            return Err(Error::input("each fold needs at least two rows on both sides"));
        }
        let train = real.select(&complement(n, &fold))?;
        let test = real.select(&fold)?;
        let model = mmdkrr_fit(&train, sim, ref_targets, w, k_in, k_out, opts)?;
        let pred = model.predict(test.inputs())?;
        for (j, &i) in fold.iter().enumerate() {
            out[i] = pred[j];
        }
    }
    Ok(out)
}

/// Grid point with the lowest mean K-fold RMSE on the real rows.
///
/// Ties go to the smaller `nu`, then the smaller `lambda`.
pub fn mmdkrr_grid_search(
    real: &Dataset,
    sim: &Dataset,
    ref_targets: &[f64],
    grid: &[LossWeights],
    k_in: &KernelConfig,
    k_out: &KernelConfig,
    opts: &MmdKrrOptions,
    folds: usize,
) -> Result<(LossWeights, f64)> {
    if grid.is_empty() {
        return Err(Error::input("grid search needs at least one grid point"));
    }
    let n = real.len();
    let mut best: Option<(LossWeights, f64)> = None;
    for &w in grid {
        let mut total = 0.0;
        for fold in kfold_indices(n, folds) {
            if fold.len() < 2 || n - fold.len() < 2 {
                return Err(Error::input("each fold needs at least two rows on both sides"));
            }
            let train = real.select(&complement(n, &fold))?;
            let test = real.select(&fold)?;
            let model = mmdkrr_fit(&train, sim, ref_targets, w, k_in, k_out, opts)?;
            total += rmse(model.predict(test.inputs())?.as_slice(), test.targets().as_slice());
        }
        let score = total / folds as f64;
        let better = match best {
            None => true,
            Some((bw, bs)) => {
                score < bs - 1e-12 * bs.abs()
                    || ((score - bs).abs() <= 1e-12 * bs.abs() && (w.nu, w.lambda) < (bw.nu, bw.lambda))
            }
        };
        if better {
            best = Some((w, score));
        }
    }
    Ok(best.unwrap())
}

/// Settings for [`distmatch_benchmark`].
#[derive(Debug, Clone)]
pub struct DistmatchConfig {
    pub folds: usize,
    pub lambda_grid: Vec<f64>,
    pub nu_grid: Vec<f64>,
    pub kernel_multiplier: f64,
    pub fit: MmdKrrOptions,
    pub n_bins: usize,
}

impl Default for DistmatchConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            lambda_grid: vec![0.1, 1.0],
            nu_grid: vec![0.0, 1e3, 1e4],
            kernel_multiplier: 1.0,
            fit: MmdKrrOptions {
                ridge: 1e-2,
                ..MmdKrrOptions::default()
            },
            n_bins: 20,
        }
    }
}

pub const DISTMATCH_MODELS: [&str; 3] = ["KRR_R", "KRR_R+S", "KRR-MMD"];

#[derive(Debug, Clone)]
pub struct DistmatchResult {
    /// `(r2, rmse, mae)` per model in [`DISTMATCH_MODELS`] order.
    pub scores: [(f64, f64, f64); 3],
    /// Out-of-fold predictions per model.
    pub predictions: [DVector<f64>; 3],
    /// Weights picked by the inner search in each outer fold, per model.
    pub selected: [Vec<LossWeights>; 3],
    /// MMD² of full-data predictions against the reference at `nu = 0` and at the largest grid `nu`.
    pub mmd_nu0: f64,
    pub mmd_nu: f64,
    /// `(lo, hi, counts_real, counts_krr, counts_mmd)`.
    pub histograms: (f64, f64, Vec<usize>, Vec<usize>, Vec<usize>),
}

/// Nested cross-validation of real-only, real+simulated and MMD-penalized KRR.
///
/// The outer folds score the models; inside each, the weights are picked by
/// [`mmdkrr_grid_search`] on the outer training rows. The reference sample is
/// the simulated targets.
pub fn distmatch_benchmark(real: &Dataset, sim: &Dataset, cfg: &DistmatchConfig) -> Result<DistmatchResult> {
    let ref_targets = sim.targets().as_slice().to_vec();
    let pooled = real.concat(sim)?;
    let k_in = input_kernel(pooled.inputs(), cfg.kernel_multiplier)?;
    let k_out = output_kernel(&ref_targets)?;
    let grids: [Vec<LossWeights>; 3] = [
        vec![LossWeights::new(1.0, 0.0, 0.0)?],
        cfg.lambda_grid.iter().map(|&l| LossWeights::new(1.0, l, 0.0)).collect::<Result<_>>()?,
        cfg.lambda_grid
            .iter()
            .flat_map(|&l| cfg.nu_grid.iter().map(move |&v| LossWeights::new(1.0, l, v)))
            .collect::<Result<_>>()?,
    ];
    let n = real.len();
    let mut predictions = [DVector::zeros(n), DVector::zeros(n), DVector::zeros(n)];
    let mut selected: [Vec<LossWeights>; 3] = Default::default();
    for fold in kfold_indices(n, cfg.folds) {
        if fold.len() < 2 {
            return Err(Error::input("each outer fold needs at least two rows"));
        }
        let train = real.select(&complement(n, &fold))?;
        let test = real.select(&fold)?;
        for (mi, grid) in grids.iter().enumerate() {
            let (w, _) = if grid.len() == 1 {
                (grid[0], 0.0)
            } else {
                mmdkrr_grid_search(&train, sim, &ref_targets, grid, &k_in, &k_out, &cfg.fit, cfg.folds)?
            };
            selected[mi].push(w);
            let model = mmdkrr_fit(&train, sim, &ref_targets, w, &k_in, &k_out, &cfg.fit)?;
            let pred = model.predict(test.inputs())?;
            for (j, &i) in fold.iter().enumerate() {
                predictions[mi][i] = pred[j];
            }
        }
    }
    let truth = real.targets().as_slice();
    let scores = [0, 1, 2].map(|i| {
        let p = predictions[i].as_slice();
        (r2(p, truth), rmse(p, truth), mae(p, truth))
    });

    let lambda = cfg.lambda_grid.iter().cloned().fold(0.0, f64::max);
    let nu = cfg.nu_grid.iter().cloned().fold(0.0, f64::max);
    let fit_at = |nu: f64| -> Result<f64> {
        let m = mmdkrr_fit(real, sim, &ref_targets, LossWeights::new(1.0, lambda, nu)?, &k_in, &k_out, &cfg.fit)?;
        let f = m.predict(m.basis())?;
        Ok(mmd(f.as_slice(), &ref_targets, &k_out)?.value)
    };
    let mmd_nu0 = fit_at(0.0)?;
    let mmd_nu = fit_at(nu)?;

    let lo = truth.iter().chain(ref_targets.iter()).cloned().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().chain(ref_targets.iter()).cloned().fold(f64::NEG_INFINITY, f64::max);
    let hist = |xs: &[f64]| crate::stats::histogram(xs, lo, hi, cfg.n_bins);
    let histograms = (
        lo,
        hi,
        hist(truth),
        hist(predictions[0].as_slice()),
        hist(predictions[2].as_slice()),
    );
    Ok(DistmatchResult {
        scores,
        predictions,
        selected,
        mmd_nu0,
        mmd_nu,
        histograms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;
    use crate::linalg::max_abs;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn rbf1() -> KernelConfig {
        KernelConfig::isotropic(1, 1.0, 1.0).unwrap()
    }

    fn toy(seed: u64, n: usize, shift: f64, tag: Provenance) -> Dataset {
        let mut r = RngStream::new(seed, 0).rng();
        let x = DMatrix::from_fn(n, 2, |_, _| r.uniform_in(-2.0, 2.0));
        let y = DVector::from_fn(n, |i, _| (x[(i, 0)]).sin() + 0.3 * x[(i, 1)] + shift + 0.05 * r.normal());
        Dataset::uniform(x, y, tag).unwrap()
    }

    #[test]
    fn mmd_hand_values() {
        assert!(mmd(&[0.0], &[0.0], &rbf1()).unwrap().value.abs() < 1e-12);
        let a = [0.3, -1.0, 2.0];
        assert!(mmd(&a, &a, &rbf1()).unwrap().value.abs() < 1e-12);
        // a = {0, 1}, b = {2}: K_aa = [1, e^-½; e^-½, 1], K_ab = [e^-2, e^-½], K_bb = 1.
        let h = (-0.5f64).exp();
        let expected = (2.0 + 2.0 * h) / 4.0 - 2.0 * ((-2.0f64).exp() + h) / 2.0 + 1.0;
        assert!((mmd(&[0.0, 1.0], &[2.0], &rbf1()).unwrap().value - expected).abs() < 1e-14);
        assert!(mmd(&[], &[1.0], &rbf1()).is_err());
    }

    proptest! {
        #[test]
        fn mmd_symmetric_and_permutation_invariant(
            a in prop::collection::vec(-3.0f64..3.0, 1..12),
            b in prop::collection::vec(-3.0f64..3.0, 1..12),
        ) {
            let k = rbf1();
            let ab = mmd(&a, &b, &k).unwrap().value;
            let ba = mmd(&b, &a, &k).unwrap().value;
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab >= -1e-12);
            let mut ar = a.clone();
            ar.reverse();
            prop_assert!((mmd(&ar, &b, &k).unwrap().value - ab).abs() < 1e-12);
        }
    }

    #[test]
    fn mmd_gradient_matches_finite_differences() {
        let k = KernelConfig::isotropic(1, 0.7, 1.0).unwrap();
        let p = [0.1, 0.8, -0.4, 1.5];
        let b = [0.0, 0.5, 2.0];
        let kbb = mean_kernel(&b, &b, &k);
        let (v, g) = mmd_with_grad(&p, &b, kbb, &k);
        assert!((v - mmd(&p, &b, &k).unwrap().value).abs() < 1e-14);
        for i in 0..p.len() {
            let mut q = p;
            q[i] += 1e-6;
            let mut s = p;
            s[i] -= 1e-6;
            let fd = (mmd_with_grad(&q, &b, kbb, &k).0 - mmd_with_grad(&s, &b, kbb, &k).0) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8, "{fd} vs {}", g[i]);
        }
    }

    #[test]
    fn closed_form_matches_dense_normal_equations() {
        let real = toy(1, 15, 0.0, Provenance::Real);
        let sim = toy(2, 20, 0.2, Provenance::Simulated);
        let k_in = input_kernel(real.inputs(), 1.0).unwrap();
        let w = LossWeights::new(1.0, 0.5, 0.0).unwrap();
        let opts = MmdKrrOptions {
            ridge: 1e-2,
            ..Default::default()
        };
        let m = mmdkrr_fit(&real, &sim, &[], w, &k_in, &rbf1(), &opts).unwrap();
        // oracle: dense LU solve of the stationarity equations
        let pooled = real.concat(&sim).unwrap();
        let k = gram(&k_in, pooled.inputs(), pooled.inputs()).unwrap();
        let off = real.targets().mean();
        let kr = k.rows(0, 15).into_owned();
        let ks = k.rows(15, 20).into_owned();
        let a = kr.transpose() * &kr + 0.5 * ks.transpose() * &ks + 1e-2 * &k;
        let b = kr.transpose() * real.targets().map(|v| v - off) + 0.5 * ks.transpose() * sim.targets().map(|v| v - off);
        let alpha = a.lu().solve(&b).unwrap();
        let xq = toy(3, 10, 0.0, Provenance::Real).inputs().clone();
        let oracle = (gram(&k_in, &xq, pooled.inputs()).unwrap() * alpha).map(|v| v + off);
        let got = m.predict(&xq).unwrap();
        assert!(max_abs(&DMatrix::from_column_slice(10, 1, (got - oracle).as_slice())) < 1e-8);
    }

    #[test]
    fn real_only_reduces_to_kernel_ridge() {
        let real = toy(4, 12, 0.0, Provenance::Real);
        let sim = toy(5, 8, 0.0, Provenance::Simulated);
        let k_in = input_kernel(real.inputs(), 1.0).unwrap();
        let opts = MmdKrrOptions {
            ridge: 0.05,
            ..Default::default()
        };
        let m = mmdkrr_fit(&real, &sim, &[], LossWeights::new(2.0, 0.0, 0.0).unwrap(), &k_in, &rbf1(), &opts).unwrap();
        let k = gram(&k_in, real.inputs(), real.inputs()).unwrap();
        let off = real.targets().mean();
        let alpha = (k + DMatrix::identity(12, 12) * (0.05 / 2.0)).lu().solve(&real.targets().map(|v| v - off)).unwrap();
        let xq = toy(6, 6, 0.0, Provenance::Real).inputs().clone();
        let oracle = (gram(&k_in, &xq, real.inputs()).unwrap() * alpha).map(|v| v + off);
        assert!((m.predict(&xq).unwrap() - oracle).abs().max() < 1e-8);
    }

    #[test]
    fn tiny_ridge_interpolates() {
        let real = toy(7, 10, 0.0, Provenance::Real);
        let k_in = input_kernel(real.inputs(), 1.0).unwrap();
        let opts = MmdKrrOptions {
            ridge: 1e-9,
            ..Default::default()
        };
        let m = mmdkrr_fit(&real, &real, &[], LossWeights::new(1.0, 0.0, 0.0).unwrap(), &k_in, &rbf1(), &opts).unwrap();
        let p = m.predict(real.inputs()).unwrap();
        assert!((p - real.targets()).abs().max() < 1e-4);
    }

    #[test]
    fn descent_never_increases_loss_and_shrinks_mmd() {
        let real = toy(8, 20, 0.0, Provenance::Real);
        let sim = toy(9, 30, 1.0, Provenance::Simulated);
        let refs = sim.targets().as_slice().to_vec();
        let k_in = input_kernel(real.inputs(), 1.0).unwrap();
        let k_out = output_kernel(&refs).unwrap();
        let opts = MmdKrrOptions::default();
        let base = mmdkrr_fit(&real, &sim, &refs, LossWeights::new(1.0, 0.1, 0.0).unwrap(), &k_in, &k_out, &opts).unwrap();
        let pen = mmdkrr_fit(&real, &sim, &refs, LossWeights::new(1.0, 0.1, 50.0).unwrap(), &k_in, &k_out, &opts).unwrap();
        assert!(pen.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(pen.loss_trace.len() > 1);
        let d = |m: &MmdKrrModel| mmd(m.predict(m.basis()).unwrap().as_slice(), &refs, &k_out).unwrap().value;
        assert!(d(&pen) < d(&base));
    }

    #[test]
    fn grid_search_single_point_and_ties() {
        let real = toy(10, 15, 0.0, Provenance::Real);
        let sim = toy(11, 10, 0.0, Provenance::Simulated);
        let k_in = input_kernel(real.inputs(), 1.0).unwrap();
        let w = LossWeights::new(1.0, 0.3, 0.0).unwrap();
        let opts = MmdKrrOptions::default();
        let (best, _) = mmdkrr_grid_search(&real, &sim, &[], &[w], &k_in, &rbf1(), &opts, 5).unwrap();
        assert_eq!(best, w);
        // identical points: the earlier one with smaller lambda wins
        let w2 = LossWeights::new(1.0, 0.3, 0.0).unwrap();
        let (best, _) = mmdkrr_grid_search(&real, &sim, &[], &[w2, w], &k_in, &rbf1(), &opts, 5).unwrap();
        assert_eq!(best, w2);
        assert!(mmdkrr_grid_search(&real, &sim, &[], &[], &k_in, &rbf1(), &opts, 5).is_err());
        let tiny = toy(12, 6, 0.0, Provenance::Real);
        assert!(mmdkrr_grid_search(&tiny, &sim, &[], &[w], &k_in, &rbf1(), &opts, 5).is_err());
    }

    #[test]
    fn noise_simulations_select_smallest_lambda() {
        let mut hits = 0;
        for seed in 0..20u64 {
            let real = toy(100 + seed, 25, 0.0, Provenance::Real);
            let mut r = RngStream::new(seed, 9).rng();
            let junk = Dataset::uniform(
                toy(200 + seed, 25, 0.0, Provenance::Simulated).inputs().clone(),
                DVector::from_fn(25, |_, _| 2.0 * r.normal()),
                Provenance::Simulated,
            )
            .unwrap();
            let k_in = input_kernel(real.inputs(), 1.0).unwrap();
            let grid: Vec<LossWeights> = [0.01, 0.3, 1.0].iter().map(|&l| LossWeights::new(1.0, l, 0.0).unwrap()).collect();
            let (best, _) = mmdkrr_grid_search(&real, &junk, &[], &grid, &k_in, &rbf1(), &MmdKrrOptions::default(), 5).unwrap();
            if best.lambda == 0.01 {
                hits += 1;
            }
        }
        assert!(hits >= 16, "{hits}/20");
    }
}
