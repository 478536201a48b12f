//! Joint GP over pooled real and simulated rows with a learned fidelity weight.
//!
//! Simulated rows get noise `noise_real / max(w, 1e-12)`; hyperparameters
//! maximize the leave-one-out log density of the real rows only.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gp::{fit_gp, gaussian_log_density, ExactGp, GpFitOptions};
use crate::kernel::{column_scales, gram_sym, KernelConfig};
use crate::linalg::Cholesky;
use crate::optim::multi_start;
use crate::stats::rmse;

pub const FIDELITY_FLOOR: f64 = 1e-12;
pub const MAX_POOLED_ROWS: usize = 2000;

/// Noise variance assigned to simulated rows.
pub fn sim_noise(noise_real: f64, fidelity_w: f64) -> f64 {
    noise_real / fidelity_w.max(FIDELITY_FLOOR)
}

#[derive(Debug, Clone)]
pub struct JgpOptions {
    pub budget: usize,
    pub starts: usize,
}

impl Default for JgpOptions {
    fn default() -> Self {
        Self { budget: 2000, starts: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct JgpModel {
    pub kernel: KernelConfig,
    pub noise_real: f64,
    pub fidelity_w: f64,
    /// Sum of real-row leave-one-out log densities at the fitted hyperparameters.
    pub pseudo_likelihood: f64,
    /// Objective at each multi-start initial point.
    pub start_objectives: Vec<f64>,
    gp: ExactGp,
    train: Dataset,
}

fn pooled(real: &Dataset, sim: Option<&Dataset>) -> Result<Dataset> {
    match sim {
        Some(s) => real.concat(s),
        None => Ok(real.clone()),
    }
}

fn noise_vector(n_real: usize, n_sim: usize, noise_real: f64, w: f64) -> DVector<f64> {
    let ns = sim_noise(noise_real, w);
    DVector::from_fn(n_real + n_sim, |i, _| if i < n_real { noise_real } else { ns })
}

/// Sum over the first `n_real` rows of the log leave-one-out predictive density.
///
/// Only the real rows of `C⁻¹` are formed.
pub fn real_pseudo_likelihood(k: &DMatrix<f64>, noise: &DVector<f64>, y: &DVector<f64>, n_real: usize) -> Result<f64> {
    let n = k.nrows();
    let mut c = k.clone();
    for i in 0..n {
        c[(i, i)] += noise[i];
    }
    let chol = Cholesky::new(&c, 0.0)?;
    let a = chol.solve_vec(y);
    let l = chol.l();
    let mut total = 0.0;
    let mut z = vec![0.0; n];
    for i in 0..n_real {
        // [C⁻¹]_ii = ‖L⁻¹ e_i‖²; L⁻¹ e_i vanishes above row i.
        z[i] = 1.0 / l[(i, i)];
        let mut d = z[i] * z[i];
        for r in (i + 1)..n {
            let mut s = 0.0;
            for q in i..r {
                s -= l[(r, q)] * z[q];
            }
            z[r] = s / l[(r, r)];
            d += z[r] * z[r];
        }
        let mean = y[i] - a[i] / d;
        total += gaussian_log_density(y[i], mean, 1.0 / d);
    }
    Ok(total)
}

impl JgpModel {
    /// Conditions a joint GP at fixed hyperparameters.
    pub fn with_hyperparameters(
        real: &Dataset,
        sim: Option<&Dataset>,
        kernel: KernelConfig,
        noise_real: f64,
        fidelity_w: f64,
    ) -> Result<Self> {
        if !(noise_real > 0.0) || !(0.0..=1.0).contains(&fidelity_w) {
            return Err(Error::input("joint GP needs noise_real > 0 and fidelity_w in [0, 1]"));
        }
        let train = pooled(real, sim)?;
        if train.len() > MAX_POOLED_ROWS {
            return Err(Error::input(format!("pooled rows {} exceed {MAX_POOLED_ROWS}", train.len())));
        }
        let n_real = real.len();
        let noise = noise_vector(n_real, train.len() - n_real, noise_real, fidelity_w);
        let offset = real.targets().mean();
        let k = gram_sym(&kernel, train.inputs())?;
        let pl = real_pseudo_likelihood(&k, &noise, &train.targets().map(|v| v - offset), n_real)?;
        let gp = ExactGp::condition(kernel.clone(), train.inputs().clone(), train.targets(), noise, offset)?;
        Ok(Self {
            kernel,
            noise_real,
            fidelity_w,
            pseudo_likelihood: pl,
            start_objectives: Vec::new(),
            gp,
            train,
        })
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn dual_weights(&self) -> &DVector<f64> {
        self.gp.weights()
    }

    pub fn noise_diagonal(&self) -> &DVector<f64> {
        self.gp.noise()
    }
}

/// Fits kernel, real noise and fidelity weight by real-row pseudo-likelihood.
pub fn jgp_fit(real: &Dataset, sim: Option<&Dataset>, opts: &JgpOptions) -> Result<JgpModel> {
    if real.len() < 5 {
        return Err(Error::input("joint GP needs at least 5 real rows"));
    }
    if let Some(s) = sim {
        if s.dim() != real.dim() {
            return Err(Error::input("real and simulated inputs differ in dimension"));
        }
    }
    let train = pooled(real, sim)?;
    if train.len() > MAX_POOLED_ROWS {
        return Err(Error::input(format!("pooled rows {} exceed {MAX_POOLED_ROWS}", train.len())));
    }
    let n_real = real.len();
    let n_sim = train.len() - n_real;
    let offset = real.targets().mean();
    let yvar = real.targets().iter().map(|v| (v - offset).powi(2)).sum::<f64>() / n_real as f64;
    if !(yvar > 0.0) {
        return Err(Error::Fit("real targets have zero variance".into()));
    }
    let y = train.targets().map(|v| v - offset);
    let base = column_scales(train.inputs(), 1e-12);

    let unpack = |p: &[f64]| -> Result<(KernelConfig, f64, f64)> {
        let m = p[0].clamp(-8.0, 8.0).exp();
        let kernel = KernelConfig::new(base.iter().map(|b| b * m).collect(), yvar * p[1].clamp(-10.0, 10.0).exp())?;
        let noise = yvar * (1e-10 + p[2].clamp(-25.0, 5.0).exp());
        let w = 1.0 / (1.0 + (-p[3].clamp(-40.0, 40.0)).exp());
        Ok((kernel, noise, w))
    };
    let mut objective = |p: &[f64]| -> f64 {
        let Ok((kernel, noise, w)) = unpack(p) else { return f64::INFINITY };
        let Ok(k) = gram_sym(&kernel, train.inputs()) else { return f64::INFINITY };
        match real_pseudo_likelihood(&k, &noise_vector(n_real, n_sim, noise, w), &y, n_real) {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };
    let grid_ls = [0.0, -1.0, 1.0, -2.0];
    let grid_noise = [-4.0, -8.0];
    let grid_w = [0.0, -4.0, 4.0, -8.0];
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|s| {
            vec![
                grid_ls[s % grid_ls.len()],
                0.0,
                grid_noise[(s / 2) % grid_noise.len()],
                if n_sim == 0 { 0.0 } else { grid_w[s % grid_w.len()] },
            ]
        })
        .collect();
    let res = multi_start(&mut objective, &starts, 1.0, opts.budget, 1e-10);
    if !res.value.is_finite() {
        return Err(Error::Fit("pseudo-likelihood not finite at any start".into()));
    }
    let (kernel, noise, w) = unpack(&res.x)?;
    let mut model = JgpModel::with_hyperparameters(real, sim, kernel, noise, w)?;
    model.start_objectives = res.start_values.iter().map(|v| -v).collect();
    Ok(model)
}

/// Predictive mean and variance of a new real observation.
pub fn jgp_predict(m: &JgpModel, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let (mean, var) = m.gp.predict(xq)?;
    Ok((mean, var.map(|v| v + m.noise_real)))
}

pub const BENCHMARK_METHODS: [&str; 4] = ["GP_R", "GP_S", "GP_R+S", "JGP"];

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    /// RMSE per method, in [`BENCHMARK_METHODS`] order.
    pub rmse: [f64; 4],
    /// Test predictions per method, same order.
    pub predictions: [DVector<f64>; 4],
    pub fidelity_w: f64,
}

fn plain_gp(train: &Dataset, opts: &GpFitOptions) -> Result<ExactGp> {
    let (h, _) = fit_gp(train.inputs(), train.targets(), opts)?;
    let n = train.len();
    ExactGp::condition(
        h.kernel,
        train.inputs().clone(),
        train.targets(),
        DVector::from_element(n, h.noise),
        train.targets().mean(),
    )
}

/// Real-only, simulated-only, naive pooled and joint GP, scored on `test`.
pub fn jgp_benchmark(real: &Dataset, sim: &Dataset, test: &Dataset, opts: &JgpOptions) -> Result<BenchmarkResult> {
    let gp_opts = GpFitOptions {
        budget: (opts.budget / 2).max(100),
        starts: 3,
        ..GpFitOptions::default()
    };
    let xq = test.inputs();
    let truth = test.targets().as_slice();
    let p_r = plain_gp(real, &gp_opts)?.predict_mean(xq)?;
    let p_s = plain_gp(sim, &gp_opts)?.predict_mean(xq)?;
    let p_rs = plain_gp(&real.concat(sim)?, &gp_opts)?.predict_mean(xq)?;
    let jgp = jgp_fit(real, Some(sim), opts)?;
    let (p_j, _) = jgp_predict(&jgp, xq)?;
    let predictions = [p_r, p_s, p_rs, p_j];
    let rmse = [0, 1, 2, 3].map(|i| rmse(predictions[i].as_slice(), truth));
    Ok(BenchmarkResult {
        rmse,
        predictions,
        fidelity_w: jgp.fidelity_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;
    use crate::gp::loo_predictive;
    use crate::rng::RngStream;

    fn toy(seed: u64, n: usize, noise_sd: f64, tag: Provenance) -> Dataset {
        let mut r = RngStream::new(seed, 0).rng();
        let x = DMatrix::from_fn(n, 2, |_, _| r.uniform_in(-2.0, 2.0));
        let y = DVector::from_fn(n, |i, _| (x[(i, 0)]).sin() + 0.5 * x[(i, 1)] + noise_sd * r.normal());
        Dataset::uniform(x, y, tag).unwrap()
    }

    #[test]
    fn pseudo_likelihood_matches_generic_loo() {
        let real = toy(1, 12, 0.1, Provenance::Real);
        let sim = toy(2, 9, 0.0, Provenance::Simulated);
        let pooled = real.concat(&sim).unwrap();
        let kcfg = KernelConfig::new(vec![0.9, 1.4], 1.2).unwrap();
        let k = gram_sym(&kcfg, pooled.inputs()).unwrap();
        let noise = noise_vector(12, 9, 0.02, 0.3);
        let y = pooled.targets().clone();
        let (m, v) = loo_predictive(&k, &noise, &y).unwrap();
        let oracle: f64 = (0..12).map(|i| gaussian_log_density(y[i], m[i], v[i])).sum();
        let fast = real_pseudo_likelihood(&k, &noise, &y, 12).unwrap();
        assert!((fast - oracle).abs() < 1e-9 * oracle.abs().max(1.0));
    }

    #[test]
    fn empty_sim_matches_plain_gp() {
        let real = toy(3, 15, 0.05, Provenance::Real);
        let kcfg = KernelConfig::new(vec![1.0, 1.0], 0.8).unwrap();
        let m = JgpModel::with_hyperparameters(&real, None, kcfg.clone(), 0.01, 0.5).unwrap();
        let gp = ExactGp::condition(kcfg, real.inputs().clone(), real.targets(), DVector::from_element(15, 0.01), real.targets().mean())
            .unwrap();
        let xq = toy(4, 7, 0.0, Provenance::Real).inputs().clone();
        let (a, _) = jgp_predict(&m, &xq).unwrap();
        let (b, _) = gp.predict(&xq).unwrap();
        assert!((a - b).abs().max() < 1e-8);
    }

    #[test]
    fn vanishing_fidelity_recovers_real_only_gp() {
        let real = toy(5, 15, 0.05, Provenance::Real);
        let sim = toy(6, 20, 0.0, Provenance::Simulated);
        let kcfg = KernelConfig::new(vec![1.0, 1.0], 0.8).unwrap();
        let joint = JgpModel::with_hyperparameters(&real, Some(&sim), kcfg.clone(), 0.01, 1e-10).unwrap();
        let alone = JgpModel::with_hyperparameters(&real, None, kcfg, 0.01, 0.5).unwrap();
        let xq = toy(7, 10, 0.0, Provenance::Real).inputs().clone();
        let (a, _) = jgp_predict(&joint, &xq).unwrap();
        let (b, _) = jgp_predict(&alone, &xq).unwrap();
        assert!((a - b).abs().max() < 1e-6);
    }

    #[test]
    fn fit_never_worse_than_starts_and_variances_positive() {
        let real = toy(8, 15, 0.05, Provenance::Real);
        let sim = toy(9, 20, 0.0, Provenance::Simulated);
        let m = jgp_fit(&real, Some(&sim), &JgpOptions { budget: 400, starts: 4 }).unwrap();
        assert!(m.start_objectives.iter().all(|&s| m.pseudo_likelihood >= s - 1e-9));
        let mut xq = toy(10, 5, 0.0, Provenance::Real).inputs().clone();
        xq[(0, 0)] = 50.0;
        let (mean, var) = jgp_predict(&m, &xq).unwrap();
        assert!(var.iter().all(|v| *v > 0.0));
        let (_, v_train) = jgp_predict(&m, &real.inputs().rows(0, 1).into_owned()).unwrap();
        assert!(var[0] >= v_train[0]);
        assert!(mean.iter().all(|v| v.is_finite()));
        let first = real.inputs().rows(0, 1).into_owned();
        let (mt, vt) = jgp_predict(&m, &first).unwrap();
        assert!((mt[0] - real.targets()[0]).abs() <= 2.0 * vt[0].sqrt());
    }

    #[test]
    fn copies_get_high_fidelity_and_noise_gets_low() {
        let mut high = 0;
        let mut low = 0;
        for seed in 0..20u64 {
            let real = toy(100 + seed, 20, 0.05, Provenance::Real);
            let copy = Dataset::uniform(real.inputs().clone(), real.targets().clone(), Provenance::Simulated).unwrap();
            let opts = JgpOptions { budget: 600, starts: 4 };
            if jgp_fit(&real, Some(&copy), &opts).unwrap().fidelity_w >= 0.5 {
                high += 1;
            }
            let mut r = RngStream::new(seed, 77).rng();
            let junk_y = DVector::from_fn(20, |_, _| 3.0 * r.normal());
            let junk = Dataset::uniform(toy(200 + seed, 20, 0.0, Provenance::Real).inputs().clone(), junk_y, Provenance::Simulated).unwrap();
            if jgp_fit(&real, Some(&junk), &opts).unwrap().fidelity_w <= 0.05 {
                low += 1;
            }
        }
        assert!(high >= 18, "copies: {high}/20");
        assert!(low >= 18, "noise: {low}/20");
    }

    #[test]
    fn rejects_constant_targets_and_tiny_sets() {
        let x = DMatrix::from_fn(6, 1, |i, _| i as f64);
        let flat = Dataset::uniform(x, DVector::from_element(6, 2.0), Provenance::Real).unwrap();
        assert!(matches!(jgp_fit(&flat, None, &JgpOptions::default()), Err(Error::Fit(_))));
        let tiny = toy(1, 4, 0.1, Provenance::Real);
        assert!(jgp_fit(&tiny, None, &JgpOptions::default()).unwrap_err().is_validation());
    }
}
