//! Synthetic forward models and dataset generators.
//!
//! Every experiment draws its data from here: an analytic two-cause
//! reflectance model, the noisy logistic map, polynomial ODE systems,
//! four band-ratio chlorophyll models, and the low-LAI-biased dataset.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};
use crate::sindy::TermLibrary;

pub const CHL_RANGE: (f64, f64) = (0.0, 80.0);
pub const LAI_RANGE: (f64, f64) = (0.0, 10.0);

/// Analytic two-cause canopy reflectance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticRtm {
    pub n_bands: usize,
    pub noise_sd: f64,
}

impl Default for SyntheticRtm {
    fn default() -> Self {
        Self {
            n_bands: 8,
            noise_sd: 0.0,
        }
    }
}

impl SyntheticRtm {
    pub fn new(n_bands: usize, noise_sd: f64) -> Result<Self> {
        if n_bands < 2 {
            return Err(Error::input(format!("rtm needs at least 2 bands, got {n_bands}")));
        }
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::input(format!("rtm noise sd must be ≥ 0, got {noise_sd}")));
        }
        Ok(Self { n_bands, noise_sd })
    }

    /// Per-band coefficients `(α_b, β_b, γ_b)` for band `b` (1-based).
    pub fn band_coefficients(b: usize) -> (f64, f64, f64) {
        let bf = b as f64;
        (0.30 + 0.05 * bf.sin(), 0.5 + 0.1 * bf, 0.20 + 0.02 * bf)
    }

    /// Noiseless reflectance, no range checks.
    pub fn eval_into(&self, chl: f64, lai: f64, out: &mut [f64]) {
        let canopy = lai / (1.0 + lai);
        for (i, o) in out.iter_mut().enumerate().take(self.n_bands) {
            let (a, b, g) = Self::band_coefficients(i + 1);
            *o = a * (-b * chl / 100.0).exp() + g * canopy;
        }
    }
}

pub fn check_causes(chl: f64, lai: f64) -> Result<()> {
    if !(CHL_RANGE.0..=CHL_RANGE.1).contains(&chl) {
        return Err(Error::input(format!("chlorophyll {chl} outside [0, 80]")));
    }
    if !(LAI_RANGE.0..=LAI_RANGE.1).contains(&lai) {
        return Err(Error::input(format!("LAI {lai} outside [0, 10]")));
    }
    Ok(())
}

/// Band reflectances `α_b·exp(−β_b·chl/100) + γ_b·lai/(1+lai)`, plus i.i.d.
/// Gaussian noise of sd `noise_sd` when a generator is supplied.
pub fn rtm_forward(rtm: &SyntheticRtm, chl: f64, lai: f64, rng: Option<&mut StreamRng>) -> Result<DVector<f64>> {
    check_causes(chl, lai)?;
    let mut out = vec![0.0; rtm.n_bands];
    rtm.eval_into(chl, lai, &mut out);
    if let Some(r) = rng {
        for v in &mut out {
            *v += rtm.noise_sd * r.normal();
        }
    }
    Ok(DVector::from_vec(out))
}

/// Parameters of `y_{t+1} = R·y_t·(1 − y_t/Ω)·exp(ε_t)`, `ε_t ~ N(0, λ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticMapParams {
    pub r: f64,
    pub omega: f64,
    pub lambda_noise: f64,
    pub t: usize,
    pub y1: Option<f64>,
}

impl Default for LogisticMapParams {
    fn default() -> Self {
        Self {
            r: 3.7,
            omega: 1.0,
            lambda_noise: 0.01,
            t: 100,
            y1: None,
        }
    }
}

impl LogisticMapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r <= 10.0 && self.omega > 0.0 && self.omega <= 10.0) {
            return Err(Error::input(format!(
                "(R, Ω) = ({}, {}) outside the supported box (0, 10]²",
                self.r, self.omega
            )));
        }
        if !(self.lambda_noise >= 0.0 && self.lambda_noise.is_finite()) {
            return Err(Error::input("λ must be ≥ 0"));
        }
        if self.t < 2 {
            return Err(Error::input("series length T must be ≥ 2"));
        }
        if let Some(y1) = self.y1 {
            if !(0.0..=1.0).contains(&y1) {
                return Err(Error::input(format!("y1 = {y1} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Iterates the noisy logistic map for `T` values; `y1 ~ U[0, 1]` when unset.
pub fn logistic_simulate(p: &LogisticMapParams, rng: &RngStream) -> Result<DVector<f64>> {
    p.validate()?;
    let mut r = rng.rng();
    let y1 = match p.y1 {
        Some(v) => v,
        None => r.uniform(),
    };
    let mut y = DVector::zeros(p.t);
    y[0] = y1;
    for t in 1..p.t {
        let prev = y[t - 1];
        let eps = p.lambda_noise * r.normal();
        let next = p.r * prev * (1.0 - prev / p.omega) * eps.exp();
        if !next.is_finite() || next < 0.0 || next > 10.0 * p.omega {
            return Err(Error::Divergence {
                step: t,
                detail: format!("y = {next} left [0, {}]", 10.0 * p.omega),
            });
        }
        y[t] = next;
    }
    Ok(y)
}

/// One classical fourth-order Runge–Kutta step, in place.
pub fn rk4_step<F>(rhs: &F, x: &mut [f64], dt: f64)
where
    F: Fn(&[f64], &mut [f64]),
{
    let d = x.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    rhs(x, &mut k1);
    for j in 0..d {
        tmp[j] = x[j] + 0.5 * dt * k1[j];
    }
    rhs(&tmp, &mut k2);
    for j in 0..d {
        tmp[j] = x[j] + 0.5 * dt * k2[j];
    }
    rhs(&tmp, &mut k3);
    for j in 0..d {
        tmp[j] = x[j] + dt * k3[j];
    }
    rhs(&tmp, &mut k4);
    for j in 0..d {
        x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
}

/// Classical fourth-order Runge–Kutta on a fixed grid.
///
/// Returns `steps + 1` rows including the initial state.
pub fn rk4<F>(rhs: F, x0: &[f64], dt: f64, steps: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let d = x0.len();
    let mut traj = DMatrix::zeros(steps + 1, d);
    let mut x = x0.to_vec();
    for (j, v) in x.iter().enumerate() {
        traj[(0, j)] = *v;
    }
    for s in 1..=steps {
        rk4_step(&rhs, &mut x, dt);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: s,
                detail: "non-finite state".into(),
            });
        }
        for (j, v) in x.iter().enumerate() {
            traj[(s, j)] = *v;
        }
    }
    Ok(traj)
}

/// Polynomial ODE `ẋ = Θ(x)·Ξ` on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    pub library: TermLibrary,
    /// `n_terms × state_dim`; column `j` holds the terms of `ẋ_j`.
    pub rhs: DMatrix<f64>,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
}

impl OdeSystem {
    pub fn new(library: TermLibrary, rhs: DMatrix<f64>, t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if rhs.nrows() != library.len() || rhs.ncols() != library.state_dim() {
            return Err(Error::input(format!(
                "coefficient matrix {}x{} does not match library ({} terms, dim {})",
                rhs.nrows(),
                rhs.ncols(),
                library.len(),
                library.state_dim()
            )));
        }
        if !(dt > 0.0) || !(t1 > t0) {
            return Err(Error::input("time grid needs dt > 0 and t1 > t0"));
        }
        Ok(Self {
            library,
            rhs,
            t0,
            t1,
            dt,
        })
    }

    pub fn steps(&self) -> usize {
        ((self.t1 - self.t0) / self.dt).round() as usize
    }

    pub fn eval_rhs(&self, x: &[f64], out: &mut [f64]) {
        self.library.eval_rhs(&self.rhs, x, out);
    }
}

/// Two-component system with the published principal-component dynamics:
/// `ẋ₁ = −37.5x₁ − 55.6x₂ − 31.9x₁x₂`, `ẋ₂ = 67.2x₁ + 44.8x₂ − 74.0x₁x₂`.
///
/// The origin is an unstable spiral and trajectories blow up in finite time
/// (from `(−0.1, 0.1)` near `t ≈ 0.37`), so useful horizons are short.
pub fn mexico_system(t1: f64, dt: f64) -> OdeSystem {
    let lib = TermLibrary::new(2, 2);
    let mut xi = DMatrix::zeros(lib.len(), 2);
    let i1 = lib.index_of(&[1, 0]).unwrap();
    let i2 = lib.index_of(&[0, 1]).unwrap();
    let i12 = lib.index_of(&[1, 1]).unwrap();
    xi[(i1, 0)] = -37.5;
    xi[(i2, 0)] = -55.6;
    xi[(i12, 0)] = -31.9;
    xi[(i1, 1)] = 67.2;
    xi[(i2, 1)] = 44.8;
    xi[(i12, 1)] = -74.0;
    OdeSystem::new(lib, xi, 0.0, t1, dt).expect("static system is well formed")
}

/// Horizon over which the published system stays bounded from `(−0.1, 0.1)`.
pub const MEXICO_HORIZON: f64 = 0.3;

pub fn ode_simulate(sys: &OdeSystem, x0: &[f64]) -> Result<DMatrix<f64>> {
    if x0.len() != sys.library.state_dim() {
        return Err(Error::input(format!(
            "initial state has dimension {}, system has {}",
            x0.len(),
            sys.library.state_dim()
        )));
    }
    rk4(|x, out| sys.eval_rhs(x, out), x0, sys.dt, sys.steps())
}

/// Coefficients of the four band-ratio chlorophyll models, in `log10(mg m⁻³)`.
pub mod ocean {
    /// Model 1: log-linear in the log ratio.
    pub const LOG_LINEAR: [f64; 2] = [0.25, -1.8];
    /// Model 2: linear in the ratio itself.
    pub const LINEAR: [f64; 2] = [1.2, -0.9];
    /// Model 3: cubic polynomial in the log ratio.
    pub const CUBIC: [f64; 4] = [0.30, -2.4, 0.0, 1.5];
    /// Model 4: quartic polynomial in the log ratio.
    pub const QUARTIC: [f64; 5] = [0.37, -3.0, 1.9, 0.6, -1.5];

    pub const NAMES: [&str; 4] = ["log_linear", "linear_ratio", "cubic_log", "quartic_log"];

    /// Horner evaluation, coefficients in increasing degree.
    pub fn poly(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, a| acc * x + a)
    }
}

/// Log10-chlorophyll predicted by the four stand-in parametric models for a
/// blue/green band ratio.
pub fn ocean_color_models(radiance_ratio: f64) -> Result<[f64; 4]> {
    if !(radiance_ratio > 0.0 && radiance_ratio.is_finite()) {
        return Err(Error::input(format!("band ratio must be positive, got {radiance_ratio}")));
    }
    let x = radiance_ratio.log10();
    Ok([
        ocean::poly(&ocean::LOG_LINEAR, x),
        ocean::poly(&ocean::LINEAR, radiance_ratio),
        ocean::poly(&ocean::CUBIC, x),
        ocean::poly(&ocean::QUARTIC, x),
    ])
}

/// Radiance samples for the band-ratio chlorophyll experiment.
#[derive(Debug, Clone)]
pub struct OceanSample {
    /// `log10` of four band radiances: two blue, green, red.
    pub inputs: DMatrix<f64>,
    /// `log10` chlorophyll from the quartic model at the true ratio, plus noise.
    pub targets: DVector<f64>,
    /// Outputs of the four parametric models at the observed blue/green ratio, one column each.
    pub model_outputs: DMatrix<f64>,
}

/// Draws `n` rows: true ratio log-uniform on `[0.3, 3]`, radiances with 2%
/// multiplicative noise, targets with Gaussian noise of sd `target_sd`.
pub fn make_ocean_dataset(rng: &RngStream, n: usize, target_sd: f64) -> Result<OceanSample> {
    if n < 2 || !(target_sd >= 0.0) {
        return Err(Error::input("ocean dataset needs n >= 2 and target_sd >= 0"));
    }
    let mut r = rng.rng();
    let mut inputs = DMatrix::zeros(n, 4);
    let mut targets = DVector::zeros(n);
    let mut model_outputs = DMatrix::zeros(n, 4);
    let (lo, hi) = (0.3f64.log10(), 3f64.log10());
    for i in 0..n {
        let ratio = 10f64.powf(r.uniform_in(lo, hi));
        let green = r.uniform_in(0.5, 2.0);
        let bands = [
            ratio * green * r.uniform_in(0.8, 1.0),
            ratio * green,
            green,
            0.2 * green * r.uniform_in(1.0, 1.3),
        ];
        let mut obs = [0.0; 4];
        for (b, v) in bands.iter().enumerate() {
            obs[b] = v * (0.02 * r.normal()).exp();
            inputs[(i, b)] = obs[b].log10();
        }
        targets[i] = ocean::poly(&ocean::QUARTIC, ratio.log10()) + target_sd * r.normal();
        let m = ocean_color_models(obs[1] / obs[2])?;
        for k in 0..4 {
            model_outputs[(i, k)] = m[k];
        }
    }
    Ok(OceanSample {
        inputs,
        targets,
        model_outputs,
    })
}

/// Settings for [`make_biased_lai_dataset_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasedLaiConfig {
    pub rtm: SyntheticRtm,
    pub n_test: usize,
    /// Rate of the truncated exponential for real-row LAI on `[0, real_lai_max]`.
    pub real_rate: f64,
    pub real_lai_max: f64,
    pub discrepancy_amplitude: f64,
}

impl Default for BiasedLaiConfig {
    fn default() -> Self {
        Self {
            rtm: SyntheticRtm {
                n_bands: 8,
                noise_sd: 0.002,
            },
            n_test: 200,
            real_rate: 1.0,
            real_lai_max: 3.0,
            discrepancy_amplitude: 0.02,
        }
    }
}

/// `0.02·sin(3·lai)` added to every simulated band.
pub fn lai_discrepancy(amplitude: f64, lai: f64) -> f64 {
    amplitude * (3.0 * lai).sin()
}

fn truncated_exponential(r: &mut StreamRng, rate: f64, upper: f64) -> f64 {
    let u = r.uniform();
    -(1.0 - u * (1.0 - (-rate * upper).exp())).ln() / rate
}

fn lai_rows(
    rtm: &SyntheticRtm,
    lais: &[f64],
    r: &mut StreamRng,
    noisy: bool,
    discrepancy: f64,
    tag: Provenance,
) -> Result<Dataset> {
    let n = lais.len();
    let mut x = DMatrix::zeros(n, rtm.n_bands);
    for (i, &lai) in lais.iter().enumerate() {
        let chl = r.uniform_in(10.0, 70.0);
        let s = rtm_forward(rtm, chl, lai, if noisy { Some(&mut *r) } else { None })?;
        for b in 0..rtm.n_bands {
            x[(i, b)] = s[b] + lai_discrepancy(discrepancy, lai);
        }
    }
    Dataset::uniform(x, DVector::from_column_slice(lais), tag)
}

/// Real rows biased to low LAI, simulated rows over the full LAI range with a
/// systematic model discrepancy, and a high-LAI test set.
pub fn make_biased_lai_dataset(rng: &RngStream, n_real: usize, n_sim: usize) -> Result<(Dataset, Dataset, Dataset)> {
    make_biased_lai_dataset_with(rng, n_real, n_sim, &BiasedLaiConfig::default())
}

pub fn make_biased_lai_dataset_with(
    rng: &RngStream,
    n_real: usize,
    n_sim: usize,
    cfg: &BiasedLaiConfig,
) -> Result<(Dataset, Dataset, Dataset)> {
    if n_real < 10 || n_sim < 10 || cfg.n_test < 10 {
        return Err(Error::input("biased LAI dataset needs at least 10 rows per part"));
    }
    if !(cfg.real_lai_max > 0.0 && cfg.real_lai_max <= LAI_RANGE.1) || !(cfg.real_rate > 0.0) {
        return Err(Error::input("real LAI distribution needs rate > 0 and an upper bound in (0, 10]"));
    }
    let mut r = rng.rng();
    let real_lai: Vec<f64> = (0..n_real).map(|_| truncated_exponential(&mut r, cfg.real_rate, cfg.real_lai_max)).collect();
    let sim_lai: Vec<f64> = (0..n_sim).map(|_| r.uniform_in(0.0, 10.0)).collect();
    let test_lai: Vec<f64> = (0..cfg.n_test).map(|_| r.uniform_in(3.0, 10.0)).collect();
    let real = lai_rows(&cfg.rtm, &real_lai, &mut r, true, 0.0, Provenance::Real)?;
    let sim = lai_rows(&cfg.rtm, &sim_lai, &mut r, false, cfg.discrepancy_amplitude, Provenance::Simulated)?;
    let test = lai_rows(&cfg.rtm, &test_lai, &mut r, true, 0.0, Provenance::Real)?;
    Ok((real, sim, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rtm_reduces_to_alpha_at_origin() {
        let rtm = SyntheticRtm::default();
        let r = rtm_forward(&rtm, 0.0, 0.0, None).unwrap();
        for b in 1..=8 {
            assert_eq!(r[b - 1], SyntheticRtm::band_coefficients(b).0);
        }
    }

    #[test]
    fn rtm_matches_direct_formula() {
        // Frozen from an independent evaluation of the band formula at chl=40, lai=2.
        let expected = [
            0.4157512510330828,
            0.42109673300383654,
            0.3963017523536658,
            0.3695694052635848,
            0.36895670561384747,
            0.3975465717855158,
            0.43262830400482855,
            0.4477658547371265,
        ];
        let r = rtm_forward(&SyntheticRtm::default(), 40.0, 2.0, None).unwrap();
        for (a, e) in r.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-14, "{a} vs {e}");
        }
    }

    #[test]
    fn rtm_decreasing_in_chl_and_bounded() {
        let rtm = SyntheticRtm::default();
        let mut prev: Option<DVector<f64>> = None;
        for i in 0..100 {
            let chl = 80.0 * i as f64 / 99.0;
            for j in 0..100 {
                let lai = 10.0 * j as f64 / 99.0;
                let r = rtm_forward(&rtm, chl, lai, None).unwrap();
                assert!(r.iter().all(|v| *v > 0.0 && *v < 1.5));
            }
            let r = rtm_forward(&rtm, chl, 3.0, None).unwrap();
            if let Some(p) = &prev {
                assert!(r.iter().zip(p.iter()).all(|(a, b)| a < b));
            }
            prev = Some(r);
        }
    }

    #[test]
    fn rtm_rejects_out_of_box() {
        let rtm = SyntheticRtm::default();
        assert!(rtm_forward(&rtm, -1.0, 1.0, None).unwrap_err().is_validation());
        assert!(rtm_forward(&rtm, 10.0, 10.5, None).is_err());
        assert!(SyntheticRtm::new(1, 0.0).is_err());
    }

    #[test]
    fn logistic_deterministic_steps() {
        let mut p = LogisticMapParams {
            r: 4.0,
            omega: 1.0,
            lambda_noise: 0.0,
            t: 3,
            y1: Some(0.5),
        };
        let y = logistic_simulate(&p, &RngStream::new(0, 0)).unwrap();
        assert_eq!(y[1], 1.0);
        assert_eq!(y[2], 0.0);
        p.y1 = Some(0.0);
        let y = logistic_simulate(&p, &RngStream::new(0, 0)).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn logistic_reproducible_and_decaying() {
        let p = LogisticMapParams::default();
        let a = logistic_simulate(&p, &RngStream::new(5, 1)).unwrap();
        let b = logistic_simulate(&p, &RngStream::new(5, 1)).unwrap();
        assert_eq!(a, b);
        let p = LogisticMapParams {
            r: 0.8,
            lambda_noise: 0.0,
            t: 50,
            y1: Some(0.9),
            ..Default::default()
        };
        let y = logistic_simulate(&p, &RngStream::new(0, 0)).unwrap();
        assert!(y.as_slice().windows(2).all(|w| w[1] < w[0]));
        assert!(y[49] < 1e-4);
    }

    #[test]
    fn logistic_divergence_reports_step() {
        let p = LogisticMapParams {
            r: 9.0,
            omega: 1.0,
            lambda_noise: 0.0,
            t: 10,
            y1: Some(0.5),
        };
        match logistic_simulate(&p, &RngStream::new(0, 0)) {
            Err(Error::Divergence { step, .. }) => assert_eq!(step, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rk4_exponential_decay() {
        let lib = TermLibrary::new(1, 1);
        let mut xi = DMatrix::zeros(lib.len(), 1);
        xi[(1, 0)] = -1.0;
        let sys = OdeSystem::new(lib, xi, 0.0, 1.0, 1e-3).unwrap();
        let tr = ode_simulate(&sys, &[1.0]).unwrap();
        assert_eq!(tr.nrows(), 1001);
        assert!((tr[(1000, 0)] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn zero_rhs_is_constant() {
        let lib = TermLibrary::new(2, 2);
        let sys = OdeSystem::new(lib.clone(), DMatrix::zeros(lib.len(), 2), 0.0, 0.5, 0.01).unwrap();
        let tr = ode_simulate(&sys, &[0.3, -0.7]).unwrap();
        assert!(tr.row_iter().all(|r| r[0] == 0.3 && r[1] == -0.7));
    }

    #[test]
    fn mexico_step_halving() {
        let coarse = ode_simulate(&mexico_system(MEXICO_HORIZON, 1e-3), &[-0.1, 0.1]).unwrap();
        let fine = ode_simulate(&mexico_system(MEXICO_HORIZON, 5e-4), &[-0.1, 0.1]).unwrap();
        let mut dev: f64 = 0.0;
        for i in 0..coarse.nrows() {
            for j in 0..2 {
                dev = dev.max((coarse[(i, j)] - fine[(2 * i, j)]).abs());
            }
        }
        assert!(dev <= 1e-6, "max deviation {dev}");
        assert!(ode_simulate(&mexico_system(1.0, 1e-3), &[-0.1, 0.1]).is_err());
    }

    #[test]
    fn ocean_models_constant_terms_and_monotone() {
        let m = ocean_color_models(1.0).unwrap();
        assert_eq!(m[0], ocean::LOG_LINEAR[0]);
        assert_eq!(m[2], ocean::CUBIC[0]);
        assert_eq!(m[3], ocean::QUARTIC[0]);
        let grid: Vec<f64> = (0..=2000).map(|i| 0.3 + 2.7 * i as f64 / 2000.0).collect();
        for k in 0..4 {
            let vals: Vec<f64> = grid.iter().map(|&r| ocean_color_models(r).unwrap()[k]).collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]), "model {k} not monotone");
        }
        let x = 1.7f64.log10();
        let direct = 0.30 - 2.4 * x + 1.5 * x * x * x;
        assert!((ocean_color_models(1.7).unwrap()[2] - direct).abs() < 1e-14);
        assert!(ocean_color_models(0.0).is_err());
    }

    #[test]
    fn ocean_dataset_rows_are_consistent() {
        let d = make_ocean_dataset(&RngStream::new(3, 0), 50, 0.0).unwrap();
        assert_eq!(d.inputs.shape(), (50, 4));
        assert_eq!(d.model_outputs.shape(), (50, 4));
        for i in 0..50 {
            let ratio = 10f64.powf(d.inputs[(i, 1)] - d.inputs[(i, 2)]);
            assert!((0.25..3.6).contains(&ratio));
            let m = ocean_color_models(ratio).unwrap();
            for k in 0..4 {
                assert!((m[k] - d.model_outputs[(i, k)]).abs() < 1e-9);
            }
            // noise-free targets sit close to the quartic at the observed ratio
            assert!((d.targets[i] - m[3]).abs() < 0.2);
        }
        let again = make_ocean_dataset(&RngStream::new(3, 0), 50, 0.0).unwrap();
        assert_eq!(again.inputs, d.inputs);
        assert!(make_ocean_dataset(&RngStream::new(3, 0), 1, 0.1).is_err());
    }

    #[test]
    fn biased_lai_construction() {
        let mut lower = 0;
        for seed in 0..20 {
            let (real, sim, test) = make_biased_lai_dataset(&RngStream::new(seed, 0), 40, 60).unwrap();
            assert!(real.targets().iter().all(|v| (0.0..=3.0).contains(v)));
            assert!(test.targets().iter().all(|v| (3.0..=10.0).contains(v)));
            assert!(sim.provenance().iter().all(|p| *p == Provenance::Simulated));
            if real.targets().mean() < sim.targets().mean() {
                lower += 1;
            }
        }
        assert_eq!(lower, 20);
        assert_eq!(lai_discrepancy(0.02, 0.0), 0.0);
        assert!(make_biased_lai_dataset(&RngStream::new(0, 0), 5, 60).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let a = make_biased_lai_dataset(&RngStream::new(3, 2), 20, 20).unwrap();
        let b = make_biased_lai_dataset(&RngStream::new(3, 2), 20, 20).unwrap();
        assert_eq!(a, b);
    }
}
