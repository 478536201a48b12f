//! First-order latent force model.
//!
//! Each output obeys `dx_d/dt + γ_d x_d = Σ_r S_dr u_r(t)` and starts from
//! rest at the model origin. The forces `u_r` are zero-mean GPs with kernel
//! `exp(−(s − s')²/ℓ_r²)`. Observations add a per-output offset, profiled out
//! by generalized least squares, and Gaussian noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::gp::{fit_gp, GpFitOptions};
use crate::linalg::{lstsq, Cholesky};
use crate::optim::multi_start;
use crate::rng::{RngStream, StreamRng};
use crate::stats;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const LN_2PI: f64 = 1.837_877_066_409_345_3;
pub const MAX_OBSERVATIONS: usize = 2000;

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 26.0 {
        return (x * x).exp() * erfc(x);
    }
    let z = 1.0 / (2.0 * x * x);
    let series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z * (1.0 - 9.0 * z))));
    series / (x * SQRT_PI)
}

/// `exp(c)·(erf(a) − erf(b))` without cancellation when `a` and `b` share a sign.
fn exp_erf_diff(c: f64, a: f64, b: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        (c - b * b).exp() * erfcx(b) - (c - a * a).exp() * erfcx(a)
    } else if a <= 0.0 && b <= 0.0 {
        (c - a * a).exp() * erfcx(-a) - (c - b * b).exp() * erfcx(-b)
    } else {
        c.exp() * (erf(a) - erf(b))
    }
}

/// Latent force kernel `exp(−(s − s')²/ℓ²)`.
pub fn latent_kernel(ell: f64, s: f64, s2: f64) -> f64 {
    (-((s - s2) / ell).powi(2)).exp()
}

/// `∫₀ᵗ exp(−γ(t − v))·exp(−(v − s)²/ℓ²) dv`; zero for `t ≤ 0`.
pub fn green_rbf(gamma: f64, ell: f64, t: f64, s: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let nu = 0.5 * gamma * ell;
    0.5 * SQRT_PI * ell * exp_erf_diff(nu * nu - gamma * (t - s), (t - s) / ell - nu, -(s / ell + nu))
}

/// Half of the output cross-covariance; `g` is the decay acting over `ta − tb`.
fn h(g: f64, g_other: f64, ta: f64, tb: f64, ell: f64) -> f64 {
    let nu = 0.5 * g * ell;
    let near = exp_erf_diff(nu * nu - g * (ta - tb), (ta - tb) / ell - nu, -(tb / ell + nu));
    let far = (-g_other * tb).exp() * exp_erf_diff(nu * nu - g * ta, ta / ell - nu, -nu);
    (near - far) / (g + g_other)
}

/// Cross-covariance of two noise-free outputs for a unit-sensitivity force.
fn unit_cross_cov(g: f64, g2: f64, ell: f64, t: f64, t2: f64) -> f64 {
    if t <= 0.0 || t2 <= 0.0 {
        return 0.0;
    }
    0.5 * SQRT_PI * ell * (h(g2, g, t2, t, ell) + h(g, g2, t, t2, ell))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LfmParams {
    pub gamma: Vec<f64>,
    /// D×R output-force sensitivities.
    pub sens: DMatrix<f64>,
    pub latent_lengthscales: Vec<f64>,
    /// Observation noise variance per output.
    pub noise: Vec<f64>,
    /// Time at which every output is at rest.
    pub origin: f64,
}

impl LfmParams {
    pub fn new(gamma: Vec<f64>, sens: DMatrix<f64>, latent_lengthscales: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        let p = Self {
            gamma,
            sens,
            latent_lengthscales,
            noise,
            origin: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.gamma.len();
        let r = self.latent_lengthscales.len();
        if d == 0 || r == 0 {
            return Err(Error::input("latent force model needs at least one output and one force"));
        }
        if self.sens.shape() != (d, r) || self.noise.len() != d {
            return Err(Error::input(format!(
                "parameter shapes disagree: {} decays, sens {}x{}, {} lengthscales, {} noise terms",
                d,
                self.sens.nrows(),
                self.sens.ncols(),
                r,
                self.noise.len()
            )));
        }
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !positive(&self.gamma) || !positive(&self.latent_lengthscales) || !positive(&self.noise) {
            return Err(Error::input("decays, lengthscales and noise variances must be positive"));
        }
        if self.sens.iter().any(|v| !v.is_finite()) || !self.origin.is_finite() {
            return Err(Error::input("sensitivities and origin must be finite"));
        }
        Ok(())
    }

    pub fn n_outputs(&self) -> usize {
        self.gamma.len()
    }

    pub fn n_latents(&self) -> usize {
        self.latent_lengthscales.len()
    }

    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self
    }

    /// Decay times `τ_d = 1/γ_d`.
    pub fn tau(&self) -> Vec<f64> {
        self.gamma.iter().map(|g| 1.0 / g).collect()
    }
}

/// Noise-free covariance `cov(x_d(t), x_d2(t2))`.
pub fn lfm_cross_cov(p: &LfmParams, d: usize, d2: usize, t: f64, t2: f64) -> f64 {
    (0..p.n_latents())
        .map(|r| {
            p.sens[(d, r)]
                * p.sens[(d2, r)]
                * unit_cross_cov(p.gamma[d], p.gamma[d2], p.latent_lengthscales[r], t - p.origin, t2 - p.origin)
        })
        .sum()
}

/// `cov(x_d(t), u_r(s))`.
pub fn lfm_latent_cross_cov(p: &LfmParams, d: usize, r: usize, t: f64, s: f64) -> f64 {
    p.sens[(d, r)] * green_rbf(p.gamma[d], p.latent_lengthscales[r], t - p.origin, s - p.origin)
}

/// One output's time axis with an observation mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
}

impl Series {
    pub fn fully_observed(times: Vec<f64>, values: Vec<f64>) -> Self {
        let observed = vec![true; times.len()];
        Self { times, values, observed }
    }

    pub fn n_observed(&self) -> usize {
        self.observed.iter().filter(|o| **o).count()
    }

    pub fn observed_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.values)
            .zip(&self.observed)
            .filter(|(_, o)| **o)
            .map(|((t, y), _)| (*t, *y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeriesData {
    pub series: Vec<Series>,
}

impl MultiSeriesData {
    pub fn new(series: Vec<Series>) -> Result<Self> {
        let d = Self { series };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::input("no output series"));
        }
        for (d, s) in self.series.iter().enumerate() {
            if s.values.len() != s.times.len() || s.observed.len() != s.times.len() {
                return Err(Error::input(format!("series {d}: times, values and mask lengths differ")));
            }
            if s.times.iter().any(|t| !t.is_finite()) {
                return Err(Error::input(format!("series {d}: times must be finite")));
            }
            if s.times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::input(format!("series {d}: times must be strictly increasing")));
            }
            if s.observed_points().any(|(_, y)| !y.is_finite()) {
                return Err(Error::input(format!("series {d}: observed value is not finite")));
            }
        }
        if self.n_observed() == 0 {
            return Err(Error::input("no output has an observation"));
        }
        Ok(())
    }

    pub fn n_outputs(&self) -> usize {
        self.series.len()
    }

    pub fn n_observed(&self) -> usize {
        self.series.iter().map(Series::n_observed).sum()
    }

    /// Flattened observations `(output, time, value)` in output-major order.
    pub fn observations(&self) -> Vec<(usize, f64, f64)> {
        self.series
            .iter()
            .enumerate()
            .flat_map(|(d, s)| s.observed_points().map(move |(t, y)| (d, t, y)))
            .collect()
    }

    /// Masks output `d` on `[lo, hi]`.
    pub fn mask_interval(&mut self, d: usize, lo: f64, hi: f64) {
        let s = &mut self.series[d];
        for (t, o) in s.times.iter().zip(s.observed.iter_mut()) {
            if *t >= lo && *t <= hi {
                *o = false;
            }
        }
    }
}

/// Noise-free joint covariance over `(output, time)` points.
pub fn joint_gram(p: &LfmParams, pts: &[(usize, f64)]) -> DMatrix<f64> {
    let n = pts.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = lfm_cross_cov(p, pts[i].0, pts[j].0, pts[i].1, pts[j].1);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// A latent force model conditioned on data.
#[derive(Debug, Clone)]
pub struct LfmPosterior {
    params: LfmParams,
    pts: Vec<(usize, f64)>,
    chol: Option<Cholesky>,
    alpha: DVector<f64>,
    /// Per-output offsets.
    beta: DVector<f64>,
    log_lik: f64,
}

impl LfmPosterior {
    pub fn new(params: &LfmParams, data: &MultiSeriesData) -> Result<Self> {
        params.validate()?;
        data.validate()?;
        if data.n_outputs() != params.n_outputs() {
            return Err(Error::input(format!(
                "data has {} outputs, parameters {}",
                data.n_outputs(),
                params.n_outputs()
            )));
        }
        let obs = data.observations();
        if obs.len() > MAX_OBSERVATIONS {
            return Err(Error::input(format!("{} observations exceed the limit of {MAX_OBSERVATIONS}", obs.len())));
        }
        let pts: Vec<(usize, f64)> = obs.iter().map(|o| (o.0, o.1)).collect();
        let n = pts.len();
        let mut c = joint_gram(params, &pts);
        for (i, &(d, _)) in pts.iter().enumerate() {
            c[(i, i)] += params.noise[d];
        }
        let chol = Cholesky::new(&c, 0.0).or_else(|_| Cholesky::new(&c, crate::linalg::default_jitter(&c)))?;
        let mut hmat = DMatrix::zeros(n, params.n_outputs());
        for (i, &(d, _)) in pts.iter().enumerate() {
            hmat[(i, d)] = 1.0;
        }
        // Outputs without observations get the minimum-norm zero offset.
        let y = DVector::from_iterator(n, obs.iter().map(|o| o.2));
        let mut wh = hmat.clone();
        chol.solve_lower_mut(&mut wh);
        let wy = chol.half_solve_vec(&y);
        let beta = lstsq(&wh, &DMatrix::from_column_slice(n, 1, wy.as_slice()))?.column(0).into_owned();
        let resid = &y - &hmat * &beta;
        let z = chol.half_solve_vec(&resid);
        let log_lik = -0.5 * (z.norm_squared() + chol.log_det() + n as f64 * LN_2PI);
        let alpha = chol.solve_vec(&resid);
        Ok(Self {
            params: params.clone(),
            pts,
            chol: Some(chol),
            alpha,
            beta,
            log_lik,
        })
    }

    /// The prior: no data and zero offsets.
    pub fn prior(params: &LfmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params: params.clone(),
            pts: Vec::new(),
            chol: None,
            alpha: DVector::zeros(0),
            beta: DVector::zeros(params.n_outputs()),
            log_lik: 0.0,
        })
    }

    pub fn params(&self) -> &LfmParams {
        &self.params
    }

    /// Profile log marginal likelihood at the GLS offsets.
    pub fn log_likelihood(&self) -> f64 {
        self.log_lik
    }

    pub fn output_offsets(&self) -> &[f64] {
        self.beta.as_slice()
    }

    fn condition(&self, prior_var: f64, mean: f64, k_star: &DVector<f64>) -> (f64, f64) {
        match &self.chol {
            None => (mean, prior_var),
            Some(chol) => {
                let v = chol.half_solve_vec(k_star);
                (mean + k_star.dot(&self.alpha), (prior_var - v.norm_squared()).max(0.0))
            }
        }
    }

    /// Mean and variance of the noise-free output `x_d` at each query time.
    pub fn predict_latent_output(&self, d: usize, query: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if d >= self.params.n_outputs() {
            return Err(Error::input(format!("output index {d} out of range")));
        }
        check_times(query)?;
        let mut means = Vec::with_capacity(query.len());
        let mut vars = Vec::with_capacity(query.len());
        for &t in query {
            let m0 = self.beta[d];
            let ks = DVector::from_iterator(
                self.pts.len(),
                self.pts.iter().map(|&(d2, t2)| lfm_cross_cov(&self.params, d, d2, t, t2)),
            );
            let (m, v) = self.condition(lfm_cross_cov(&self.params, d, d, t, t), m0, &ks);
            means.push(m);
            vars.push(v);
        }
        Ok((means, vars))
    }

    /// Predictive mean and variance of a noisy observation of output `d`.
    pub fn predict(&self, d: usize, query: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (m, v) = self.predict_latent_output(d, query)?;
        let noise = self.params.noise[d];
        Ok((m, v.into_iter().map(|x| x + noise).collect()))
    }

    /// Posterior mean and variance of each force at the query times.
    pub fn latent(&self, query: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        check_times(query)?;
        (0..self.params.n_latents())
            .map(|r| {
                let mut means = Vec::with_capacity(query.len());
                let mut vars = Vec::with_capacity(query.len());
                for &s in query {
                    let ks = DVector::from_iterator(
                        self.pts.len(),
                        self.pts.iter().map(|&(d, t)| lfm_latent_cross_cov(&self.params, d, r, t, s)),
                    );
                    let (m, v) = self.condition(1.0, 0.0, &ks);
                    means.push(m);
                    vars.push(v);
                }
                Ok((means, vars))
            })
            .collect()
    }
}

fn check_times(ts: &[f64]) -> Result<()> {
    if ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::input("query times must be finite"));
    }
    Ok(())
}

/// Predictive mean and variance (including noise) of output `d`.
pub fn lfm_predict(p: &LfmParams, data: &MultiSeriesData, query: &[f64], d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    LfmPosterior::new(p, data)?.predict(d, query)
}

/// Per-force posterior mean and variance.
pub fn lfm_latent_posterior(p: &LfmParams, data: &MultiSeriesData, query: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    LfmPosterior::new(p, data)?.latent(query)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LfmFitConfig {
    pub n_latents: usize,
    pub budget: usize,
    /// Number of optimizer starts; the first is deterministic.
    pub starts: usize,
    /// Days before the first observation at which outputs start from rest.
    pub lead: f64,
}

impl Default for LfmFitConfig {
    fn default() -> Self {
        Self {
            n_latents: 1,
            budget: 5000,
            starts: 3,
            lead: 100.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LfmFit {
    pub params: LfmParams,
    pub log_lik: f64,
    /// Profile log likelihood at each start.
    pub start_log_liks: Vec<f64>,
    pub evaluations: usize,
}

fn unpack(v: &[f64], d: usize, r: usize, origin: f64) -> Option<LfmParams> {
    let gamma: Vec<f64> = v[..d].iter().map(|x| x.clamp(-9.0, 3.0).exp()).collect();
    let sens = DMatrix::from_row_slice(d, r, &v[d..d + d * r]);
    let ls: Vec<f64> = v[d + d * r..d + d * r + r].iter().map(|x| x.clamp(-4.0, 7.0).exp()).collect();
    let noise: Vec<f64> = v[d + d * r + r..].iter().map(|x| x.clamp(-30.0, 12.0).exp()).collect();
    LfmParams::new(gamma, sens, ls, noise).ok().map(|p| p.with_origin(origin))
}

fn pack(p: &LfmParams) -> Vec<f64> {
    let mut v: Vec<f64> = p.gamma.iter().map(|g| g.ln()).collect();
    for i in 0..p.n_outputs() {
        for j in 0..p.n_latents() {
            v.push(p.sens[(i, j)]);
        }
    }
    v.extend(p.latent_lengthscales.iter().map(|l| l.ln()));
    v.extend(p.noise.iter().map(|n| n.ln()));
    v
}

/// Maximizes the profile marginal likelihood over decays, sensitivities,
/// force lengthscales and noise with multi-start Nelder–Mead.
pub fn lfm_fit(data: &MultiSeriesData, cfg: &LfmFitConfig, rng: &RngStream) -> Result<LfmFit> {
    data.validate()?;
    if data.n_observed() > MAX_OBSERVATIONS {
        return Err(Error::input(format!(
            "{} observations exceed the limit of {MAX_OBSERVATIONS}",
            data.n_observed()
        )));
    }
    if cfg.n_latents == 0 || cfg.starts == 0 || !(cfg.lead >= 0.0) {
        return Err(Error::input("need at least one force, one start and a non-negative lead"));
    }
    let d = data.n_outputs();
    let r = cfg.n_latents;
    let spreads: Vec<f64> = data
        .series
        .iter()
        .map(|s| {
            let ys: Vec<f64> = s.observed_points().map(|(_, y)| y).collect();
            let v = if ys.len() > 1 { stats::variance(&ys) } else { 0.0 };
            if v > 0.0 {
                v
            } else {
                1.0
            }
        })
        .collect();
    let obs = data.observations();
    let first = obs.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
    let last = obs.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
    let horizon = (last - first).max(1.0);
    let origin = first - cfg.lead;

    let mut draw = rng.rng();
    let mut starts = Vec::with_capacity(cfg.starts);
    for k in 0..cfg.starts {
        let (tau, ell): (Vec<f64>, f64) = if k == 0 {
            (vec![horizon / 10.0; d], horizon / 40.0)
        } else {
            let tau = (0..d).map(|_| horizon * (draw.uniform_in(-4.0, -1.0)).exp()).collect();
            (tau, horizon * draw.uniform_in(-5.0, -2.5).exp())
        };
        let gamma: Vec<f64> = tau.iter().map(|t| 1.0 / t).collect();
        let sens = DMatrix::from_fn(d, r, |i, j| {
            let scale = (spreads[i] * 2.0 * gamma[i] / (SQRT_PI * ell)).sqrt();
            if j == 0 {
                scale
            } else {
                scale * 0.3
            }
        });
        let noise: Vec<f64> = spreads.iter().map(|v| 0.05 * v).collect();
        starts.push(pack(&LfmParams::new(gamma, sens, vec![ell; r], noise)?));
    }

    let mut objective = |v: &[f64]| -> f64 {
        let Some(p) = unpack(v, d, r, origin) else { return f64::INFINITY };
        match LfmPosterior::new(&p, data) {
            Ok(post) => -post.log_likelihood(),
            Err(_) => f64::INFINITY,
        }
    };
    let res = multi_start(&mut objective, &starts, 0.5, cfg.budget, 1e-9);
    if !res.value.is_finite() {
        return Err(Error::Fit("likelihood not finite at any start".into()));
    }
    let params = unpack(&res.x, d, r, origin).ok_or_else(|| Error::Fit("optimizer left the parameter domain".into()))?;
    Ok(LfmFit {
        params,
        log_lik: -res.value,
        start_log_liks: res.start_values.iter().map(|v| -v).collect(),
        evaluations: res.evaluations,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedConfig {
    pub horizon: f64,
    pub n_obs: usize,
    pub taus: Vec<f64>,
    pub sens: Vec<f64>,
    /// Noise sd as a fraction of each clean output's sd.
    pub noise_frac: f64,
    /// Mean days between force events.
    pub event_spacing: f64,
    pub bump_width: [f64; 2],
    /// Days of forcing before time zero; outputs start from rest there.
    pub burn_in: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            horizon: 120.0,
            n_obs: 40,
            taus: vec![5.0, 10.0, 20.0],
            sens: vec![1.0, 0.8, 0.6],
            noise_frac: 0.05,
            event_spacing: 8.0,
            bump_width: [2.0, 4.0],
            burn_in: 100.0,
        }
    }
}

impl PlantedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taus.is_empty() || self.taus.len() != self.sens.len() {
            return Err(Error::input("taus and sens must be non-empty and of equal length"));
        }
        if self.taus.iter().any(|t| !(*t > 0.0)) || !(self.horizon > 0.0) || self.n_obs < 2 {
            return Err(Error::input("taus and horizon must be positive, n_obs at least 2"));
        }
        if !(self.event_spacing > 0.0) || !(self.bump_width[0] > 0.0) || self.bump_width[1] < self.bump_width[0] {
            return Err(Error::input("event spacing and bump widths must be positive and ordered"));
        }
        if !(self.noise_frac >= 0.0) || !(self.burn_in >= 0.0) {
            return Err(Error::input("noise_frac and burn_in must be non-negative"));
        }
        Ok(())
    }
}

/// A force made of Gaussian bumps `a·exp(−(t − c)²/w²)`.
#[derive(Debug, Clone)]
pub struct BumpForce {
    pub bumps: Vec<(f64, f64, f64)>,
    /// Time at which the driven system is at rest.
    pub start: f64,
}

impl BumpForce {
    pub fn eval(&self, t: f64) -> f64 {
        self.bumps.iter().map(|&(a, c, w)| a * latent_kernel(w, t, c)).sum()
    }

    /// Exact solution of `dx/dt + γx = sens·u(t)` with `x(start) = 0`.
    pub fn response(&self, gamma: f64, sens: f64, t: f64) -> f64 {
        let t0 = self.start;
        sens * self.bumps.iter().map(|&(a, c, w)| a * green_rbf(gamma, w, t - t0, c - t0)).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct PlantedLfm {
    pub data: MultiSeriesData,
    pub force: BumpForce,
    pub gamma: Vec<f64>,
    pub sens: Vec<f64>,
    pub noise_sd: Vec<f64>,
}

impl PlantedLfm {
    pub fn clean(&self, d: usize, t: f64) -> f64 {
        self.force.response(self.gamma[d], self.sens[d], t)
    }
}

/// Simulates outputs driven by one rainfall-like force at random times.
pub fn make_planted(cfg: &PlantedConfig, rng: &RngStream) -> Result<PlantedLfm> {
    cfg.validate()?;
    let mut r = rng.child(0).rng();
    let span = cfg.horizon + cfg.burn_in;
    let n_events = (span / cfg.event_spacing).round().max(1.0) as usize;
    let bumps = (0..n_events)
        .map(|_| {
            let a = -(1.0 - r.uniform()).ln();
            let c = r.uniform_in(-cfg.burn_in, cfg.horizon);
            let w = r.uniform_in(cfg.bump_width[0], cfg.bump_width[1]);
            (a, c, w)
        })
        .collect();
    let force = BumpForce {
        bumps,
        start: -cfg.burn_in,
    };
    let gamma: Vec<f64> = cfg.taus.iter().map(|t| 1.0 / t).collect();
    let mut series = Vec::new();
    let mut noise_sd = Vec::new();
    for d in 0..gamma.len() {
        let mut rd = rng.child(1 + d as u64).rng();
        let times = sorted_times(&mut rd, cfg.n_obs, cfg.horizon);
        let clean: Vec<f64> = times.iter().map(|&t| force.response(gamma[d], cfg.sens[d], t)).collect();
        let sd = cfg.noise_frac * stats::variance(&clean).sqrt();
        let values = clean.iter().map(|c| c + sd * rd.normal()).collect();
        series.push(Series::fully_observed(times, values));
        noise_sd.push(sd);
    }
    Ok(PlantedLfm {
        data: MultiSeriesData::new(series)?,
        force,
        gamma,
        sens: cfg.sens.clone(),
        noise_sd,
    })
}

fn sorted_times(r: &mut StreamRng, n: usize, horizon: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..n).map(|_| r.uniform_in(0.0, horizon)).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LfmExperimentConfig {
    pub planted: PlantedConfig,
    pub fit: LfmFitConfig,
    /// Outputs masked over the gap.
    pub gap_outputs: Vec<usize>,
    /// Gap as fractions of the horizon.
    pub gap: [f64; 2],
    pub grid_step: f64,
}

impl Default for LfmExperimentConfig {
    fn default() -> Self {
        Self {
            planted: PlantedConfig::default(),
            fit: LfmFitConfig::default(),
            gap_outputs: vec![1, 2],
            gap: [0.4, 0.6],
            grid_step: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LfmTrial {
    pub tau_true: Vec<f64>,
    pub tau_hat: Vec<f64>,
    pub sigma_true: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    /// Correlation of the first force's posterior mean with the planted force.
    pub force_corr: f64,
    pub gap_rmse_lfm: f64,
    pub gap_rmse_gp: f64,
    pub log_lik: f64,
    pub start_log_liks: Vec<f64>,
}

/// Output of one planted trial with everything needed for reporting.
#[derive(Debug, Clone)]
pub struct LfmRun {
    pub trial: LfmTrial,
    pub planted: PlantedLfm,
    pub masked: MultiSeriesData,
    pub posterior: LfmPosterior,
    pub grid: Vec<f64>,
}

pub fn time_grid(horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Plants a force, masks a gap, fits the model and scores recovery and gap filling.
pub fn lfm_trial(cfg: &LfmExperimentConfig, rng: &RngStream) -> Result<LfmRun> {
    if !(cfg.grid_step > 0.0) || !(cfg.gap[0] < cfg.gap[1]) {
        return Err(Error::input("grid_step must be positive and the gap ordered"));
    }
    let planted = make_planted(&cfg.planted, &rng.child(0))?;
    let d_out = planted.gamma.len();
    if cfg.gap_outputs.iter().any(|&d| d >= d_out) {
        return Err(Error::input("gap output index out of range"));
    }
    let h = cfg.planted.horizon;
    let (lo, hi) = (cfg.gap[0] * h, cfg.gap[1] * h);
    let mut masked = planted.data.clone();
    for &d in &cfg.gap_outputs {
        masked.mask_interval(d, lo, hi);
    }
    let fit = lfm_fit(&masked, &cfg.fit, &rng.child(1))?;
    let posterior = LfmPosterior::new(&fit.params, &masked)?;
    let grid = time_grid(h, cfg.grid_step);

    let lat = posterior.latent(&grid)?;
    let truth_force: Vec<f64> = grid.iter().map(|&t| planted.force.eval(t)).collect();
    let force_corr = stats::pearson(&lat[0].0, &truth_force);

    let gap_grid: Vec<f64> = grid.iter().copied().filter(|t| *t >= lo && *t <= hi).collect();
    let mut err_lfm = Vec::new();
    let mut err_gp = Vec::new();
    let mut truth = Vec::new();
    for &d in &cfg.gap_outputs {
        let (m, _) = posterior.predict_latent_output(d, &gap_grid)?;
        err_lfm.extend(m);
        err_gp.extend(single_output_gp(&masked.series[d], &gap_grid)?);
        truth.extend(gap_grid.iter().map(|&t| planted.clean(d, t)));
    }
    let trial = LfmTrial {
        tau_true: cfg.planted.taus.clone(),
        tau_hat: fit.params.tau(),
        sigma_true: planted.noise_sd.clone(),
        sigma_hat: fit.params.noise.iter().map(|v| v.sqrt()).collect(),
        force_corr,
        gap_rmse_lfm: stats::rmse(&err_lfm, &truth),
        gap_rmse_gp: stats::rmse(&err_gp, &truth),
        log_lik: fit.log_lik,
        start_log_liks: fit.start_log_liks,
    };
    Ok(LfmRun {
        trial,
        planted,
        masked,
        posterior,
        grid,
    })
}

/// Baseline: an SE-kernel GP fitted to one output's own observations.
pub fn single_output_gp(series: &Series, query: &[f64]) -> Result<Vec<f64>> {
    let pts: Vec<(f64, f64)> = series.observed_points().collect();
    let x = DMatrix::from_iterator(pts.len(), 1, pts.iter().map(|p| p.0));
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let (hyper, _) = fit_gp(&x, &y, &GpFitOptions::default())?;
    let noise = DVector::from_element(pts.len(), hyper.noise);
    let gp = crate::gp::ExactGp::condition(hyper.kernel, x, &y, noise, y.mean())?;
    let xq = DMatrix::from_column_slice(query.len(), 1, query);
    Ok(gp.predict_mean(&xq)?.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        if b <= a {
            return 0.0;
        }
        // Pre-split so narrow peaks are not missed by the first coarse estimate.
        let pieces = 64;
        let w = (b - a) / pieces as f64;
        (0..pieces)
            .map(|i| {
                let (lo, hi) = (a + i as f64 * w, a + (i + 1) as f64 * w);
                let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
                let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
                rec(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
            })
            .sum()
    }

    fn random_params(r: &mut StreamRng, d: usize) -> LfmParams {
        let gamma = (0..d).map(|_| r.uniform_in(-3.5, 0.5).exp()).collect();
        let sens = DMatrix::from_fn(d, 1, |_, _| r.uniform_in(-1.5, 1.5));
        let ell = vec![r.uniform_in(-0.5, 2.0).exp()];
        LfmParams::new(gamma, sens, ell, vec![0.01; d]).unwrap()
    }

    #[test]
    fn erfcx_matches_direct_and_asymptotic() {
        for &x in &[-3.0f64, -0.5, 0.0, 0.7, 2.0, 10.0, 25.9] {
            let direct = (x * x).exp() * erfc(x);
            assert!((erfcx(x) - direct).abs() <= 1e-12 * direct.abs(), "x={x}");
        }
        // reference values from 30-digit arithmetic
        for &(x, v) in &[(26.0, 0.021_683_584_850_562_907), (40.0, 0.014_100_335_983_377_814), (100.0, 0.005_641_613_782_989_433)] {
            assert!((erfcx(x) - v).abs() < 1e-15 * v / 1e-2, "x={x}");
        }
        assert!((erfcx(1e4) * 1e4 * SQRT_PI - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cross_cov_matches_double_quadrature() {
        let mut r = RngStream::new(11, 0).rng();
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let p = random_params(&mut r, 2);
            let (d, d2) = (r.below(2), r.below(2));
            let t = r.uniform_in(0.0, 30.0);
            let t2 = r.uniform_in(0.0, 30.0);
            let (g, g2, ell) = (p.gamma[d], p.gamma[d2], p.latent_lengthscales[0]);
            let inner = |s: f64| simpson(&|s2: f64| (-g2 * (t2 - s2)).exp() * latent_kernel(ell, s, s2), 0.0, t2, 1e-11);
            let oracle = p.sens[(d, 0)] * p.sens[(d2, 0)] * simpson(&|s: f64| (-g * (t - s)).exp() * inner(s), 0.0, t, 1e-9);
            let closed = lfm_cross_cov(&p, d, d2, t, t2);
            worst = worst.max((closed - oracle).abs());
            assert!((closed - oracle).abs() < 1e-6, "closed {closed} oracle {oracle} γ=({g},{g2}) ℓ={ell} t=({t},{t2})");
        }
        assert!(worst < 1e-6);
    }

    #[test]
    fn latent_cross_cov_matches_single_quadrature() {
        let mut r = RngStream::new(12, 0).rng();
        for _ in 0..200 {
            let p = random_params(&mut r, 1);
            let t = r.uniform_in(0.0, 40.0);
            let s = r.uniform_in(-10.0, 50.0);
            let (g, ell) = (p.gamma[0], p.latent_lengthscales[0]);
            let oracle = p.sens[(0, 0)] * simpson(&|v: f64| (-g * (t - v)).exp() * latent_kernel(ell, v, s), 0.0, t, 1e-10);
            let closed = lfm_latent_cross_cov(&p, 0, 0, t, s);
            assert!((closed - oracle).abs() < 1e-6, "closed {closed} oracle {oracle}");
        }
    }

    #[test]
    fn stable_for_large_decay_lengthscale_products() {
        // γℓ/2 = 50: the naive exp·erf product overflows to garbage.
        let p = LfmParams::new(vec![5.0, 4.0], DMatrix::from_element(2, 1, 1.0), vec![20.0], vec![0.1; 2]).unwrap();
        let v = lfm_cross_cov(&p, 0, 1, 30.0, 31.0);
        assert!(v.is_finite() && v > 0.0);
        // For slow forces the output tracks u/γ, so the covariance nears k(t, t')/(γγ').
        let approx = latent_kernel(20.0, 30.0, 31.0) / 20.0;
        assert!((v - approx).abs() < 0.02 * approx, "{v} vs {approx}");
    }

    #[test]
    fn symmetry_and_zero_sensitivity() {
        let mut r = RngStream::new(13, 0).rng();
        for _ in 0..100 {
            let p = random_params(&mut r, 3);
            let (d, d2) = (r.below(3), r.below(3));
            let (t, t2) = (r.uniform_in(0.0, 50.0), r.uniform_in(0.0, 50.0));
            let a = lfm_cross_cov(&p, d, d2, t, t2);
            let b = lfm_cross_cov(&p, d2, d, t2, t);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        let mut p = random_params(&mut r, 2);
        p.sens[(1, 0)] = 0.0;
        assert_eq!(lfm_latent_cross_cov(&p, 1, 0, 5.0, 4.0), 0.0);
    }

    #[test]
    fn latent_cross_cov_decays_with_separation() {
        let mut r = RngStream::new(14, 0).rng();
        for _ in 0..50 {
            let p = random_params(&mut r, 1);
            let ell = p.latent_lengthscales[0];
            let t = 200.0 + r.uniform_in(0.0, 50.0);
            let grid: Vec<f64> = (0..2000).map(|i| i as f64 * 0.25).collect();
            let peak = grid.iter().map(|&s| lfm_latent_cross_cov(&p, 0, 0, t, s).abs()).fold(0.0, f64::max);
            let far = lfm_latent_cross_cov(&p, 0, 0, t, t + 10.0 * ell).abs();
            assert!(far < 1e-6 * peak, "far {far} peak {peak}");
            // Looking back, decay is exponential in the output's memory.
            let back = t - 10.0 * ell - 40.0 / p.gamma[0];
            assert!(lfm_latent_cross_cov(&p, 0, 0, t, back).abs() < 1e-6 * peak);
        }
    }

    #[test]
    fn joint_gram_is_psd() {
        let mut r = RngStream::new(15, 0).rng();
        for _ in 0..20 {
            let p = random_params(&mut r, 3);
            let pts: Vec<(usize, f64)> = (0..30).map(|_| (r.below(3), r.uniform_in(0.0, 60.0))).collect();
            let k = joint_gram(&p, &pts);
            let scale = k.diagonal().max().max(1e-300);
            let min_eig = k.symmetric_eigenvalues().min();
            assert!(min_eig >= -1e-8 * scale.max(1.0), "min eig {min_eig}");
        }
    }

    #[test]
    fn prior_posterior_and_variance_ordering() {
        let p = LfmParams::new(vec![0.2], DMatrix::from_element(1, 1, 1.0), vec![3.0], vec![0.01]).unwrap();
        let q: Vec<f64> = (0..20).map(|i| i as f64 * 3.0).collect();
        let prior = LfmPosterior::prior(&p).unwrap().latent(&q).unwrap();
        assert!(prior[0].0.iter().all(|m| *m == 0.0));
        assert!(prior[0].1.iter().all(|v| *v == 1.0));

        let times: Vec<f64> = (0..30).map(|i| i as f64 * 2.0).collect();
        let values: Vec<f64> = times.iter().map(|t| (t / 7.0).sin() + 2.0).collect();
        let mut data = MultiSeriesData::new(vec![Series::fully_observed(times.clone(), values.clone())]).unwrap();
        data.mask_interval(0, 20.0, 36.0);
        let post = LfmPosterior::new(&p, &data).unwrap();
        let lat = post.latent(&q).unwrap();
        assert!(lat[0].1.iter().all(|v| *v <= 1.0 + 1e-12));

        let (m, v) = post.predict(0, &[10.0, 28.0]).unwrap();
        assert!(v.iter().all(|x| *x > 0.0));
        assert!(v[1] > v[0]);
        assert!((m[0] - values[5]).abs() < 2.0 * v[0].sqrt());
    }

    #[test]
    fn vanishing_sensitivity_predicts_sample_mean() {
        let p = LfmParams::new(vec![0.1], DMatrix::from_element(1, 1, 1e-9), vec![2.0], vec![0.5]).unwrap();
        let times: Vec<f64> = (0..15).map(|i| 1.0 + i as f64).collect();
        let values: Vec<f64> = (0..15).map(|i| ((i * 7) % 5) as f64).collect();
        let data = MultiSeriesData::new(vec![Series::fully_observed(times, values.clone())]).unwrap();
        let (m, _) = lfm_predict(&p, &data, &[3.5, 40.0], 0).unwrap();
        let mean = stats::mean(&values);
        assert!(m.iter().all(|x| (x - mean).abs() < 1e-6), "{m:?} vs {mean}");
    }

    #[test]
    fn data_validation() {
        let bad = MultiSeriesData::new(vec![Series::fully_observed(vec![1.0, 1.0], vec![0.0, 0.0])]);
        assert!(bad.is_err());
        let mut s = Series::fully_observed(vec![1.0, 2.0], vec![0.0, 0.0]);
        s.observed = vec![false, false];
        assert!(MultiSeriesData::new(vec![s]).is_err());
    }

    #[test]
    fn exact_response_solves_the_ode() {
        let f = BumpForce {
            bumps: vec![(1.3, 10.0, 2.0), (0.4, 25.0, 3.5)],
            start: 0.0,
        };
        let (g, sens) = (0.15, 0.8);
        let dt = 1e-3;
        let mut x = 0.0;
        for i in 0..40_000 {
            let t = i as f64 * dt;
            let rhs = |t: f64, x: f64| sens * f.eval(t) - g * x;
            let k1 = rhs(t, x);
            let k2 = rhs(t + dt / 2.0, x + dt / 2.0 * k1);
            let k3 = rhs(t + dt / 2.0, x + dt / 2.0 * k2);
            let k4 = rhs(t + dt, x + dt * k3);
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((x - f.response(g, sens, 40.0)).abs() < 1e-9);
    }

    #[test]
    fn fit_never_loses_to_its_starts() {
        let cfg = PlantedConfig {
            taus: vec![6.0],
            sens: vec![1.0],
            n_obs: 30,
            horizon: 80.0,
            ..PlantedConfig::default()
        };
        let pl = make_planted(&cfg, &RngStream::new(3, 0)).unwrap();
        let fit = lfm_fit(&pl.data, &LfmFitConfig { budget: 300, ..LfmFitConfig::default() }, &RngStream::new(3, 1)).unwrap();
        assert!(fit.start_log_liks.iter().all(|s| fit.log_lik >= *s));
    }
}
