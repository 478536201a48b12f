//! Active emulation of the synthetic reflectance model with a multi-output GP
//! and an uncertainty-times-distance acquisition, plus random and Latin
//! hypercube baselines.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::ExactGp;
use crate::kernel::{gram, gram_sym, KernelConfig};
use crate::linalg::Cholesky;
use crate::optim::multi_start;
use crate::rng::{RngStream, StreamRng};
use crate::synth::{SyntheticRtm, CHL_RANGE, LAI_RANGE};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Cause box `[(lo, hi); 2]` for (Chl, LAI).
pub const CAUSE_BOX: [(f64, f64); 2] = [CHL_RANGE, LAI_RANGE];

fn to_unit(x: &[f64]) -> [f64; 2] {
    [
        (x[0] - CAUSE_BOX[0].0) / (CAUSE_BOX[0].1 - CAUSE_BOX[0].0),
        (x[1] - CAUSE_BOX[1].0) / (CAUSE_BOX[1].1 - CAUSE_BOX[1].0),
    ]
}

fn unit_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), 2, |i, j| to_unit(&[x[(i, 0)], x[(i, 1)]])[j])
}

/// Latin hypercube design: each of the `n` equal strata per dimension holds
/// exactly one point, strata paired by independent permutations.
pub fn lhs_sample(n: usize, bounds: &[(f64, f64)], rng: &mut StreamRng) -> Result<DMatrix<f64>> {
    if n == 0 || bounds.is_empty() {
        return Err(Error::input("lhs needs n >= 1 and at least one dimension"));
    }
    if bounds.iter().any(|(lo, hi)| !(hi > lo)) {
        return Err(Error::input("lhs bounds must satisfy lo < hi"));
    }
    let mut out = DMatrix::zeros(n, bounds.len());
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        for (i, &stratum) in perm.iter().enumerate() {
            let u = (stratum as f64 + rng.uniform()) / n as f64;
            out[(i, j)] = lo + (hi - lo) * u;
        }
    }
    Ok(out)
}

fn uniform_box(n: usize, rng: &mut StreamRng) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, 2);
    for i in 0..n {
        for (j, &(lo, hi)) in CAUSE_BOX.iter().enumerate() {
            out[(i, j)] = rng.uniform_in(lo, hi);
        }
    }
    out
}

/// `g × g` evaluation grid over the cause box, LAI varying fastest.
pub fn eval_grid(g: usize) -> DMatrix<f64> {
    let axis = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / (g - 1).max(1) as f64;
    DMatrix::from_fn(g * g, 2, |r, j| {
        if j == 0 {
            axis(CAUSE_BOX[0], r / g)
        } else {
            axis(CAUSE_BOX[1], r % g)
        }
    })
}

fn rtm_rows(rtm: &SyntheticRtm, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), rtm.n_bands);
    let mut buf = vec![0.0; rtm.n_bands];
    for i in 0..x.nrows() {
        rtm.eval_into(x[(i, 0)], x[(i, 1)], &mut buf);
        for (b, v) in buf.iter().enumerate() {
            out[(i, b)] = *v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    pub beta: f64,
    pub candidate_pool: usize,
    pub stop_rmse: Option<f64>,
    pub max_points: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            candidate_pool: 2000,
            stop_rmse: None,
            max_points: 60,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::input(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if self.candidate_pool < 100 {
            return Err(Error::input("candidate pool must hold at least 100 points"));
        }
        if let Some(s) = self.stop_rmse {
            if !(s > 0.0) {
                return Err(Error::input("stop_rmse must be positive"));
            }
        }
        Ok(())
    }
}

/// Shared GP hyperparameters in the unit box, over per-band standardized outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedHyper {
    pub kernel: KernelConfig,
    pub noise: f64,
}

/// Training set plus the fitted multi-output GP.
#[derive(Debug, Clone)]
pub struct EmulatorState {
    pub train_inputs: DMatrix<f64>,
    pub train_outputs: DMatrix<f64>,
    pub hyper: SharedHyper,
    pub iteration: usize,
    band_mean: Vec<f64>,
    band_sd: Vec<f64>,
    gps: Vec<ExactGp>,
    unit_inputs: DMatrix<f64>,
}

/// Noise variance floor on standardized outputs.
const MIN_NOISE: f64 = 1e-8;

fn standardize(y: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let n = y.nrows() as f64;
    let mut z = y.clone();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    for b in 0..y.ncols() {
        let m = y.column(b).sum() / n;
        let sd = (y.column(b).iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        let sd = if sd > 1e-12 { sd } else { 1.0 };
        for i in 0..y.nrows() {
            z[(i, b)] = (y[(i, b)] - m) / sd;
        }
        means.push(m);
        sds.push(sd);
    }
    (z, means, sds)
}

/// Summed log marginal likelihood of all standardized bands under one kernel.
fn shared_log_marginal(k: &DMatrix<f64>, noise: f64, z: &DMatrix<f64>) -> Result<f64> {
    let n = k.nrows();
    let mut c = k.clone();
    for i in 0..n {
        c[(i, i)] += noise;
    }
    let chol = Cholesky::new(&c, 0.0)?;
    let mut w = z.clone();
    chol.solve_lower_mut(&mut w);
    let bands = z.ncols() as f64;
    Ok(-0.5 * (w.norm_squared() + bands * (chol.log_det() + n as f64 * LN_2PI)))
}

fn unpack(p: &[f64]) -> Option<SharedHyper> {
    Some(SharedHyper {
        kernel: KernelConfig::new(vec![p[0].clamp(-7.0, 3.0).exp(), p[1].clamp(-7.0, 3.0).exp()], p[2].clamp(-6.0, 6.0).exp()).ok()?,
        noise: MIN_NOISE + p[3].clamp(-30.0, 0.0).exp(),
    })
}

fn pack(h: &SharedHyper) -> Vec<f64> {
    vec![
        h.kernel.lengthscales[0].ln(),
        h.kernel.lengthscales[1].ln(),
        h.kernel.signal_variance.ln(),
        (h.noise - MIN_NOISE).max(1e-300).ln(),
    ]
}

fn check_inputs(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n == 0 || y.nrows() != n || x.ncols() != 2 {
        return Err(Error::input("emulator needs 2-D cause rows matching the outputs"));
    }
    let u = unit_rows(x);
    for i in 0..n {
        for j in 0..i {
            let d = ((u[(i, 0)] - u[(j, 0)]).powi(2) + (u[(i, 1)] - u[(j, 1)]).powi(2)).sqrt();
            if d <= 1e-9 {
                return Err(Error::input(format!("duplicate training inputs at rows {j} and {i}")));
            }
        }
    }
    Ok(u)
}

/// Fits shared hyperparameters by summed marginal likelihood, starting from
/// `warm` when given, and conditions one GP per band.
pub fn fit_emulator(x: &DMatrix<f64>, y: &DMatrix<f64>, warm: Option<&SharedHyper>, budget: usize) -> Result<EmulatorState> {
    let u = check_inputs(x, y)?;
    if x.nrows() < 2 {
        return Err(Error::input("emulator fit needs at least two rows"));
    }
    let (z, _, _) = standardize(y);
    let mut objective = |p: &[f64]| -> f64 {
        let Some(h) = unpack(p) else { return f64::INFINITY };
        let Ok(k) = gram_sym(&h.kernel, &u) else { return f64::INFINITY };
        shared_log_marginal(&k, h.noise, &z).map(|v| -v).unwrap_or(f64::INFINITY)
    };
    let starts = match warm {
        Some(h) => vec![pack(h)],
        None => vec![vec![-1.0, -1.0, 0.0, -12.0], vec![-2.0, -2.0, 0.0, -16.0]],
    };
    let res = multi_start(&mut objective, &starts, 0.5, budget, 1e-9);
    if !res.value.is_finite() {
        return Err(Error::Fit("emulator marginal likelihood not finite at any start".into()));
    }
    let hyper = unpack(&res.x).ok_or_else(|| Error::Fit("invalid emulator hyperparameters".into()))?;
    EmulatorState::condition(x, y, hyper)
}

impl EmulatorState {
    /// Conditions per-band GPs at fixed shared hyperparameters.
    pub fn condition(x: &DMatrix<f64>, y: &DMatrix<f64>, hyper: SharedHyper) -> Result<Self> {
        let u = check_inputs(x, y)?;
        let n = x.nrows();
        let (z, band_mean, band_sd) = standardize(y);
        let gps = (0..y.ncols())
            .map(|b| ExactGp::condition(hyper.kernel.clone(), u.clone(), &z.column(b).into_owned(), DVector::from_element(n, hyper.noise), 0.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            train_inputs: x.clone(),
            train_outputs: y.clone(),
            hyper,
            iteration: 0,
            band_mean,
            band_sd,
            gps,
            unit_inputs: u,
        })
    }

    /// Predicted band outputs at cause rows `xq`.
    pub fn predict(&self, xq: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let u = unit_rows(xq);
        let ks = gram(&self.hyper.kernel, &self.unit_inputs, &u)?;
        let mut out = DMatrix::zeros(xq.nrows(), self.gps.len());
        for (b, gp) in self.gps.iter().enumerate() {
            let m = ks.transpose() * gp.weights();
            for i in 0..xq.nrows() {
                out[(i, b)] = self.band_mean[b] + self.band_sd[b] * m[i];
            }
        }
        Ok(out)
    }

    /// Band-mean predictive standard deviation of the latent outputs.
    pub fn mean_sd(&self, xq: &DMatrix<f64>) -> Result<DVector<f64>> {
        // all bands share kernel and inputs, so the standardized variance is common
        let (_, v) = self.gps[0].predict(&unit_rows(xq))?;
        let sd_scale = self.band_sd.iter().sum::<f64>() / self.band_sd.len() as f64;
        Ok(v.map(|v| v.sqrt() * sd_scale))
    }

    /// Distance in the unit box from each row of `xq` to the nearest training input.
    pub fn min_distance(&self, xq: &DMatrix<f64>) -> DVector<f64> {
        let u = unit_rows(xq);
        DVector::from_fn(xq.nrows(), |i, _| {
            (0..self.unit_inputs.nrows())
                .map(|j| ((u[(i, 0)] - self.unit_inputs[(j, 0)]).powi(2) + (u[(i, 1)] - self.unit_inputs[(j, 1)]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
    }

    pub fn len(&self) -> usize {
        self.train_inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn acquisition_rows(s: &EmulatorState, cfg: &AcquisitionConfig, xq: &DMatrix<f64>) -> Result<DVector<f64>> {
    let sd = s.mean_sd(xq)?;
    let d = s.min_distance(xq);
    Ok(DVector::from_fn(xq.nrows(), |i, _| {
        if d[i] == 0.0 {
            0.0
        } else {
            sd[i] * d[i].powf(cfg.beta)
        }
    }))
}

/// `A(x) = σ̄(x)·d_min(x)^β`.
pub fn acquisition_value(s: &EmulatorState, cfg: &AcquisitionConfig, x: &[f64]) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::input("acquisition point must be (chl, lai)"));
    }
    crate::synth::check_causes(x[0], x[1])?;
    Ok(acquisition_rows(s, cfg, &DMatrix::from_row_slice(1, 2, x))?[0])
}

/// Argmax of the acquisition over pools from `draw`; a second pool is drawn
/// if the first holds no point with positive acquisition.
pub fn select_from_pools<F>(s: &EmulatorState, cfg: &AcquisitionConfig, mut draw: F) -> Result<DVector<f64>>
where
    F: FnMut() -> DMatrix<f64>,
{
    for _ in 0..2 {
        let pool = draw();
        let a = acquisition_rows(s, cfg, &pool)?;
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &v) in a.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        if best.1 > 0.0 {
            return Ok(pool.row(best.0).transpose());
        }
    }
    Err(Error::Numerical("no informative candidate".into()))
}

pub fn select_next(s: &EmulatorState, cfg: &AcquisitionConfig, rng: &mut StreamRng) -> Result<DVector<f64>> {
    let m = cfg.candidate_pool;
    select_from_pools(s, cfg, || uniform_box(m, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Amogape,
    Lhs,
    Random,
}

impl SamplingMethod {
    pub const ALL: [SamplingMethod; 3] = [SamplingMethod::Amogape, SamplingMethod::Lhs, SamplingMethod::Random];

    pub fn name(self) -> &'static str {
        match self {
            SamplingMethod::Amogape => "AMOGAPE",
            SamplingMethod::Lhs => "LHS",
            SamplingMethod::Random => "Random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmulatorConfig {
    pub acquisition: AcquisitionConfig,
    pub init_n: usize,
    pub grid_size: usize,
    /// Nelder–Mead evaluations per hyperparameter refit.
    pub fit_budget: usize,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionConfig::default(),
            init_n: 5,
            grid_size: 70,
            fit_budget: 120,
        }
    }
}

fn grid_rmse(s: &EmulatorState, grid: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    let p = s.predict(grid)?;
    Ok(((p - truth).norm_squared() / truth.len() as f64).sqrt())
}

/// One emulator-building run; returns `(n_points, grid RMSE)` for every
/// training-set size from `init_n` up to the stop condition.
///
/// The active and random methods grow one design; the Latin hypercube method
/// draws a fresh design of each size.
pub fn run_active_loop(
    rtm: &SyntheticRtm,
    cfg: &EmulatorConfig,
    method: SamplingMethod,
    grid: &DMatrix<f64>,
    rng: &RngStream,
) -> Result<Vec<(usize, f64)>> {
    cfg.acquisition.validate()?;
    if cfg.init_n < 4 || cfg.acquisition.max_points < cfg.init_n {
        return Err(Error::input("active loop needs 4 <= init_n <= max_points"));
    }
    let truth = rtm_rows(rtm, grid);
    let mut r = rng.rng();
    let mut x = match method {
        SamplingMethod::Random => uniform_box(cfg.init_n, &mut r),
        _ => lhs_sample(cfg.init_n, &CAUSE_BOX, &mut r)?,
    };
    let mut warm: Option<SharedHyper> = None;
    let mut curve = Vec::new();
    loop {
        let y = rtm_rows(rtm, &x);
        let mut state = fit_emulator(&x, &y, warm.as_ref(), cfg.fit_budget)?;
        state.iteration = curve.len();
        let e = grid_rmse(&state, grid, &truth)?;
        curve.push((x.nrows(), e));
        let n = x.nrows();
        if n >= cfg.acquisition.max_points || cfg.acquisition.stop_rmse.is_some_and(|s| e <= s) {
            break;
        }
        let next = match method {
            SamplingMethod::Amogape => Some(select_next(&state, &cfg.acquisition, &mut r)?),
            SamplingMethod::Random => Some(uniform_box(1, &mut r).row(0).transpose()),
            SamplingMethod::Lhs => None,
        };
        warm = Some(state.hyper);
        x = match next {
            Some(p) => {
                let mut grown = x.clone().insert_row(n, 0.0);
                grown[(n, 0)] = p[0];
                grown[(n, 1)] = p[1];
                grown
            }
            None => lhs_sample(n + 1, &CAUSE_BOX, &mut r)?,
        };
    }
    Ok(curve)
}

/// Per-run curves for each method.
#[derive(Debug, Clone)]
pub struct EmulatorBench {
    /// `(method, run, n_points, rmse)` rows.
    pub rows: Vec<(SamplingMethod, usize, usize, f64)>,
    /// Mean curve per method in [`SamplingMethod::ALL`] order, indexed from `init_n`.
    pub mean_curves: Vec<Vec<(usize, f64)>>,
    /// Random sampling's mean RMSE at the largest design size.
    pub target_rmse: f64,
    /// First design size where each mean curve reaches the target, `None` if never.
    pub points_to_target: Vec<Option<usize>>,
}

/// Repeats the three sampling strategies `runs` times on the 2-cause RTM.
pub fn emulator_benchmark(rtm: &SyntheticRtm, cfg: &EmulatorConfig, runs: usize, seed: u64) -> Result<EmulatorBench> {
    if runs == 0 {
        return Err(Error::input("benchmark needs at least one run"));
    }
    let mut fixed = cfg.clone();
    fixed.acquisition.stop_rmse = None;
    let grid = eval_grid(cfg.grid_size);
    let mut rows = Vec::new();
    let mut mean_curves = Vec::new();
    for (mi, method) in SamplingMethod::ALL.iter().enumerate() {
        let mut sums: Vec<(usize, f64)> = Vec::new();
        for run in 0..runs {
            let stream = RngStream::new(seed, 0).child(mi as u64).child(run as u64);
            let curve = run_active_loop(rtm, &fixed, *method, &grid, &stream)?;
            if sums.is_empty() {
                sums = curve.iter().map(|&(n, _)| (n, 0.0)).collect();
            }
            for (k, &(n, e)) in curve.iter().enumerate() {
                sums[k].1 += e;
                rows.push((*method, run, n, e));
            }
        }
        mean_curves.push(sums.into_iter().map(|(n, s)| (n, s / runs as f64)).collect::<Vec<_>>());
    }
    let target_rmse = mean_curves[2].last().map(|p| p.1).unwrap_or(f64::NAN);
    let points_to_target = mean_curves
        .iter()
        .map(|c| c.iter().find(|p| p.1 <= target_rmse).map(|p| p.0))
        .collect();
    Ok(EmulatorBench {
        rows,
        mean_curves,
        target_rmse,
        points_to_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_state(points: &[[f64; 2]]) -> EmulatorState {
        let x = DMatrix::from_fn(points.len(), 2, |i, j| points[i][j]);
        let y = rtm_rows(&SyntheticRtm::default(), &x);
        fit_emulator(&x, &y, None, 200).unwrap()
    }

    #[test]
    fn lhs_is_stratified_and_deterministic() {
        for n in [1usize, 2, 7, 100, 1000] {
            let a = lhs_sample(n, &CAUSE_BOX, &mut RngStream::new(4, n as u64).rng()).unwrap();
            let b = lhs_sample(n, &CAUSE_BOX, &mut RngStream::new(4, n as u64).rng()).unwrap();
            assert_eq!(a, b);
            for (j, &(lo, hi)) in CAUSE_BOX.iter().enumerate() {
                let mut seen = vec![0usize; n];
                for i in 0..n {
                    let u = (a[(i, j)] - lo) / (hi - lo);
                    assert!((0.0..1.0).contains(&u));
                    seen[((u * n as f64) as usize).min(n - 1)] += 1;
                }
                assert!(seen.iter().all(|&c| c == 1), "n={n} dim={j}");
            }
        }
        assert!(lhs_sample(0, &CAUSE_BOX, &mut RngStream::new(0, 0).rng()).is_err());
    }

    #[test]
    fn acquisition_zero_at_training_and_beta_zero_is_sd() {
        let s = small_state(&[[10.0, 1.0], [40.0, 5.0], [70.0, 9.0], [20.0, 8.0], [60.0, 2.0]]);
        let cfg = AcquisitionConfig::default();
        assert_eq!(acquisition_value(&s, &cfg, &[40.0, 5.0]).unwrap(), 0.0);
        let x = [33.0, 3.3];
        let flat = AcquisitionConfig { beta: 0.0, ..cfg.clone() };
        let sd = s.mean_sd(&DMatrix::from_row_slice(1, 2, &x)).unwrap()[0];
        assert_eq!(acquisition_value(&s, &flat, &x).unwrap(), sd);
        assert!(acquisition_value(&s, &cfg, &x).unwrap() > 0.0);
        assert!(acquisition_value(&s, &cfg, &[90.0, 1.0]).is_err());
    }

    #[test]
    fn acquisition_grows_with_distance_from_single_point() {
        let x = DMatrix::from_row_slice(1, 2, &[40.0, 5.0]);
        let y = rtm_rows(&SyntheticRtm::default(), &x);
        let hyper = SharedHyper {
            kernel: KernelConfig::new(vec![0.2, 0.2], 1.0).unwrap(),
            noise: MIN_NOISE,
        };
        let s = EmulatorState::condition(&x, &y, hyper).unwrap();
        let cfg = AcquisitionConfig::default();
        // scan along the chl axis out to 3 lengthscales (0.6 of the unit box = 48 mg)
        let vals: Vec<f64> = (0..=48).map(|k| acquisition_value(&s, &cfg, &[40.0 - k as f64 * 0.8, 5.0]).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }

    #[test]
    fn selection_is_argmax_and_leaves_the_cluster() {
        let mut outside = 0;
        for seed in 0..20u64 {
            let mut r = RngStream::new(seed, 9).rng();
            let pts: Vec<[f64; 2]> = (0..6).map(|_| [r.uniform_in(36.0, 44.0), r.uniform_in(4.5, 5.5)]).collect();
            // fixed lengthscales so the one-lengthscale ball stays inside the box
            let x = DMatrix::from_fn(6, 2, |i, j| pts[i][j]);
            let hyper = SharedHyper {
                kernel: KernelConfig::new(vec![0.25, 0.25], 1.0).unwrap(),
                noise: MIN_NOISE,
            };
            let s = EmulatorState::condition(&x, &rtm_rows(&SyntheticRtm::default(), &x), hyper).unwrap();
            let cfg = AcquisitionConfig::default();
            let mut pool_copy = DMatrix::zeros(0, 2);
            let chosen = select_from_pools(&s, &cfg, || {
                pool_copy = uniform_box(cfg.candidate_pool, &mut r);
                pool_copy.clone()
            })
            .unwrap();
            let best = acquisition_value(&s, &cfg, chosen.as_slice()).unwrap();
            for i in 0..pool_copy.nrows() {
                let v = acquisition_value(&s, &cfg, &[pool_copy[(i, 0)], pool_copy[(i, 1)]]).unwrap();
                assert!(best >= v);
            }
            let ls = s.hyper.kernel.lengthscales.clone();
            let c = to_unit(chosen.as_slice());
            let centre = to_unit(&[40.0, 5.0]);
            let scaled = (((c[0] - centre[0]) / ls[0]).powi(2) + ((c[1] - centre[1]) / ls[1]).powi(2)).sqrt();
            if scaled > 1.0 {
                outside += 1;
            }
        }
        assert!(outside >= 18, "{outside}/20");
    }

    #[test]
    fn degenerate_pool_reports_no_informative_candidate() {
        let s = small_state(&[[10.0, 1.0], [40.0, 5.0], [70.0, 9.0], [20.0, 8.0]]);
        let train = s.train_inputs.clone();
        let mut calls = 0;
        let err = select_from_pools(&s, &AcquisitionConfig::default(), || {
            calls += 1;
            train.clone()
        })
        .unwrap_err();
        assert_eq!(calls, 2);
        assert!(err.to_string().contains("no informative candidate"));
    }

    #[test]
    fn short_loop_curve_is_finite_and_improves() {
        let cfg = EmulatorConfig {
            acquisition: AcquisitionConfig { max_points: 20, candidate_pool: 300, ..Default::default() },
            grid_size: 20,
            ..Default::default()
        };
        let grid = eval_grid(cfg.grid_size);
        for method in SamplingMethod::ALL {
            let curve = run_active_loop(&SyntheticRtm::default(), &cfg, method, &grid, &RngStream::new(1, 0)).unwrap();
            assert_eq!(curve.len(), 16);
            assert!(curve.iter().enumerate().all(|(k, &(n, e))| n == 5 + k && e.is_finite()));
            assert!(curve.last().unwrap().1 < curve[0].1, "{method:?}: {curve:?}");
        }
        let stop = EmulatorConfig {
            acquisition: AcquisitionConfig { stop_rmse: Some(1e3), ..cfg.acquisition.clone() },
            ..cfg.clone()
        };
        assert_eq!(run_active_loop(&SyntheticRtm::default(), &stop, SamplingMethod::Amogape, &grid, &RngStream::new(1, 0)).unwrap().len(), 1);
    }

    #[test]
    fn duplicate_inputs_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 5.0, 5.0]);
        let y = rtm_rows(&SyntheticRtm::default(), &x);
        assert!(fit_emulator(&x, &y, None, 10).unwrap_err().is_validation());
    }
}
