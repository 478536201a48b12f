//! Gridded piecewise-linear proposals for univariate conditionals, and a
//! Gibbs sampler that uses them with a Metropolis–Hastings correction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};
use crate::synth::{logistic_simulate, LogisticMapParams};

/// Log relative density floor for finite grid values.
const LOG_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FussConfig {
    pub n_grid: usize,
    /// Points more than this many log units below the maximum are pruned.
    pub prune_drop: f64,
    /// Retained runs with fewer points are re-gridded between their neighbours.
    pub min_run: usize,
    pub max_refine: usize,
    /// Points in each re-gridded interval.
    pub n_refine: usize,
}

impl Default for FussConfig {
    fn default() -> Self {
        Self {
            n_grid: 512,
            prune_drop: 15.0,
            min_run: 16,
            max_refine: 6,
            n_refine: 128,
        }
    }
}

impl FussConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid < 8 || self.n_refine < 8 {
            return Err(Error::input(format!(
                "n_grid = {} and n_refine = {} must be at least 8",
                self.n_grid, self.n_refine
            )));
        }
        if !(self.prune_drop > 0.0) {
            return Err(Error::input("prune_drop must be positive"));
        }
        Ok(())
    }
}

/// Normalized piecewise-linear density on `support`.
#[derive(Debug, Clone)]
pub struct GridProposal {
    pub support: (f64, f64),
    pub nodes: Vec<f64>,
    pub density_values: Vec<f64>,
    /// CDF at each node; first entry 0, last entry 1.
    pub segment_cdf: Vec<f64>,
}

impl GridProposal {
    /// Builds the interpolant through `(nodes, log_values)`; values are shifted by their maximum.
    pub fn from_log_values(support: (f64, f64), nodes: Vec<f64>, log_values: &[f64]) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != log_values.len() {
            return Err(Error::input("proposal needs at least two nodes with matching values"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("proposal nodes must be strictly increasing"));
        }
        let max = log_values.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical("log target is -inf at every grid point".into()));
        }
        let mut dens: Vec<f64> = log_values
            .iter()
            .map(|&l| if l.is_finite() { (l - max).max(LOG_FLOOR).exp() } else { 0.0 })
            .collect();
        let mut cdf = vec![0.0; nodes.len()];
        for i in 1..nodes.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i - 1] + dens[i]) * (nodes[i] - nodes[i - 1]);
        }
        let total = cdf[nodes.len() - 1];
        if !(total > 0.0) {
            return Err(Error::Numerical("proposal has zero mass".into()));
        }
        dens.iter_mut().for_each(|d| *d /= total);
        cdf.iter_mut().for_each(|c| *c /= total);
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self {
            support,
            nodes,
            density_values: dens,
            segment_cdf: cdf,
        })
    }

    /// Index of the segment containing `x`, clamped to the node range.
    fn segment(&self, x: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.nodes[0] || x > *self.nodes.last().unwrap() {
            return 0.0;
        }
        let i = self.segment(x);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let w = (x - x0) / (x1 - x0);
        self.density_values[i] * (1.0 - w) + self.density_values[i + 1] * w
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.nodes[0] {
            return 0.0;
        }
        if x >= *self.nodes.last().unwrap() {
            return 1.0;
        }
        let i = self.segment(x);
        let s = x - self.nodes[i];
        let slope = (self.density_values[i + 1] - self.density_values[i]) / (self.nodes[i + 1] - self.nodes[i]);
        self.segment_cdf[i] + self.density_values[i] * s + 0.5 * slope * s * s
    }

    /// Exact inverse CDF: locate the segment, then solve its quadratic.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let n = self.nodes.len();
        let u = u.clamp(0.0, 1.0);
        let i = match self.segment_cdf.binary_search_by(|c| c.total_cmp(&u)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (f0, f1) = (self.density_values[i], self.density_values[i + 1]);
        let c = (u - self.segment_cdf[i]).max(0.0);
        let slope = (f1 - f0) / (x1 - x0);
        let disc = (f0 * f0 + 2.0 * slope * c).max(0.0);
        let denom = f0 + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * c / denom } else { 0.0 };
        (x0 + s).clamp(x0, x1)
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.inverse_cdf(rng.uniform())
    }

    /// Trapezoid mass of the stored density values.
    pub fn mass(&self) -> f64 {
        self.nodes
            .windows(2)
            .zip(self.density_values.windows(2))
            .map(|(x, f)| 0.5 * (f[0] + f[1]) * (x[1] - x[0]))
            .sum()
    }
}

/// Sorted `(x, log π(x))` evaluations.
type Evals = Vec<(f64, f64)>;

fn uniform_evals<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, n: usize) -> Evals {
    (0..n)
        .map(|i| {
            let x = if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 };
            (x, f(x))
        })
        .collect()
}

fn retained(evals: &Evals, drop: f64) -> Vec<bool> {
    let max = evals.iter().map(|e| e.1).filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    evals.iter().map(|e| e.1.is_finite() && e.1 >= max - drop).collect()
}

/// Maximal runs `[start, end]` of retained indices.
fn runs(keep: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < keep.len() {
        if keep[i] {
            let s = i;
            while i + 1 < keep.len() && keep[i + 1] {
                i += 1;
            }
            out.push((s, i));
        }
        i += 1;
    }
    out
}

/// Builds a proposal for `log_target` on `support`.
///
/// A uniform grid is evaluated and points below `max − prune_drop` are
/// dropped, keeping the support endpoints and one neighbour on each side of
/// every retained run. Runs with fewer than `min_run` points are re-gridded
/// between their neighbours, up to `max_refine` rounds.
pub fn fuss_build<F: FnMut(f64) -> f64>(log_target: &mut F, support: (f64, f64), cfg: &FussConfig) -> Result<GridProposal> {
    cfg.validate()?;
    let (a, b) = support;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::input(format!("support [{a}, {b}] must be finite and non-empty")));
    }
    let mut evals = uniform_evals(log_target, a, b, cfg.n_grid);
    if evals.iter().all(|e| !e.1.is_finite()) {
        return Err(Error::Numerical("log target is -inf at every grid point".into()));
    }
    let min_width = 1e-12 * (b - a);
    for _ in 0..cfg.max_refine {
        let keep = retained(&evals, cfg.prune_drop);
        let mut fresh: Evals = Vec::new();
        for (s, e) in runs(&keep) {
            if e - s + 1 >= cfg.min_run {
                continue;
            }
            let lo = evals[s.saturating_sub(1)].0;
            let hi = evals[(e + 1).min(evals.len() - 1)].0;
            if hi - lo <= min_width {
                continue;
            }
            fresh.extend(uniform_evals(log_target, lo, hi, cfg.n_refine));
        }
        if fresh.is_empty() {
            break;
        }
        evals.extend(fresh);
        evals.sort_by(|x, y| x.0.total_cmp(&y.0));
        evals.dedup_by(|x, y| x.0 == y.0);
    }
    let keep = retained(&evals, cfg.prune_drop);
    let n = evals.len();
    let mut node = vec![false; n];
    node[0] = true;
    node[n - 1] = true;
    for i in 0..n {
        if keep[i] {
            node[i] = true;
            if i > 0 {
                node[i - 1] = true;
            }
            if i + 1 < n {
                node[i + 1] = true;
            }
        }
    }
    let (xs, ls): (Vec<f64>, Vec<f64>) = evals.iter().zip(&node).filter(|(_, k)| **k).map(|(e, _)| *e).unzip();
    GridProposal::from_log_values(support, xs, &ls)
}

/// Metropolis–Hastings acceptance for an independence proposal, in log space.
pub fn independence_accept(log_pi_new: f64, log_pi_cur: f64, log_q_new: f64, log_q_cur: f64, u: f64) -> bool {
    if !log_pi_new.is_finite() {
        return false;
    }
    let log_ratio = log_pi_new - log_pi_cur + log_q_cur - log_q_new;
    log_ratio >= 0.0 || u.ln() < log_ratio
}

/// One MH step with proposal `p`; returns the next state and whether it moved.
pub fn fuss_sample<F: FnMut(f64) -> f64>(
    p: &GridProposal,
    log_target: &mut F,
    current: f64,
    rng: &mut StreamRng,
) -> (f64, bool) {
    let lc = log_target(current);
    let (x, _, acc) = fuss_step(p, log_target, current, lc, rng);
    (x, acc)
}

fn fuss_step<F: FnMut(f64) -> f64>(
    p: &GridProposal,
    log_target: &mut F,
    current: f64,
    log_current: f64,
    rng: &mut StreamRng,
) -> (f64, f64, bool) {
    let cand = p.sample(rng);
    let lp = log_target(cand);
    let u = rng.uniform();
    if independence_accept(lp, log_current, p.pdf(cand).ln(), p.pdf(current).ln(), u) {
        (cand, lp, true)
    } else {
        (current, log_current, false)
    }
}

/// A target whose univariate full conditionals can be evaluated.
pub trait GibbsTarget {
    fn dim(&self) -> usize;
    fn support(&self, d: usize) -> (f64, f64);
    /// Log full conditional of coordinate `d`, up to a constant, with the rest of `x` fixed.
    fn conditional<'a>(&'a self, d: usize, x: &[f64]) -> Box<dyn Fn(f64) -> f64 + 'a>;
}

/// Target given by a joint log density on a box.
pub struct JointTarget<F: Fn(&[f64]) -> f64> {
    pub supports: Vec<(f64, f64)>,
    pub log_density: F,
}

impl<F: Fn(&[f64]) -> f64> GibbsTarget for JointTarget<F> {
    fn dim(&self) -> usize {
        self.supports.len()
    }

    fn support(&self, d: usize) -> (f64, f64) {
        self.supports[d]
    }

    fn conditional<'a>(&'a self, d: usize, x: &[f64]) -> Box<dyn Fn(f64) -> f64 + 'a> {
        let x = x.to_vec();
        Box::new(move |v| {
            let mut y = x.clone();
            y[d] = v;
            (self.log_density)(&y)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerMethod {
    #[serde(rename = "FUSS")]
    Fuss,
    #[serde(rename = "PlainMH")]
    PlainMh,
}

impl SamplerMethod {
    pub const ALL: [SamplerMethod; 2] = [SamplerMethod::Fuss, SamplerMethod::PlainMh];

    pub fn name(self) -> &'static str {
        match self {
            SamplerMethod::Fuss => "FUSS",
            SamplerMethod::PlainMh => "PlainMH",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsConfig {
    pub iters: usize,
    pub burn_in: usize,
    pub fuss: FussConfig,
    /// Random-walk scale as a fraction of the support width.
    pub rw_frac: f64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iters: 5000,
            burn_in: 500,
            fuss: FussConfig::default(),
            rw_frac: 1.0 / 20.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GibbsChain {
    /// One row per sweep, burn-in included.
    pub states: DMatrix<f64>,
    pub accepted: Vec<usize>,
    pub proposed: Vec<usize>,
    pub burn_in: usize,
}

impl GibbsChain {
    pub fn acceptance(&self, d: usize) -> f64 {
        self.accepted[d] as f64 / self.proposed[d].max(1) as f64
    }

    pub fn kept(&self, d: usize) -> Vec<f64> {
        self.states.column(d).iter().skip(self.burn_in).copied().collect()
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        (0..self.states.ncols()).map(|d| crate::stats::mean(&self.kept(d))).collect()
    }
}

/// Systematic-scan Gibbs from `x0`.
///
/// FUSS rebuilds the proposal of every conditional at every sweep; PlainMH
/// takes one Gaussian random-walk step with scale `rw_frac·width`.
pub fn gibbs_run<T: GibbsTarget + ?Sized>(
    target: &T,
    x0: &[f64],
    cfg: &GibbsConfig,
    method: SamplerMethod,
    rng: &RngStream,
) -> Result<GibbsChain> {
    let dim = target.dim();
    if x0.len() != dim || dim == 0 {
        return Err(Error::input(format!("start has {} coordinates, target {}", x0.len(), dim)));
    }
    if cfg.iters <= cfg.burn_in {
        return Err(Error::input(format!("iters {} must exceed burn_in {}", cfg.iters, cfg.burn_in)));
    }
    if !(cfg.rw_frac > 0.0) {
        return Err(Error::input("rw_frac must be positive"));
    }
    cfg.fuss.validate()?;
    for (d, &v) in x0.iter().enumerate() {
        let (a, b) = target.support(d);
        if !(v >= a && v <= b) {
            return Err(Error::input(format!("start coordinate {d} = {v} outside [{a}, {b}]")));
        }
    }
    let mut r = rng.rng();
    let mut x = x0.to_vec();
    let mut states = DMatrix::zeros(cfg.iters, dim);
    let mut accepted = vec![0; dim];
    let proposed = vec![cfg.iters; dim];
    for it in 0..cfg.iters {
        for d in 0..dim {
            let support = target.support(d);
            let f = target.conditional(d, &x);
            let mut f = |v: f64| f(v);
            let lc = f(x[d]);
            if !lc.is_finite() {
                return Err(Error::Numerical(format!("current state has -inf log density at coordinate {d}")));
            }
            let moved = match method {
                SamplerMethod::Fuss => {
                    let p = fuss_build(&mut f, support, &cfg.fuss)?;
                    let (v, _, acc) = fuss_step(&p, &mut f, x[d], lc, &mut r);
                    x[d] = v;
                    acc
                }
                SamplerMethod::PlainMh => {
                    let cand = x[d] + cfg.rw_frac * (support.1 - support.0) * r.normal();
                    let u = r.uniform();
                    if cand < support.0 || cand > support.1 {
                        false
                    } else {
                        let lp = f(cand);
                        let ok = lp.is_finite() && (lp >= lc || u.ln() < lp - lc);
                        if ok {
                            x[d] = cand;
                        }
                        ok
                    }
                }
            };
            if moved {
                accepted[d] += 1;
            }
        }
        for d in 0..dim {
            states[(it, d)] = x[d];
        }
    }
    Ok(GibbsChain {
        states,
        accepted,
        proposed,
        burn_in: cfg.burn_in,
    })
}

/// Posterior of `(R, Ω)` for the noisy logistic map under a uniform prior on `(0, upper]²`.
///
/// Residuals `log y_{t+1} − log(R·y_t·(1 − y_t/Ω))` are `N(0, λ²)`;
/// a non-positive map argument has zero likelihood.
#[derive(Debug, Clone)]
pub struct LogisticPosterior {
    y: Vec<f64>,
    /// `log y_{t+1} − log y_t`.
    dlog: Vec<f64>,
    lambda: f64,
    upper: f64,
    y_max: f64,
}

impl LogisticPosterior {
    pub fn new(series: &[f64], lambda: f64, upper: f64) -> Result<Self> {
        if series.len() < 2 {
            return Err(Error::input("series needs at least two values"));
        }
        if series.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::input("series values must be positive and finite"));
        }
        if !(lambda > 0.0) || !(upper > 0.0) {
            return Err(Error::input("λ and the prior upper bound must be positive"));
        }
        let y = series[..series.len() - 1].to_vec();
        let dlog = series.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
        let y_max = y.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            y,
            dlog,
            lambda,
            upper,
            y_max,
        })
    }

    fn in_box(&self, v: f64) -> bool {
        v > 0.0 && v <= self.upper
    }

    /// `c_t = log y_{t+1} − log y_t − log(1 − y_t/Ω)`; `None` when infeasible.
    fn shifted(&self, omega: f64) -> Option<Vec<f64>> {
        if omega <= self.y_max {
            return None;
        }
        self.y
            .iter()
            .zip(&self.dlog)
            .map(|(&y, &d)| {
                let arg = 1.0 - y / omega;
                (arg > 0.0).then(|| d - arg.ln())
            })
            .collect()
    }

    pub fn log_density(&self, r: f64, omega: f64) -> f64 {
        if !self.in_box(r) || !self.in_box(omega) {
            return f64::NEG_INFINITY;
        }
        if omega <= self.y_max {
            return f64::NEG_INFINITY;
        }
        let lr = r.ln();
        let ss: f64 = self
            .y
            .iter()
            .zip(&self.dlog)
            .map(|(&y, &d)| (d - (1.0 - y / omega).ln() - lr).powi(2))
            .sum();
        -ss / (2.0 * self.lambda * self.lambda)
    }
}

impl GibbsTarget for LogisticPosterior {
    fn dim(&self) -> usize {
        2
    }

    fn support(&self, _d: usize) -> (f64, f64) {
        (0.0, self.upper)
    }

    fn conditional<'a>(&'a self, d: usize, x: &[f64]) -> Box<dyn Fn(f64) -> f64 + 'a> {
        let inv = 1.0 / (2.0 * self.lambda * self.lambda);
        if d == 0 {
            // R enters only through log R: reduce to sufficient statistics.
            let omega = x[1];
            let stats = self.in_box(omega).then(|| self.shifted(omega)).flatten().map(|c| {
                let s1: f64 = c.iter().sum();
                let s2: f64 = c.iter().map(|v| v * v).sum();
                (s1, s2, c.len() as f64)
            });
            Box::new(move |r| match stats {
                Some((s1, s2, n)) if self.in_box(r) => {
                    let lr = r.ln();
                    -(s2 - 2.0 * lr * s1 + n * lr * lr) * inv
                }
                _ => f64::NEG_INFINITY,
            })
        } else {
            let r = x[0];
            Box::new(move |omega| self.log_density(r, omega))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticExperimentConfig {
    pub truth: LogisticMapParams,
    pub trials: usize,
    pub gibbs: GibbsConfig,
    pub prior_upper: f64,
    /// R at which the Ω conditional is sliced.
    pub slice_r: f64,
    pub slice_points: usize,
}

impl Default for LogisticExperimentConfig {
    fn default() -> Self {
        Self {
            truth: LogisticMapParams::default(),
            trials: 50,
            gibbs: GibbsConfig::default(),
            prior_upper: 10.0,
            slice_r: 4.0,
            slice_points: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub method: SamplerMethod,
    pub trial: usize,
    pub r_hat: f64,
    pub omega_hat: f64,
    pub sq_err_r: f64,
    pub sq_err_omega: f64,
    pub acc_r: f64,
    pub acc_omega: f64,
}

#[derive(Debug, Clone)]
pub struct LogisticExperiment {
    pub rows: Vec<EstimateRow>,
    /// Per-method `[MSE_R, MSE_Ω]`, in [`SamplerMethod::ALL`] order.
    pub mse: Vec<[f64; 2]>,
}

impl LogisticExperiment {
    pub fn mse_of(&self, m: SamplerMethod) -> [f64; 2] {
        self.mse[SamplerMethod::ALL.iter().position(|x| *x == m).unwrap()]
    }
}

/// Simulates a series, resampling on the next substream after a divergence.
pub fn simulate_series(truth: &LogisticMapParams, rng: &RngStream) -> Result<Vec<f64>> {
    for k in 0..100 {
        match logistic_simulate(truth, &rng.child(k)) {
            Ok(y) if y.iter().all(|v| *v > 0.0) => return Ok(y.iter().copied().collect()),
            Ok(_) | Err(Error::Divergence { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numerical("logistic map diverged on 100 consecutive substreams".into()))
}

/// Uniform draw from the prior box with finite posterior density.
pub fn feasible_start(post: &LogisticPosterior, rng: &mut StreamRng) -> Result<[f64; 2]> {
    for _ in 0..100_000 {
        let x = [rng.uniform_in(0.0, post.upper), rng.uniform_in(0.0, post.upper)];
        if post.log_density(x[0], x[1]).is_finite() {
            return Ok(x);
        }
    }
    Err(Error::Numerical("no feasible start found in the prior box".into()))
}

/// Runs both samplers on the `(R, Ω)` posterior of independent simulated series.
pub fn logistic_posterior_experiment(cfg: &LogisticExperimentConfig, rng: &RngStream) -> Result<LogisticExperiment> {
    cfg.truth.validate()?;
    if cfg.trials == 0 {
        return Err(Error::input("need at least one trial"));
    }
    let (r0, o0) = (cfg.truth.r, cfg.truth.omega);
    if r0 > cfg.prior_upper || o0 > cfg.prior_upper {
        return Err(Error::input("truth lies outside the prior box"));
    }
    let mut rows = Vec::new();
    for trial in 0..cfg.trials {
        let stream = rng.child(trial as u64);
        let y = simulate_series(&cfg.truth, &stream.child(0))?;
        let post = LogisticPosterior::new(&y, cfg.truth.lambda_noise.max(f64::MIN_POSITIVE), cfg.prior_upper)?;
        let x0 = feasible_start(&post, &mut stream.child(1).rng())?;
        for (mi, &m) in SamplerMethod::ALL.iter().enumerate() {
            let chain = gibbs_run(&post, &x0, &cfg.gibbs, m, &stream.child(2 + mi as u64))?;
            let est = chain.posterior_mean();
            rows.push(EstimateRow {
                method: m,
                trial,
                r_hat: est[0],
                omega_hat: est[1],
                sq_err_r: (est[0] - r0).powi(2),
                sq_err_omega: (est[1] - o0).powi(2),
                acc_r: chain.acceptance(0),
                acc_omega: chain.acceptance(1),
            });
        }
    }
    let mse = SamplerMethod::ALL
        .iter()
        .map(|m| {
            let sel: Vec<&EstimateRow> = rows.iter().filter(|r| r.method == *m).collect();
            let k = sel.len() as f64;
            [
                sel.iter().map(|r| r.sq_err_r).sum::<f64>() / k,
                sel.iter().map(|r| r.sq_err_omega).sum::<f64>() / k,
            ]
        })
        .collect();
    Ok(LogisticExperiment { rows, mse })
}

/// `(Ω, log conditional, conditional / max)` on a uniform grid over `(0, upper]` at fixed R.
pub fn conditional_slice(post: &LogisticPosterior, r: f64, n: usize) -> Vec<(f64, f64, f64)> {
    let xs: Vec<f64> = (1..=n).map(|i| post.upper * i as f64 / n as f64).collect();
    let ls: Vec<f64> = xs.iter().map(|&o| post.log_density(r, o)).collect();
    let max = ls.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    xs.into_iter()
        .zip(ls)
        .map(|(x, l)| (x, l, if max.is_finite() { (l - max).exp() } else { 0.0 }))
        .collect()
}

/// A single-coordinate target: one conditional held fixed.
pub struct FixedConditional<'a> {
    pub support: (f64, f64),
    pub log_density: Box<dyn Fn(f64) -> f64 + 'a>,
}

impl GibbsTarget for FixedConditional<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn support(&self, _d: usize) -> (f64, f64) {
        self.support
    }

    fn conditional<'b>(&'b self, _d: usize, _x: &[f64]) -> Box<dyn Fn(f64) -> f64 + 'b> {
        Box::new(|v| (self.log_density)(v))
    }
}
