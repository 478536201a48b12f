//! Gaussian prior over causes learned from observed effects by Monte-Carlo
//! EM, with a component-wise random-walk Metropolis posterior sampler.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::rng::RngStream;
use crate::synth::{SyntheticRtm, CHL_RANGE, LAI_RANGE};

/// Forward map `f(c)` from causes to effects.
#[derive(Debug, Clone, PartialEq)]
pub enum Forward {
    Rtm(SyntheticRtm),
    /// `f(c) = A c + b`, used as a conjugate test stub.
    Linear { a: DMatrix<f64>, b: DVector<f64> },
}

/// `e = f(c) + ε`, `ε ~ N(0, σ²I)`, with causes confined to a box.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    pub forward: Forward,
    pub sigma: f64,
    pub cause_box: Vec<(f64, f64)>,
}

impl ObservationModel {
    /// Synthetic RTM over (Chl, LAI).
    pub fn rtm(rtm: SyntheticRtm, sigma: f64) -> Result<Self> {
        Self::new(Forward::Rtm(rtm), sigma, vec![CHL_RANGE, LAI_RANGE])
    }

    /// Linear stub on an unbounded cause space.
    pub fn linear(a: DMatrix<f64>, b: DVector<f64>, sigma: f64) -> Result<Self> {
        if b.len() != a.nrows() {
            return Err(Error::input("linear forward: offset length differs from rows of A"));
        }
        let d = a.ncols();
        Self::new(Forward::Linear { a, b }, sigma, vec![(f64::NEG_INFINITY, f64::INFINITY); d])
    }

    fn new(forward: Forward, sigma: f64, cause_box: Vec<(f64, f64)>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::input(format!("effect noise sd must be positive, got {sigma}")));
        }
        Ok(Self { forward, sigma, cause_box })
    }

    pub fn d_c(&self) -> usize {
        self.cause_box.len()
    }

    pub fn d_e(&self) -> usize {
        match &self.forward {
            Forward::Rtm(r) => r.n_bands,
            Forward::Linear { a, .. } => a.nrows(),
        }
    }

    pub fn eval_into(&self, c: &[f64], out: &mut [f64]) {
        match &self.forward {
            Forward::Rtm(r) => r.eval_into(c[0], c[1], out),
            Forward::Linear { a, b } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = b[i] + (0..a.ncols()).map(|j| a[(i, j)] * c[j]).sum::<f64>();
                }
            }
        }
    }

    pub fn in_box(&self, c: &[f64]) -> bool {
        c.iter().zip(&self.cause_box).all(|(v, (lo, hi))| (lo..=hi).contains(&v))
    }

    /// `−‖e − f(c)‖² / (2σ²)`.
    pub fn log_likelihood(&self, c: &[f64], e: &[f64], buf: &mut [f64]) -> f64 {
        self.eval_into(c, buf);
        let s2 = self.sigma * self.sigma;
        -0.5 * buf.iter().zip(e).map(|(f, e)| (e - f).powi(2)).sum::<f64>() / s2
    }
}

/// Gaussian prior `N(m, S)` over causes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausePrior {
    pub m: Vec<f64>,
    /// Row-major `d × d`.
    pub s: Vec<f64>,
}

impl CausePrior {
    pub fn new(m: Vec<f64>, s: DMatrix<f64>) -> Result<Self> {
        let d = m.len();
        if s.shape() != (d, d) {
            return Err(Error::input("prior covariance shape does not match the mean"));
        }
        let p = Self {
            m,
            s: s.transpose().as_slice().to_vec(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn cov(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.s)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.s.len() != d * d || self.m.iter().chain(&self.s).any(|v| !v.is_finite()) {
            return Err(Error::input("prior must have finite mean and a d×d covariance"));
        }
        let s = self.cov();
        if (&s - s.transpose()).abs().max() > 1e-9 * s.abs().max().max(1.0) {
            return Err(Error::input("prior covariance is not symmetric"));
        }
        Cholesky::new(&s, 0.0)?;
        Ok(())
    }
}

/// Prior precision with its Cholesky factor validated.
struct PriorTerm {
    m: Vec<f64>,
    prec: DMatrix<f64>,
}

impl PriorTerm {
    fn new(p: &CausePrior) -> Result<Self> {
        let chol = Cholesky::new(&p.cov(), 0.0)?;
        Ok(Self {
            m: p.m.clone(),
            prec: chol.inverse(),
        })
    }

    fn log_density(&self, c: &[f64]) -> f64 {
        let d = self.m.len();
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += (c[i] - self.m[i]) * self.prec[(i, j)] * (c[j] - self.m[j]);
            }
        }
        -0.5 * q
    }
}

/// `log N(e | f(c), σ²I) + log N(c | m, S)` with all c-independent constants dropped.
pub fn log_posterior_unnorm(c: &[f64], e: &[f64], om: &ObservationModel, prior: &CausePrior) -> Result<f64> {
    if c.len() != om.d_c() || e.len() != om.d_e() || prior.dim() != om.d_c() {
        return Err(Error::input("cause, effect and prior dimensions do not match the model"));
    }
    let term = PriorTerm::new(prior)?;
    let mut buf = vec![0.0; om.d_e()];
    Ok(om.log_likelihood(c, e, &mut buf) + term.log_density(c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub draws: usize,
    pub burn_in: usize,
    /// Burn-in sweeps between step-size adjustments.
    pub adapt_every: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            draws: 200,
            burn_in: 200,
            adapt_every: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    /// `K × d_c`.
    pub draws: DMatrix<f64>,
    pub acceptance_rate: f64,
    /// Adapted per-component proposal sd.
    pub steps: Vec<f64>,
}

fn initial_steps(om: &ObservationModel, prior: &CausePrior) -> Vec<f64> {
    let s = prior.cov();
    (0..om.d_c()).map(|i| 0.5 * s[(i, i)].sqrt()).collect()
}

/// Component-wise random-walk Metropolis from `start` with `steps`; proposals
/// outside the cause box are rejected.
fn run_chain(
    e: &[f64],
    om: &ObservationModel,
    term: &PriorTerm,
    cfg: &SamplerConfig,
    start: &[f64],
    steps: &[f64],
    rng: &RngStream,
) -> Result<PosteriorSamples> {
    if cfg.draws < 100 {
        return Err(Error::input("posterior sampling needs at least 100 draws"));
    }
    if !om.in_box(start) {
        return Err(Error::input("chain start lies outside the cause box"));
    }
    let d = om.d_c();
    let mut r = rng.rng();
    let mut buf = vec![0.0; om.d_e()];
    let mut c = start.to_vec();
    let mut lp = om.log_likelihood(&c, e, &mut buf) + term.log_density(&c);
    let mut steps = steps.to_vec();
    let mut window_acc = vec![0usize; d];
    let mut window_n = 0usize;
    let mut accepted = 0usize;
    let mut draws = DMatrix::zeros(cfg.draws, d);
    for sweep in 0..(cfg.burn_in + cfg.draws) {
        let burning = sweep < cfg.burn_in;
        for k in 0..d {
            let old = c[k];
            c[k] = old + steps[k] * r.normal();
            let ok = if om.in_box(&c) {
                let lp_new = om.log_likelihood(&c, e, &mut buf) + term.log_density(&c);
                if (lp_new - lp) >= 0.0 || r.uniform().ln() < lp_new - lp {
                    lp = lp_new;
                    true
                } else {
                    false
                }
            } else {
                false
            };
            if !ok {
                c[k] = old;
            }
            if burning {
                window_acc[k] += ok as usize;
            } else {
                accepted += ok as usize;
            }
        }
        if burning {
            window_n += 1;
            if window_n == cfg.adapt_every.max(1) {
                for k in 0..d {
                    let rate = window_acc[k] as f64 / window_n as f64;
                    if rate < 0.2 {
                        steps[k] /= 1.6;
                    } else if rate > 0.5 {
                        steps[k] *= 1.6;
                    }
                    window_acc[k] = 0;
                }
                window_n = 0;
            }
        } else {
            let row = sweep - cfg.burn_in;
            for k in 0..d {
                draws[(row, k)] = c[k];
            }
        }
    }
    let acceptance_rate = accepted as f64 / (cfg.draws * d) as f64;
    if !(acceptance_rate > 0.05 && acceptance_rate < 0.95) {
        return Err(Error::SamplerHealth(format!("post-burn-in acceptance {acceptance_rate:.3} outside (0.05, 0.95)")));
    }
    Ok(PosteriorSamples {
        draws,
        acceptance_rate,
        steps,
    })
}

/// Draws from `p(c | e)` starting at the prior mean (clamped into the box).
pub fn sample_posterior(e: &[f64], om: &ObservationModel, prior: &CausePrior, cfg: &SamplerConfig, rng: &RngStream) -> Result<PosteriorSamples> {
    if e.len() != om.d_e() || prior.dim() != om.d_c() {
        return Err(Error::input("effect or prior dimension does not match the model"));
    }
    let term = PriorTerm::new(prior)?;
    let start: Vec<f64> = prior.m.iter().zip(&om.cause_box).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect();
    run_chain(e, om, &term, cfg, &start, &initial_steps(om, prior), rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McemConfig {
    pub iters: usize,
    pub sampler: SamplerConfig,
    /// Burn-in for chains after the first iteration, which restart from their last draw.
    pub warm_burn_in: usize,
}

impl Default for McemConfig {
    fn default() -> Self {
        Self {
            iters: 30,
            sampler: SamplerConfig::default(),
            warm_burn_in: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McemIteration {
    pub iter: usize,
    pub prior: CausePrior,
    /// Monte-Carlo estimate of the expected complete-data log density at the new prior.
    pub q_value: f64,
    /// Grand covariance had an eigenvalue below 1e-10 before the ridge.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct McemResult {
    pub prior: CausePrior,
    pub trace: Vec<McemIteration>,
    /// Final-iteration posterior samples per observation.
    pub posteriors: Vec<PosteriorSamples>,
}

impl McemResult {
    pub fn degenerate(&self) -> bool {
        self.trace.iter().any(|t| t.degenerate)
    }
}

const M_STEP_RIDGE: f64 = 1e-6;

/// Grand mean and covariance (plus ridge) of all draws; flags collapse.
fn m_step(posteriors: &[PosteriorSamples], d: usize) -> Result<(CausePrior, bool)> {
    let total: usize = posteriors.iter().map(|p| p.draws.nrows()).sum();
    let mut m = vec![0.0; d];
    for p in posteriors {
        for row in p.draws.row_iter() {
            for k in 0..d {
                m[k] += row[k];
            }
        }
    }
    m.iter_mut().for_each(|v| *v /= total as f64);
    let mut s = DMatrix::zeros(d, d);
    for p in posteriors {
        for row in p.draws.row_iter() {
            for i in 0..d {
                for j in 0..d {
                    s[(i, j)] += (row[i] - m[i]) * (row[j] - m[j]);
                }
            }
        }
    }
    s /= total as f64;
    let degenerate = s.clone().symmetric_eigen().eigenvalues.min() < 1e-10;
    if degenerate {
        log::warn!("prior covariance collapsed below 1e-10 before the ridge");
    }
    for i in 0..d {
        s[(i, i)] += M_STEP_RIDGE;
    }
    Ok((CausePrior::new(m, s)?, degenerate))
}

/// Monte-Carlo EM for `(m, S)` from effects `J × d_e`.
pub fn mcem_fit(effects: &DMatrix<f64>, om: &ObservationModel, init: &CausePrior, cfg: &McemConfig, rng: &RngStream) -> Result<McemResult> {
    let j = effects.nrows();
    if j < 10 {
        return Err(Error::input(format!("prior fitting needs at least 10 observations, got {j}")));
    }
    if effects.ncols() != om.d_e() || init.dim() != om.d_c() {
        return Err(Error::input("effects or initial prior do not match the model"));
    }
    if cfg.iters == 0 {
        return Err(Error::input("prior fitting needs at least one iteration"));
    }
    init.validate()?;
    let d = om.d_c();
    let rows: Vec<Vec<f64>> = (0..j).map(|i| effects.row(i).iter().cloned().collect()).collect();
    let mut prior = init.clone();
    let mut trace = Vec::new();
    let mut chains: Vec<Option<PosteriorSamples>> = vec![None; j];
    let mut buf = vec![0.0; om.d_e()];
    for it in 0..cfg.iters {
        let term = PriorTerm::new(&prior)?;
        let stream = rng.child(it as u64);
        let mut posteriors = Vec::with_capacity(j);
        for (i, e) in rows.iter().enumerate() {
            let s = match &chains[i] {
                None => {
                    let start: Vec<f64> = prior.m.iter().zip(&om.cause_box).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect();
                    run_chain(e, om, &term, &cfg.sampler, &start, &initial_steps(om, &prior), &stream.child(i as u64))?
                }
                Some(prev) => {
                    let last: Vec<f64> = prev.draws.row(prev.draws.nrows() - 1).iter().cloned().collect();
                    let warm = SamplerConfig {
                        burn_in: cfg.warm_burn_in,
                        ..cfg.sampler.clone()
                    };
                    run_chain(e, om, &term, &warm, &last, &prev.steps, &stream.child(i as u64))?
                }
            };
            posteriors.push(s);
        }
        let (next, degenerate) = m_step(&posteriors, d)?;
        let new_term = PriorTerm::new(&next)?;
        let log_det = Cholesky::new(&next.cov(), 0.0)?.log_det();
        let mut q = 0.0;
        for (i, p) in posteriors.iter().enumerate() {
            for row in p.draws.row_iter() {
                let c: Vec<f64> = row.iter().cloned().collect();
                q += om.log_likelihood(&c, &rows[i], &mut buf) + new_term.log_density(&c) - 0.5 * log_det;
            }
        }
        let q_value = q / cfg.sampler.draws as f64;
        trace.push(McemIteration {
            iter: it,
            prior: next.clone(),
            q_value,
            degenerate,
        });
        prior = next;
        chains = posteriors.into_iter().map(Some).collect();
    }
    Ok(McemResult {
        prior,
        trace,
        posteriors: chains.into_iter().map(|c| c.expect("every chain ran")).collect(),
    })
}

/// Causes from a box-truncated `N(m, S)` and their noisy RTM effects.
pub fn make_prior_dataset(om: &ObservationModel, truth: &CausePrior, j: usize, rng: &RngStream) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    truth.validate()?;
    let d = om.d_c();
    let l = Cholesky::new(&truth.cov(), 0.0)?.l().clone();
    let mut r = rng.rng();
    let mut causes = DMatrix::zeros(j, d);
    let mut effects = DMatrix::zeros(j, om.d_e());
    let mut buf = vec![0.0; om.d_e()];
    for i in 0..j {
        let c = loop {
            let z: Vec<f64> = (0..d).map(|_| r.normal()).collect();
            let c: Vec<f64> = (0..d).map(|a| truth.m[a] + (0..=a).map(|b| l[(a, b)] * z[b]).sum::<f64>()).collect();
            if om.in_box(&c) {
                break c;
            }
        };
        om.eval_into(&c, &mut buf);
        for k in 0..d {
            causes[(i, k)] = c[k];
        }
        for (k, v) in buf.iter().enumerate() {
            effects[(i, k)] = v + om.sigma * r.normal();
        }
    }
    Ok((causes, effects))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::batch_means_se;

    fn linear_model(sigma: f64) -> ObservationModel {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.2]);
        ObservationModel::linear(a, DVector::from_vec(vec![0.1, -0.2, 0.3]), sigma).unwrap()
    }

    fn prior2() -> CausePrior {
        CausePrior::new(vec![0.5, -1.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5])).unwrap()
    }

    /// Conjugate posterior `(mean, covariance)` for the linear stub.
    fn conjugate(om: &ObservationModel, prior: &CausePrior, e: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let Forward::Linear { a, b } = &om.forward else { unreachable!() };
        let s2 = om.sigma * om.sigma;
        let sinv = prior.cov().try_inverse().unwrap();
        let prec = a.transpose() * a / s2 + &sinv;
        let cov = prec.clone().try_inverse().unwrap();
        let rhs = a.transpose() * (DVector::from_column_slice(e) - b) / s2 + &sinv * DVector::from_column_slice(&prior.m);
        (&cov * rhs, cov)
    }

    #[test]
    fn log_posterior_matches_conjugate_density_up_to_constant() {
        let om = linear_model(0.4);
        let prior = prior2();
        let e = [0.3, 1.1, -0.4];
        let (mu, cov) = conjugate(&om, &prior, &e);
        let prec = cov.try_inverse().unwrap();
        let mut r = RngStream::new(1, 0).rng();
        let mut offset = None;
        for _ in 0..100 {
            let c = [r.uniform_in(-3.0, 3.0), r.uniform_in(-3.0, 3.0)];
            let dv = DVector::from_column_slice(&c) - &mu;
            let oracle = -0.5 * (dv.transpose() * &prec * &dv)[0];
            let diff = log_posterior_unnorm(&c, &e, &om, &prior).unwrap() - oracle;
            let o = *offset.get_or_insert(diff);
            assert!((diff - o).abs() < 1e-9, "{diff} vs {o}");
        }
    }

    #[test]
    fn quadratic_terms_vanish_at_mean_and_scale_with_sigma() {
        let om = ObservationModel::rtm(SyntheticRtm::default(), 0.01).unwrap();
        let prior = CausePrior::new(vec![40.0, 4.0], DMatrix::from_row_slice(2, 2, &[64.0, 0.0, 0.0, 1.0])).unwrap();
        let mut e = vec![0.0; 8];
        om.eval_into(&prior.m, &mut e);
        assert_eq!(log_posterior_unnorm(&prior.m, &e, &om, &prior).unwrap(), 0.0);
        let c = [45.0, 3.0];
        let mut buf = vec![0.0; 8];
        let l1 = om.log_likelihood(&c, &e, &mut buf);
        let om2 = ObservationModel::rtm(SyntheticRtm::default(), 0.02).unwrap();
        let l2 = om2.log_likelihood(&c, &e, &mut buf);
        assert!((l1 / l2 - 4.0).abs() < 1e-12);
        let bad = CausePrior {
            m: vec![0.0, 0.0],
            s: vec![1.0, 2.0, 2.0, 1.0],
        };
        assert!(log_posterior_unnorm(&c, &e, &om, &bad).is_err());
    }

    #[test]
    fn sampler_matches_conjugate_moments() {
        let om = linear_model(0.5);
        let prior = prior2();
        let e = [0.3, 1.1, -0.4];
        let (mu, cov) = conjugate(&om, &prior, &e);
        let cfg = SamplerConfig {
            draws: 20_000,
            burn_in: 500,
            adapt_every: 25,
        };
        let s = sample_posterior(&e, &om, &prior, &cfg, &RngStream::new(3, 0)).unwrap();
        for k in 0..2 {
            let xs: Vec<f64> = s.draws.column(k).iter().cloned().collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let se = batch_means_se(&xs, 40);
            assert!((m - mu[k]).abs() < 3.0 * se, "mean {k}: {m} vs {} (se {se})", mu[k]);
            let sq: Vec<f64> = xs.iter().map(|x| (x - mu[k]).powi(2)).collect();
            let v = sq.iter().sum::<f64>() / sq.len() as f64;
            let se_v = batch_means_se(&sq, 40);
            assert!((v - cov[(k, k)]).abs() < 3.0 * se_v, "var {k}: {v} vs {} (se {se_v})", cov[(k, k)]);
        }
        assert!(s.acceptance_rate > 0.05 && s.acceptance_rate < 0.95);
    }

    #[test]
    fn vanishing_likelihood_returns_prior_mean_and_seed_is_reproducible() {
        let om = linear_model(1e6);
        let prior = prior2();
        let cfg = SamplerConfig {
            draws: 20_000,
            burn_in: 500,
            adapt_every: 25,
        };
        let s = sample_posterior(&[0.0, 0.0, 0.0], &om, &prior, &cfg, &RngStream::new(4, 0)).unwrap();
        for k in 0..2 {
            let xs: Vec<f64> = s.draws.column(k).iter().cloned().collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            assert!((m - prior.m[k]).abs() < 3.0 * batch_means_se(&xs, 40));
        }
        let again = sample_posterior(&[0.0, 0.0, 0.0], &om, &prior, &cfg, &RngStream::new(4, 0)).unwrap();
        assert_eq!(s.draws, again.draws);
        let short = SamplerConfig { draws: 50, ..cfg };
        assert!(sample_posterior(&[0.0; 3], &om, &prior, &short, &RngStream::new(4, 0)).unwrap_err().is_validation());
    }

    #[test]
    fn one_mcem_step_matches_exact_em_update() {
        let om = linear_model(0.5);
        let prior = prior2();
        let mut r = RngStream::new(6, 0).rng();
        let effects = DMatrix::from_fn(12, 3, |_, _| r.normal());
        let cfg = McemConfig {
            iters: 1,
            sampler: SamplerConfig {
                draws: 4000,
                burn_in: 300,
                adapt_every: 25,
            },
            warm_burn_in: 50,
        };
        let res = mcem_fit(&effects, &om, &prior, &cfg, &RngStream::new(7, 0)).unwrap();
        let j = effects.nrows();
        let posts: Vec<(DVector<f64>, DMatrix<f64>)> =
            (0..j).map(|i| conjugate(&om, &prior, &effects.row(i).iter().cloned().collect::<Vec<_>>())).collect();
        let m_exact: DVector<f64> = posts.iter().fold(DVector::zeros(2), |acc, p| acc + &p.0) / j as f64;
        let s_exact: DMatrix<f64> = posts
            .iter()
            .fold(DMatrix::zeros(2, 2), |acc, p| acc + &p.1 + (&p.0 - &m_exact) * (&p.0 - &m_exact).transpose())
            / j as f64;
        for k in 0..2 {
            let se = (0..j)
                .map(|i| batch_means_se(&res.posteriors[i].draws.column(k).iter().cloned().collect::<Vec<_>>(), 20).powi(2))
                .sum::<f64>()
                .sqrt()
                / j as f64;
            assert!((res.prior.m[k] - m_exact[k]).abs() < 3.0 * se, "m{k}");
            let se_s = (0..j)
                .map(|i| {
                    let sq: Vec<f64> = res.posteriors[i].draws.column(k).iter().map(|x| (x - m_exact[k]).powi(2)).collect();
                    batch_means_se(&sq, 20).powi(2)
                })
                .sum::<f64>()
                .sqrt()
                / j as f64;
            let s_mc = res.prior.cov()[(k, k)] - M_STEP_RIDGE;
            assert!((s_mc - s_exact[(k, k)]).abs() < 3.0 * se_s + 1e-6, "S{k}{k}: {s_mc} vs {}", s_exact[(k, k)]);
        }
    }

    #[test]
    fn identical_observations_collapse_onto_their_preimage() {
        let om = ObservationModel::rtm(SyntheticRtm::default(), 1e-5).unwrap();
        let c0 = [30.0, 2.0];
        let mut e = vec![0.0; 8];
        om.eval_into(&c0, &mut e);
        let effects = DMatrix::from_fn(10, 8, |_, k| e[k]);
        let init = CausePrior::new(vec![40.0, 4.0], DMatrix::from_row_slice(2, 2, &[100.0, 0.0, 0.0, 4.0])).unwrap();
        // the posterior is very sharp, so adaptation needs a longer burn-in
        let cfg = McemConfig {
            iters: 8,
            sampler: SamplerConfig {
                burn_in: 1000,
                ..Default::default()
            },
            ..Default::default()
        };
        let res = mcem_fit(&effects, &om, &init, &cfg, &RngStream::new(8, 0)).unwrap();
        assert!((res.prior.m[0] - c0[0]).abs() < 0.05 && (res.prior.m[1] - c0[1]).abs() < 0.01, "{:?}", res.prior.m);
        let s = res.prior.cov();
        assert!(s.symmetric_eigen().eigenvalues.min() > 0.0);
        assert!(mcem_fit(&effects.rows(0, 5).into_owned(), &om, &init, &cfg, &RngStream::new(8, 0)).unwrap_err().is_validation());
    }

    #[test]
    fn starting_at_truth_stays_near_truth() {
        let om = ObservationModel::rtm(SyntheticRtm::default(), 0.002).unwrap();
        let truth = CausePrior::new(vec![40.0, 4.0], DMatrix::from_row_slice(2, 2, &[64.0, 2.4, 2.4, 1.0])).unwrap();
        let (_, effects) = make_prior_dataset(&om, &truth, 200, &RngStream::new(9, 0)).unwrap();
        let cfg = McemConfig {
            iters: 3,
            sampler: SamplerConfig {
                draws: 100,
                ..Default::default()
            },
            ..Default::default()
        };
        let res = mcem_fit(&effects, &om, &truth, &cfg, &RngStream::new(9, 1)).unwrap();
        assert!((res.prior.m[0] - 40.0).abs() <= 4.0 && (res.prior.m[1] - 4.0).abs() <= 0.5);
        let err = (res.prior.cov() - truth.cov()).norm() / truth.cov().norm();
        assert!(err <= 0.2, "{err}");
        assert!(res.trace.iter().all(|t| Cholesky::new(&t.prior.cov(), 0.0).is_ok()));
        let again = mcem_fit(&effects, &om, &truth, &cfg, &RngStream::new(9, 1)).unwrap();
        assert_eq!(again.prior, res.prior);
    }
}
