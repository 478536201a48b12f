//! Closed forms checked against brute-force references.

use nalgebra::{DMatrix, DVector};

use physml::fuss::{fuss_build, FussConfig};
use physml::gp::loo_predictive;
use physml::kernel::gram_sym;
use physml::lfm::{latent_kernel, lfm_cross_cov, lfm_latent_cross_cov, LfmParams};
use physml::prior::{sample_posterior, CausePrior, ObservationModel, SamplerConfig};
use physml::rng::StreamRng;
use physml::sindy::stlsq;
use physml::stats::batch_means_se;
use physml::{KernelConfig, RngStream};

use crate::error::CliResult;

/// Worst observed error of one check against its tolerance.
#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn ratio(&self) -> f64 {
        self.max_error / self.tolerance
    }
}

/// Held-out predictions from the closed form against refitting without each point.
pub fn loo_vs_refit(rng: &RngStream) -> CliResult<OracleCheck> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for rep in 0..10 {
        let mut r = rng.child(rep).rng();
        let n = 3 + r.below(18);
        let x = DMatrix::from_fn(n, 2, |_, _| r.normal());
        let kcfg = KernelConfig::new(
            vec![r.uniform_in(0.3, 2.0), r.uniform_in(0.3, 2.0)],
            r.uniform_in(0.5, 2.0),
        )?;
        let k = gram_sym(&kcfg, &x)?;
        let noise = DVector::from_fn(n, |_, _| 0.01 + 0.2 * r.uniform());
        let y = DVector::from_fn(n, |_, _| r.normal());
        let (m, v) = loo_predictive(&k, &noise, &y)?;
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut c = k.select_rows(&keep).select_columns(&keep);
            for (a, &j) in keep.iter().enumerate() {
                c[(a, a)] += noise[j];
            }
            let cinv = c.try_inverse().expect("noisy Gram is invertible");
            let ks = DVector::from_iterator(keep.len(), keep.iter().map(|&j| k[(i, j)]));
            let yr = DVector::from_iterator(keep.len(), keep.iter().map(|&j| y[j]));
            let mo = (ks.transpose() * &cinv * yr)[0];
            let vo = k[(i, i)] + noise[i] - (ks.transpose() * &cinv * &ks)[0];
            worst = worst
                .max((m[i] - mo).abs() / mo.abs().max(1.0))
                .max((v[i] - vo).abs() / vo.abs());
            cases += 1;
        }
    }
    Ok(OracleCheck {
        name: "loo_vs_refit",
        cases,
        max_error: worst,
        tolerance: 1e-8,
    })
}

/// Thresholded least squares at threshold zero against an SVD least-squares solve.
pub fn stlsq_vs_dense(rng: &RngStream) -> CliResult<OracleCheck> {
    let mut worst = 0.0f64;
    for rep in 0..5 {
        let mut r = rng.child(rep).rng();
        let theta = DMatrix::from_fn(80, 6, |_, _| r.normal());
        let y = DMatrix::from_fn(80, 2, |_, _| r.normal());
        let res = stlsq(&theta, &y, 0.0, 0.0, 20)?;
        let oracle = theta
            .clone()
            .svd(true, true)
            .solve(&y, 1e-14)
            .expect("SVD solve");
        worst = worst.max((res.xi - oracle).abs().max());
    }
    Ok(OracleCheck {
        name: "stlsq_vs_dense_lstsq",
        cases: 5,
        max_error: worst,
        tolerance: 1e-8,
    })
}

/// Adaptive Simpson with 64 fixed pieces so narrow peaks are not skipped.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
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

fn random_lfm(r: &mut StreamRng, d: usize) -> CliResult<LfmParams> {
    let gamma = (0..d).map(|_| r.uniform_in(-3.5, 0.5).exp()).collect();
    let sens = DMatrix::from_fn(d, 1, |_, _| r.uniform_in(-1.5, 1.5));
    let ell = vec![r.uniform_in(-0.5, 2.0).exp()];
    Ok(LfmParams::new(gamma, sens, ell, vec![0.01; d])?)
}

/// Output-output covariance against a double integral of the two impulse responses.
pub fn lfm_output_kernel_vs_quadrature(rng: &RngStream, draws: usize) -> CliResult<OracleCheck> {
    let mut r = rng.rng();
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = random_lfm(&mut r, 2)?;
        let (d, d2) = (r.below(2), r.below(2));
        let (t, t2) = (r.uniform_in(0.0, 30.0), r.uniform_in(0.0, 30.0));
        let (g, g2, ell) = (p.gamma[d], p.gamma[d2], p.latent_lengthscales[0]);
        let inner = |s: f64| {
            simpson(
                &|s2: f64| (-g2 * (t2 - s2)).exp() * latent_kernel(ell, s, s2),
                0.0,
                t2,
                1e-11,
            )
        };
        let oracle = p.sens[(d, 0)]
            * p.sens[(d2, 0)]
            * simpson(&|s: f64| (-g * (t - s)).exp() * inner(s), 0.0, t, 1e-9);
        worst = worst.max((lfm_cross_cov(&p, d, d2, t, t2) - oracle).abs());
    }
    Ok(OracleCheck {
        name: "lfm_output_kernel_vs_quadrature",
        cases: draws,
        max_error: worst,
        tolerance: 1e-6,
    })
}

/// Output-force covariance against a single integral.
pub fn lfm_latent_kernel_vs_quadrature(rng: &RngStream, draws: usize) -> CliResult<OracleCheck> {
    let mut r = rng.rng();
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = random_lfm(&mut r, 1)?;
        let t = r.uniform_in(0.0, 40.0);
        let s = r.uniform_in(-10.0, 50.0);
        let (g, ell) = (p.gamma[0], p.latent_lengthscales[0]);
        let oracle = p.sens[(0, 0)]
            * simpson(
                &|v: f64| (-g * (t - v)).exp() * latent_kernel(ell, v, s),
                0.0,
                t,
                1e-10,
            );
        worst = worst.max((lfm_latent_cross_cov(&p, 0, 0, t, s) - oracle).abs());
    }
    Ok(OracleCheck {
        name: "lfm_latent_kernel_vs_quadrature",
        cases: draws,
        max_error: worst,
        tolerance: 1e-6,
    })
}

/// Sampler moments under a linear forward model against the Gaussian conjugate posterior.
///
/// The error is reported in units of the batch-means standard error, so the tolerance is 3.
pub fn linear_posterior_vs_conjugate(rng: &RngStream, draws: usize) -> CliResult<OracleCheck> {
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.2]);
    let b = DVector::from_vec(vec![0.1, -0.2, 0.3]);
    let sigma = 0.5;
    let om = ObservationModel::linear(a.clone(), b.clone(), sigma)?;
    let prior = CausePrior::new(
        vec![0.5, -1.0],
        DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]),
    )?;
    let e = [0.3, 1.1, -0.4];

    let s2 = sigma * sigma;
    let sinv = prior
        .cov()
        .try_inverse()
        .expect("prior covariance is invertible");
    let cov = (a.transpose() * &a / s2 + &sinv)
        .try_inverse()
        .expect("posterior precision is invertible");
    let mu = &cov
        * (a.transpose() * (DVector::from_column_slice(&e) - &b) / s2
            + &sinv * DVector::from_column_slice(&prior.m));

    let cfg = SamplerConfig {
        draws,
        burn_in: 500,
        adapt_every: 25,
    };
    let s = sample_posterior(&e, &om, &prior, &cfg, rng)?;
    let mut worst = 0.0f64;
    for k in 0..2 {
        let xs: Vec<f64> = s.draws.column(k).iter().copied().collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        worst = worst.max((m - mu[k]).abs() / batch_means_se(&xs, 40));
        let sq: Vec<f64> = xs.iter().map(|x| (x - mu[k]).powi(2)).collect();
        let v = sq.iter().sum::<f64>() / sq.len() as f64;
        worst = worst.max((v - cov[(k, k)]).abs() / batch_means_se(&sq, 40));
    }
    Ok(OracleCheck {
        name: "linear_posterior_vs_conjugate_se",
        cases: 4,
        max_error: worst,
        tolerance: 3.0,
    })
}

/// Total mass of the grid proposal and `cdf(inverse_cdf(u)) = u`.
pub fn grid_proposal_round_trip() -> CliResult<OracleCheck> {
    let mut f = |x: f64| {
        -0.5 * ((x - 1.0) / 0.02).powi(2) + (-0.5 * ((x - 4.0) / 0.5).powi(2)).exp().ln_1p()
    };
    let p = fuss_build(&mut f, (0.0, 6.0), &FussConfig::default())?;
    let mut worst = (p.mass() - 1.0).abs();
    for i in 0..1000 {
        let u = (i as f64 + 0.5) / 1000.0;
        worst = worst.max((p.cdf(p.inverse_cdf(u)) - u).abs());
    }
    Ok(OracleCheck {
        name: "grid_proposal_round_trip",
        cases: 1001,
        max_error: worst,
        tolerance: 1e-10,
    })
}

pub fn oracle_suite(
    rng: &RngStream,
    lfm_draws: usize,
    posterior_draws: usize,
) -> CliResult<Vec<OracleCheck>> {
    Ok(vec![
        loo_vs_refit(&rng.child(0))?,
        stlsq_vs_dense(&rng.child(1))?,
        lfm_output_kernel_vs_quadrature(&rng.child(2), lfm_draws)?,
        lfm_latent_kernel_vs_quadrature(&rng.child(3), lfm_draws)?,
        linear_posterior_vs_conjugate(&rng.child(4), posterior_draws)?,
        grid_proposal_round_trip()?,
    ])
}
