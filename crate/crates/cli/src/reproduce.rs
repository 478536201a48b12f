//! The acceptance criteria as one driver.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use physml::distmatch::{distmatch_benchmark, DISTMATCH_MODELS};
use physml::emulator::{emulator_benchmark, EmulatorConfig, SamplingMethod};
use physml::fkl::{fkl_benchmark, FklConfig};
use physml::fuss::{
    conditional_slice, logistic_posterior_experiment, simulate_series, LogisticExperimentConfig,
    LogisticPosterior, SamplerMethod,
};
use physml::jgp::{jgp_benchmark, JgpOptions, BENCHMARK_METHODS};
use physml::lfm::{lfm_trial, LfmExperimentConfig};
use physml::prior::{make_prior_dataset, mcem_fit};
use physml::sindy::{mexico_rediscovery, RediscoveryConfig};
use physml::synth::{make_biased_lai_dataset, ocean, SyntheticRtm};
use physml::RngStream;

use crate::commands::{distmatch_config, distmatch_data, prior_objects, prior_trace_header};
use crate::config::{DistmatchParams, PriorParams, Scale};
use crate::error::{CliError, CliResult};
use crate::oracles::oracle_suite;
use crate::output::{Cell, OutDir};
use crate::row;

/// `(id, short name, runtime limit in seconds)`.
pub const CRITERIA: [(u32, &str, f64); 10] = [
    (1, "oracles", 60.0),
    (2, "jgp", 120.0),
    (3, "distmatch", 180.0),
    (4, "fkl", 120.0),
    (5, "emulate", 300.0),
    (6, "prior", 300.0),
    (7, "lfm", 300.0),
    (8, "discover", 60.0),
    (9, "gibbs", 300.0),
    (10, "determinism", 600.0),
];

pub const SUMMARY_HEADER: [&str; 5] = ["id", "status", "value", "threshold", "seconds"];

/// Files that carry timings and are left out of byte comparisons.
pub const TIMED_FILES: [&str; 2] = ["summary.csv", "manifest.json"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Cmp {
    fn holds(self, v: f64, t: f64) -> bool {
        match self {
            Cmp::Le => v <= t,
            Cmp::Lt => v < t,
            Cmp::Ge => v >= t,
            Cmp::Gt => v > t,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub cmp: Cmp,
    pub threshold: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, cmp: Cmp, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            cmp,
            threshold,
        }
    }

    pub fn pass(&self) -> bool {
        self.cmp.holds(self.value, self.threshold)
    }
}

/// Checks of one criterion; the first is the headline reported in the summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone)]
pub struct CriterionRow {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub seconds: f64,
    pub runtime_limit: f64,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

impl CriterionRow {
    pub fn status(&self) -> &'static str {
        if self.pass {
            "pass"
        } else {
            "fail"
        }
    }

    /// One human-readable line.
    pub fn line(&self) -> String {
        let mut s = format!(
            "criterion {:>2} {:<12} {}  value={} threshold={} seconds={:.1} (limit {:.0})",
            self.id,
            self.name,
            self.status().to_uppercase(),
            fmt_short(self.value),
            fmt_short(self.threshold),
            self.seconds,
            self.runtime_limit
        );
        for c in &self.checks {
            s.push_str(&format!(
                "\n    {} {} {} {} [{}]",
                c.name,
                fmt_short(c.value),
                c.cmp.symbol(),
                fmt_short(c.threshold),
                if c.pass() { "ok" } else { "FAIL" }
            ));
        }
        if let Some(e) = &self.error {
            s.push_str(&format!("\n    error: {e}"));
        }
        s
    }
}

fn fmt_short(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub seed: u64,
    pub scale: Scale,
    /// Criterion ids to run; all when empty.
    pub only: Vec<u32>,
    /// Criteria whose thresholds and runtime limit are forced to zero.
    pub inject_zero: Vec<u32>,
}

impl ReproduceOptions {
    pub fn new(seed: u64, scale: Scale) -> Self {
        Self {
            seed,
            scale,
            only: Vec::new(),
            inject_zero: Vec::new(),
        }
    }
}

fn pick(scale: Scale, full: usize, smoke: usize) -> usize {
    match scale {
        Scale::Full => full,
        Scale::Smoke => smoke,
    }
}

/// `⌈0.8·n⌉`, the pass count for "in at least 80% of seeds".
fn eighty_percent(n: usize) -> f64 {
    (0.8 * n as f64).ceil()
}

fn root(seed: u64, id: u32) -> RngStream {
    RngStream::new(seed, 100 + id as u64)
}

fn c1_oracles(seed: u64, scale: Scale, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let checks = oracle_suite(
        &root(seed, 1),
        pick(scale, 200, 20),
        pick(scale, 20_000, 4_000),
    )?;
    out.write_csv(
        &format!("{dir}/oracles.csv"),
        &["check", "cases", "max_error", "tolerance"],
        checks
            .iter()
            .map(|c| row![c.name, c.cases, c.max_error, c.tolerance]),
    )?;
    let worst = checks.iter().map(|c| c.ratio()).fold(0.0, f64::max);
    let mut all = vec![Check::new(
        "worst_error_over_tolerance",
        worst,
        Cmp::Le,
        1.0,
    )];
    all.extend(
        checks
            .iter()
            .map(|c| Check::new(c.name, c.max_error, Cmp::Le, c.tolerance)),
    );
    Ok(Outcome { checks: all })
}

fn c2_jgp(seed: u64, scale: Scale, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let rng = root(seed, 2);
    let seeds = pick(scale, 20, 2);
    let opts = JgpOptions::default();
    let rmse: Vec<[f64; 4]> = (0..seeds)
        .into_par_iter()
        .map(|s| -> CliResult<[f64; 4]> {
            let (real, sim, test) = make_biased_lai_dataset(&rng.child(s as u64), 12, 120)?;
            Ok(jgp_benchmark(&real, &sim, &test, &opts)?.rmse)
        })
        .collect::<CliResult<_>>()?;
    out.write_csv(
        &format!("{dir}/rmse_by_seed.csv"),
        &["seed", "method", "rmse"],
        rmse.iter().enumerate().flat_map(|(s, r)| {
            BENCHMARK_METHODS
                .iter()
                .zip(r)
                .map(move |(m, e)| row![s, *m, *e])
        }),
    )?;
    let mean: Vec<f64> = (0..4)
        .map(|m| rmse.iter().map(|r| r[m]).sum::<f64>() / seeds as f64)
        .collect();
    out.write_csv(
        &format!("{dir}/rmse_table.csv"),
        &["method", "rmse"],
        BENCHMARK_METHODS
            .iter()
            .zip(&mean)
            .map(|(m, e)| row![*m, *e]),
    )?;
    Ok(Outcome {
        checks: vec![
            Check::new(
                "mean_rmse_jgp_over_pooled",
                mean[3] / mean[2],
                Cmp::Le,
                1.02,
            ),
            Check::new(
                "mean_rmse_jgp_over_real_only",
                mean[3] / mean[0],
                Cmp::Lt,
                1.0,
            ),
        ],
    })
}

fn c3_distmatch(seed: u64, scale: Scale, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let rng = root(seed, 3);
    let seeds = pick(scale, 20, 2);
    let p = DistmatchParams::default();
    let cfg = distmatch_config(&p);
    let results = (0..seeds)
        .into_par_iter()
        .map(|s| -> CliResult<_> {
            let (real, sim) = distmatch_data(&rng.child(s as u64), &p)?;
            Ok(distmatch_benchmark(&real, &sim, &cfg)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    out.write_csv(
        &format!("{dir}/cv_by_seed.csv"),
        &["seed", "model", "r2", "rmse", "mae"],
        results.iter().enumerate().flat_map(|(s, r)| {
            DISTMATCH_MODELS
                .iter()
                .zip(r.scores)
                .map(move |(m, sc)| row![s, *m, sc.0, sc.1, sc.2])
        }),
    )?;
    let k = seeds as f64;
    out.write_csv(
        &format!("{dir}/cv_table.csv"),
        &["model", "r2", "rmse", "mae"],
        DISTMATCH_MODELS.iter().enumerate().map(|(m, name)| {
            let avg = |f: fn(&(f64, f64, f64)) -> f64| {
                results.iter().map(|r| f(&r.scores[m])).sum::<f64>() / k
            };
            row![*name, avg(|s| s.0), avg(|s| s.1), avg(|s| s.2)]
        }),
    )?;
    out.write_csv(
        &format!("{dir}/mmd.csv"),
        &["seed", "mmd2_nu_zero", "mmd2_nu_max"],
        results
            .iter()
            .enumerate()
            .map(|(s, r)| row![s, r.mmd_nu0, r.mmd_nu]),
    )?;
    let (lo, hi, real_c, krr_c, mmd_c) = &results[0].histograms;
    let w = (hi - lo) / real_c.len() as f64;
    out.write_csv(
        &format!("{dir}/histograms.csv"),
        &["bin", "count_real", "count_pred_krr", "count_pred_mmd"],
        (0..real_c.len()).map(|b| row![lo + (b as f64 + 0.5) * w, real_c[b], krr_c[b], mmd_c[b]]),
    )?;
    let ordered = results
        .iter()
        .filter(|r| r.scores[2].0 >= r.scores[1].0 && r.scores[1].0 >= r.scores[0].0)
        .count();
    let decreased = results.iter().filter(|r| r.mmd_nu < r.mmd_nu0).count();
    Ok(Outcome {
        checks: vec![
            Check::new(
                "fraction_r2_mmd_ge_pooled_ge_real",
                ordered as f64 / k,
                Cmp::Ge,
                0.8,
            ),
            Check::new(
                "fraction_mmd_decreases_with_nu",
                decreased as f64 / k,
                Cmp::Ge,
                1.0,
            ),
        ],
    })
}

fn c4_fkl(seed: u64, scale: Scale, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let rng = root(seed, 4);
    let seeds = pick(scale, 20, 2);
    let cfg = FklConfig::default();
    let results = (0..seeds)
        .into_par_iter()
        .map(|s| Ok(fkl_benchmark(&rng.child(s as u64), &cfg)?))
        .collect::<CliResult<Vec<_>>>()?;
    let mut header = vec!["seed".to_string()];
    header.extend(ocean::NAMES.iter().map(|n| format!("min_rmse_{n}")));
    header.extend(
        [
            "best_model",
            "rmse_dep_zero",
            "rmse_tuned",
            "tuned_dep_weight",
        ]
        .map(String::from),
    );
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv(
        &format!("{dir}/fkl_by_seed.csv"),
        &h,
        results.iter().enumerate().map(|(s, b)| {
            let mut r = row![s];
            r.extend(b.min_rmse.iter().map(|v| Cell::from(*v)));
            r.push(
                b.best_model()
                    .map(|m| ocean::NAMES[m])
                    .unwrap_or("tie")
                    .into(),
            );
            r.extend(row![b.rmse_zero, b.rmse_tuned, b.tuned_dep]);
            r
        }),
    )?;
    out.write_csv(
        &format!("{dir}/consistency_curves.csv"),
        &["model", "dep_weight", "rmse", "hsic"],
        results[0]
            .curve
            .iter()
            .map(|c| row![ocean::NAMES[c.model], c.dep_weight, c.rmse, c.hsic]),
    )?;
    let best = results
        .iter()
        .filter(|b| b.best_model() == Some(cfg.generating_model))
        .count();
    let tuned = results
        .iter()
        .filter(|b| b.rmse_tuned < b.rmse_zero)
        .count();
    let need = eighty_percent(seeds);
    Ok(Outcome {
        checks: vec![
            Check::new(
                "seeds_generator_lowest_min_rmse",
                best as f64,
                Cmp::Ge,
                need,
            ),
            Check::new("seeds_tuned_beats_zero", tuned as f64, Cmp::Ge, need),
        ],
    })
}

fn c5_emulate(seed: u64, scale: Scale, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let mut cfg = EmulatorConfig::default();
    cfg.acquisition.max_points = pick(scale, cfg.acquisition.max_points, 12);
    let runs = pick(scale, 50, 2);
    let b = emulator_benchmark(&SyntheticRtm::default(), &cfg, runs, seed)?;
    out.write_csv(
        &format!("{dir}/rmse_curves.csv"),
        &["method", "run", "n_points", "rmse"],
        b.rows
            .iter()
            .map(|(m, run, n, e)| row![m.name(), *run, *n, *e]),
    )?;
    out.write_csv(
        &format!("{dir}/mean_curves.csv"),
        &["method", "n_points", "rmse"],
        SamplingMethod::ALL
            .iter()
            .zip(&b.mean_curves)
            .flat_map(|(m, c)| c.iter().map(move |(n, e)| row![m.name(), *n, *e])),
    )?;
    let pts: Vec<f64> = b
        .points_to_target
        .iter()
        .map(|p| p.map_or(f64::INFINITY, |n| n as f64))
        .collect();
    out.write_csv(
        &format!("{dir}/points_to_target.csv"),
        &["method", "points_to_target", "target_rmse"],
        SamplingMethod::ALL
            .iter()
            .zip(&pts)
            .map(|(m, n)| row![m.name(), *n, b.target_rmse]),
    )?;
    Ok(Outcome {
        checks: vec![
            Check::new("points_amogape_over_random", pts[0] / pts[2], Cmp::Le, 0.9),
            Check::new("points_amogape_minus_lhs", pts[0] - pts[1], Cmp::Le, 0.0),
            Check::new("points_lhs_minus_random", pts[1] - pts[2], Cmp::Le, 0.0),
        ],
    })
}

fn c6_prior(seed: u64, scale: Scale, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let rng = root(seed, 6);
    let mut p = PriorParams::default();
    p.observations = pick(scale, 200, 30);
    p.mcem.iters = pick(scale, 30, 3);
    let (om, truth, init) = prior_objects(&p)?;
    let (_, effects) = make_prior_dataset(&om, &truth, p.observations, &rng.child(0))?;
    let res = mcem_fit(&effects, &om, &init, &p.mcem, &rng.child(1))?;
    let header = prior_trace_header(om.d_c());
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv(
        &format!("{dir}/prior_trace.csv"),
        &h,
        res.trace.iter().map(|it| {
            let mut r = row![it.iter];
            r.extend(it.prior.m.iter().chain(&it.prior.s).map(|v| Cell::from(*v)));
            r.extend(row![it.q_value, it.degenerate]);
            r
        }),
    )?;
    let m_err = res
        .prior
        .m
        .iter()
        .zip(&truth.m)
        .zip(&om.cause_box)
        .map(|((a, b), (lo, hi))| (a - b).abs() / (hi - lo))
        .fold(0.0, f64::max);
    let s_err = (res.prior.cov() - truth.cov()).norm() / truth.cov().norm();
    out.write_csv(
        &format!("{dir}/recovered.csv"),
        &["quantity", "index", "estimate", "truth"],
        res.prior
            .m
            .iter()
            .zip(&truth.m)
            .enumerate()
            .map(|(i, (a, b))| row!["m", i + 1, *a, *b])
            .chain(
                res.prior
                    .s
                    .iter()
                    .zip(&truth.s)
                    .enumerate()
                    .map(|(i, (a, b))| row!["s", i + 1, *a, *b]),
            ),
    )?;
    Ok(Outcome {
        checks: vec![
            Check::new("mean_error_over_box_width", m_err, Cmp::Le, 0.05),
            Check::new("cov_frobenius_relative_error", s_err, Cmp::Le, 0.2),
        ],
    })
}

fn c7_lfm(seed: u64, scale: Scale, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let rng = root(seed, 7);
    let seeds = pick(scale, 20, 1);
    let mut cfg = LfmExperimentConfig::default();
    cfg.fit.budget = pick(scale, cfg.fit.budget, 300);
    let trials = (0..seeds)
        .into_par_iter()
        .map(|s| Ok(lfm_trial(&cfg, &rng.child(s as u64))?.trial))
        .collect::<CliResult<Vec<_>>>()?;
    out.write_csv(
        &format!("{dir}/params_by_seed.csv"),
        &[
            "seed",
            "output",
            "tau_true",
            "tau_hat",
            "sigma_true",
            "sigma_hat",
        ],
        trials.iter().enumerate().flat_map(|(s, t)| {
            (0..t.tau_hat.len()).map(move |d| {
                row![
                    s,
                    d + 1,
                    t.tau_true[d],
                    t.tau_hat[d],
                    t.sigma_true[d],
                    t.sigma_hat[d]
                ]
            })
        }),
    )?;
    out.write_csv(
        &format!("{dir}/scores_by_seed.csv"),
        &[
            "seed",
            "force_corr",
            "gap_rmse_lfm",
            "gap_rmse_gp",
            "log_lik",
        ],
        trials
            .iter()
            .enumerate()
            .map(|(s, t)| row![s, t.force_corr, t.gap_rmse_lfm, t.gap_rmse_gp, t.log_lik]),
    )?;
    let n_out = cfg.planted.taus.len();
    let per_tau: Vec<usize> = (0..n_out)
        .map(|d| {
            trials
                .iter()
                .filter(|t| ((t.tau_hat[d] - t.tau_true[d]) / t.tau_true[d]).abs() <= 0.15)
                .count()
        })
        .collect();
    let need = eighty_percent(seeds);
    let mut checks = vec![Check::new(
        "min_over_tau_seeds_within_15pct",
        *per_tau.iter().min().unwrap_or(&0) as f64,
        Cmp::Ge,
        need,
    )];
    for (d, &c) in per_tau.iter().enumerate() {
        checks.push(Check::new(
            format!("seeds_within_15pct_tau_{}", cfg.planted.taus[d]),
            c as f64,
            Cmp::Ge,
            need,
        ));
    }
    let min_corr = trials
        .iter()
        .map(|t| t.force_corr)
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::new("min_force_correlation", min_corr, Cmp::Ge, 0.9));
    let k = seeds as f64;
    let gap_lfm = trials.iter().map(|t| t.gap_rmse_lfm).sum::<f64>() / k;
    let gap_gp = trials.iter().map(|t| t.gap_rmse_gp).sum::<f64>() / k;
    checks.push(Check::new(
        "mean_gap_rmse_lfm_over_gp",
        gap_lfm / gap_gp,
        Cmp::Lt,
        1.0,
    ));
    Ok(Outcome { checks })
}

fn c8_discover(seed: u64, scale: Scale, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let cfg = RediscoveryConfig {
        seeds: pick(scale, 20, 3),
        ..RediscoveryConfig::default()
    };
    let res = mexico_rediscovery(&cfg, &root(seed, 8))?;
    let (lib, truth, xi) = (&res.clean.library, &res.truth, &res.clean.xi);
    out.write_csv(
        &format!("{dir}/coefficients.csv"),
        &["term", "state", "truth", "clean_estimate"],
        (0..truth.ncols()).flat_map(|j| {
            (0..truth.nrows())
                .map(move |i| row![lib.term_name(i), j + 1, truth[(i, j)], xi[(i, j)]])
        }),
    )?;
    out.write_csv(
        &format!("{dir}/noisy_support.csv"),
        &["seed", "exact_support"],
        res.noisy_exact.iter().enumerate().map(|(s, e)| row![s, *e]),
    )?;
    let exact = res.noisy_exact.iter().filter(|e| **e).count();
    Ok(Outcome {
        checks: vec![
            Check::new(
                "noisy_seeds_exact_support",
                exact as f64,
                Cmp::Ge,
                eighty_percent(cfg.seeds),
            ),
            Check::new(
                "clean_support_exact",
                res.clean_support_exact as u8 as f64,
                Cmp::Ge,
                1.0,
            ),
            Check::new(
                "clean_max_relative_coef_error",
                res.clean_max_rel_err,
                Cmp::Le,
                0.05,
            ),
        ],
    })
}

fn c9_gibbs(seed: u64, scale: Scale, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let rng = root(seed, 9);
    let mut cfg = LogisticExperimentConfig {
        trials: pick(scale, 50, 2),
        ..LogisticExperimentConfig::default()
    };
    cfg.gibbs.iters = pick(scale, cfg.gibbs.iters, 400);
    cfg.gibbs.burn_in = pick(scale, cfg.gibbs.burn_in, 100);
    let res = logistic_posterior_experiment(&cfg, &rng)?;
    out.write_csv(
        &format!("{dir}/estimates.csv"),
        &[
            "method",
            "trial",
            "r_hat",
            "omega_hat",
            "sq_err_r",
            "sq_err_omega",
            "acc_r",
            "acc_omega",
        ],
        res.rows.iter().map(|r| {
            row![
                r.method.name(),
                r.trial,
                r.r_hat,
                r.omega_hat,
                r.sq_err_r,
                r.sq_err_omega,
                r.acc_r,
                r.acc_omega
            ]
        }),
    )?;
    out.write_csv(
        &format!("{dir}/mse.csv"),
        &["method", "mse_r", "mse_omega"],
        SamplerMethod::ALL
            .iter()
            .zip(&res.mse)
            .map(|(m, e)| row![m.name(), e[0], e[1]]),
    )?;
    let y = simulate_series(&cfg.truth, &rng.child(0).child(0))?;
    let post = LogisticPosterior::new(
        &y,
        cfg.truth.lambda_noise.max(f64::MIN_POSITIVE),
        cfg.prior_upper,
    )?;
    let slice = conditional_slice(&post, cfg.slice_r, cfg.slice_points);
    let slice_rows = slice.iter().filter(|s| s.2 > 0.0).count();
    out.write_csv(
        &format!("{dir}/conditional_slice.csv"),
        &["x", "log_conditional", "conditional"],
        slice.into_iter().map(|(x, l, c)| row![x, l, c]),
    )?;
    let fuss = res.mse_of(SamplerMethod::Fuss);
    let mh = res.mse_of(SamplerMethod::PlainMh);
    Ok(Outcome {
        checks: vec![
            Check::new("max_fuss_mse", fuss[0].max(fuss[1]), Cmp::Le, 1e-3),
            Check::new("fuss_mse_r", fuss[0], Cmp::Le, 1e-3),
            Check::new("fuss_mse_omega", fuss[1], Cmp::Le, 1e-3),
            Check::new("plain_mh_over_fuss_mse_r", mh[0] / fuss[0], Cmp::Ge, 10.0),
            Check::new(
                "plain_mh_over_fuss_mse_omega",
                mh[1] / fuss[1],
                Cmp::Ge,
                10.0,
            ),
            Check::new("slice_points_with_mass", slice_rows as f64, Cmp::Gt, 0.0),
        ],
    })
}

/// Relative paths of every regular file under `dir`, sorted.
pub fn list_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    fn walk(base: &Path, dir: &Path, acc: &mut Vec<PathBuf>) -> CliResult<()> {
        for entry in fs::read_dir(dir)? {
            let p = entry?.path();
            if p.is_dir() {
                walk(base, &p, acc)?;
            } else {
                acc.push(
                    p.strip_prefix(base)
                        .expect("walk stays under base")
                        .to_path_buf(),
                );
            }
        }
        Ok(())
    }
    let mut acc = Vec::new();
    walk(dir, dir, &mut acc)?;
    acc.sort();
    Ok(acc)
}

/// Data files that differ between two output trees, or exist in only one.
pub fn compare_trees(a: &Path, b: &Path) -> CliResult<(usize, Vec<String>)> {
    let keep = |p: &PathBuf| {
        !TIMED_FILES
            .iter()
            .any(|t| p.file_name().is_some_and(|f| f == *t))
    };
    let fa: BTreeSet<PathBuf> = list_files(a)?.into_iter().filter(keep).collect();
    let fb: BTreeSet<PathBuf> = list_files(b)?.into_iter().filter(keep).collect();
    let mut differ = Vec::new();
    for f in fa.union(&fb) {
        let same = fa.contains(f) && fb.contains(f) && fs::read(a.join(f))? == fs::read(b.join(f))?;
        if !same {
            differ.push(f.display().to_string());
        }
    }
    Ok((fa.union(&fb).count(), differ))
}

fn c10_determinism(seed: u64, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let base = out.root().join(dir);
    let (a, b) = (base.join("run_a"), base.join("run_b"));
    for d in [&a, &b] {
        if d.exists() {
            fs::remove_dir_all(d)?;
        }
        let opts = ReproduceOptions {
            only: (1..=9).collect(),
            ..ReproduceOptions::new(seed, Scale::Smoke)
        };
        reproduce_all(&opts, d)?;
    }
    let (compared, differ) = compare_trees(&a, &b)?;
    out.write_csv(
        &format!("{dir}/differences.csv"),
        &["file"],
        differ.iter().map(|f| row![f.as_str()]),
    )?;
    Ok(Outcome {
        checks: vec![
            Check::new("differing_data_files", differ.len() as f64, Cmp::Le, 0.0),
            Check::new("compared_data_files", compared as f64, Cmp::Gt, 0.0),
        ],
    })
}

fn run_one(id: u32, opts: &ReproduceOptions, out: &mut OutDir, dir: &str) -> CliResult<Outcome> {
    let (seed, scale) = (opts.seed, opts.scale);
    match id {
        1 => c1_oracles(seed, scale, out, dir),
        2 => c2_jgp(seed, scale, out, dir),
        3 => c3_distmatch(seed, scale, out, dir),
        4 => c4_fkl(seed, scale, out, dir),
        5 => c5_emulate(seed, scale, out, dir),
        6 => c6_prior(seed, scale, out, dir),
        7 => c7_lfm(seed, scale, out, dir),
        8 => c8_discover(seed, scale, out, dir),
        9 => c9_gibbs(seed, scale, out, dir),
        10 => c10_determinism(seed, out, dir),
        _ => Err(CliError::validation(format!("unknown criterion {id}"))),
    }
}

/// Runs the selected criteria into `out_root`, writing per-criterion files,
/// `summary.csv` and finally `manifest.json`.
pub fn reproduce_all(opts: &ReproduceOptions, out_root: &Path) -> CliResult<Vec<CriterionRow>> {
    if let Some(bad) = opts
        .only
        .iter()
        .chain(&opts.inject_zero)
        .find(|id| !(1..=10).contains(*id))
    {
        return Err(CliError::validation(format!(
            "criterion ids run from 1 to 10, got {bad}"
        )));
    }
    let mut out = OutDir::create(out_root)?;
    let mut rows = Vec::new();
    for &(id, name, limit) in &CRITERIA {
        if !opts.only.is_empty() && !opts.only.contains(&id) {
            continue;
        }
        let dir = format!("c{id:02}_{name}");
        let t0 = Instant::now();
        let result = run_one(id, opts, &mut out, &dir);
        let seconds = t0.elapsed().as_secs_f64();
        out.push_stage(&dir, seconds);
        let injected = opts.inject_zero.contains(&id);
        let limit = if injected { 0.0 } else { limit };
        let (mut checks, error) = match result {
            Ok(o) => (o.checks, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        if injected {
            for c in &mut checks {
                c.threshold = 0.0;
            }
        }
        out.write_csv(
            &format!("{dir}/criterion.csv"),
            &["check", "value", "comparison", "threshold", "pass"],
            checks.iter().map(|c| {
                row![
                    c.name.as_str(),
                    c.value,
                    c.cmp.symbol(),
                    c.threshold,
                    c.pass()
                ]
            }),
        )?;
        if let Some(e) = &error {
            out.write_csv(
                &format!("{dir}/error.csv"),
                &["message"],
                [row![e.as_str()]],
            )?;
        }
        let pass = error.is_none()
            && !checks.is_empty()
            && checks.iter().all(Check::pass)
            && seconds < limit;
        let (value, threshold) = checks
            .first()
            .map_or((f64::NAN, f64::NAN), |c| (c.value, c.threshold));
        rows.push(CriterionRow {
            id,
            name,
            pass,
            value,
            threshold,
            seconds,
            runtime_limit: limit,
            checks,
            error,
        });
    }
    out.write_csv(
        "summary.csv",
        &SUMMARY_HEADER,
        rows.iter()
            .map(|r| row![r.id as u64, r.status(), r.value, r.threshold, r.seconds]),
    )?;
    let scale = match opts.scale {
        Scale::Full => "full",
        Scale::Smoke => "smoke",
    };
    let canonical = serde_json::json!({
        "method": "reproduce-all",
        "seed": opts.seed,
        "params": { "scale": scale, "only": opts.only, "inject_zero": opts.inject_zero },
    });
    out.finish(
        "reproduce-all",
        opts.seed,
        &crate::output::sha256_hex(canonical.to_string().as_bytes()),
    )?;
    Ok(rows)
}
