use std::path::Path;

use nalgebra::DMatrix;

use physml::distmatch::{distmatch_benchmark, DistmatchConfig, MmdKrrOptions, DISTMATCH_MODELS};
use physml::emulator::{emulator_benchmark, SamplingMethod};
use physml::fkl::fkl_benchmark;
use physml::fuss::{
    conditional_slice, logistic_posterior_experiment, simulate_series, LogisticPosterior,
    SamplerMethod,
};
use physml::jgp::{jgp_benchmark, JgpOptions, BENCHMARK_METHODS};
use physml::lfm::lfm_trial;
use physml::prior::{make_prior_dataset, mcem_fit, CausePrior, ObservationModel};
use physml::sindy::{discover, phase_portrait, DiscoverOptions, PhaseGrid, TermLibrary};
use physml::synth::{
    logistic_simulate, make_biased_lai_dataset, make_biased_lai_dataset_with, make_ocean_dataset,
    mexico_system, ocean, ode_simulate, BiasedLaiConfig, SyntheticRtm,
};
use physml::{Dataset, RngStream};

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::output::{Cell, OutDir};
use crate::row;

fn dataset_rows(d: &Dataset, split: &str, out: &mut Vec<Vec<Cell>>) {
    for i in 0..d.len() {
        let mut r: Vec<Cell> = d.inputs().row(i).iter().map(|v| Cell::from(*v)).collect();
        r.push(d.targets()[i].into());
        r.push(split.into());
        r.push(d.provenance()[i].as_str().into());
        out.push(r);
    }
}

fn band_header(n: usize, extra: &[&str]) -> Vec<String> {
    (1..=n)
        .map(|b| format!("band_{b}"))
        .chain(extra.iter().map(|s| s.to_string()))
        .collect()
}

fn write_dyn(
    out: &mut OutDir,
    rel: &str,
    header: &[String],
    rows: Vec<Vec<Cell>>,
) -> CliResult<()> {
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv(rel, &h, rows)
}

pub fn synth_export(seed: u64, p: &SynthParams, out: &mut OutDir) -> CliResult<()> {
    let rng = RngStream::new(seed, 0);
    match p.kind {
        SynthKind::BiasedLai => {
            let (real, sim, test) = make_biased_lai_dataset(&rng, p.n_real, p.n_sim)?;
            let mut rows = Vec::new();
            dataset_rows(&real, "train", &mut rows);
            dataset_rows(&sim, "train", &mut rows);
            dataset_rows(&test, "test", &mut rows);
            write_dyn(
                out,
                "synth.csv",
                &band_header(real.dim(), &["lai", "split", "provenance"]),
                rows,
            )
        }
        SynthKind::Ocean => {
            let s = make_ocean_dataset(&rng, p.n, p.target_sd)?;
            let rows = (0..s.targets.len())
                .map(|i| {
                    let mut r: Vec<Cell> = s.inputs.row(i).iter().map(|v| Cell::from(*v)).collect();
                    r.push(s.targets[i].into());
                    r.extend(s.model_outputs.row(i).iter().map(|v| Cell::from(*v)));
                    r.push("real".into());
                    r
                })
                .collect();
            let model_cols: Vec<String> =
                ocean::NAMES.iter().map(|n| format!("model_{n}")).collect();
            let mut extra: Vec<&str> = vec!["log10_chl"];
            extra.extend(model_cols.iter().map(String::as_str));
            extra.push("provenance");
            write_dyn(
                out,
                "synth.csv",
                &band_header(s.inputs.ncols(), &extra),
                rows,
            )
        }
        SynthKind::Logistic => {
            let y = logistic_simulate(&p.logistic, &rng)?;
            out.write_csv(
                "synth.csv",
                &["t", "y_t", "provenance"],
                y.iter()
                    .enumerate()
                    .map(|(t, v)| row![t + 1, *v, "simulated"]),
            )
        }
        SynthKind::Mexico => {
            let traj = ode_simulate(&mexico_system(p.horizon, p.dt), &p.x0)?;
            out.write_csv(
                "synth.csv",
                &["t", "x_1", "x_2", "provenance"],
                (0..traj.nrows())
                    .map(|i| row![i as f64 * p.dt, traj[(i, 0)], traj[(i, 1)], "simulated"]),
            )
        }
    }
}

pub fn jgp_run(seed: u64, p: &JgpParams, out: &mut OutDir) -> CliResult<()> {
    let (real, sim, test) = make_biased_lai_dataset(&RngStream::new(seed, 0), p.n_real, p.n_sim)?;
    let opts = JgpOptions {
        budget: p.budget,
        starts: p.starts,
    };
    let res = out.stage("fit", |_| jgp_benchmark(&real, &sim, &test, &opts))?;
    out.write_csv(
        "rmse_table.csv",
        &["method", "rmse"],
        BENCHMARK_METHODS
            .iter()
            .zip(res.rmse)
            .map(|(m, e)| row![*m, e]),
    )?;
    let mut header = vec!["row", "lai"];
    header.extend(BENCHMARK_METHODS);
    out.write_csv(
        "predictions.csv",
        &header,
        (0..test.len()).map(|i| {
            let mut r = row![i, test.targets()[i]];
            r.extend(res.predictions.iter().map(|p| Cell::from(p[i])));
            r
        }),
    )?;
    out.write_csv("fidelity.csv", &["fidelity_w"], [row![res.fidelity_w]])
}

pub fn distmatch_config(p: &DistmatchParams) -> DistmatchConfig {
    DistmatchConfig {
        folds: p.folds,
        lambda_grid: p.lambda_grid.clone(),
        nu_grid: p.nu_grid.clone(),
        kernel_multiplier: p.kernel_multiplier,
        fit: MmdKrrOptions {
            ridge: p.ridge,
            tol: p.tol,
            ..MmdKrrOptions::default()
        },
        n_bins: p.n_bins,
    }
}

pub fn distmatch_data(rng: &RngStream, p: &DistmatchParams) -> CliResult<(Dataset, Dataset)> {
    let cfg = BiasedLaiConfig {
        real_rate: p.real_rate,
        real_lai_max: physml::synth::LAI_RANGE.1,
        ..BiasedLaiConfig::default()
    };
    let (real, sim, _) = make_biased_lai_dataset_with(rng, p.n_real, p.n_sim, &cfg)?;
    Ok((real, sim))
}

pub fn distmatch_run(seed: u64, p: &DistmatchParams, out: &mut OutDir) -> CliResult<()> {
    let (real, sim) = distmatch_data(&RngStream::new(seed, 0), p)?;
    let res = out.stage("cv", |_| {
        distmatch_benchmark(&real, &sim, &distmatch_config(p))
    })?;
    out.write_csv(
        "cv_table.csv",
        &["model", "r2", "rmse", "mae"],
        DISTMATCH_MODELS
            .iter()
            .zip(res.scores)
            .map(|(m, s)| row![*m, s.0, s.1, s.2]),
    )?;
    let (lo, hi, real_c, krr_c, mmd_c) = &res.histograms;
    let w = (hi - lo) / real_c.len() as f64;
    out.write_csv(
        "histograms.csv",
        &["bin", "count_real", "count_pred_krr", "count_pred_mmd"],
        (0..real_c.len()).map(|b| row![lo + (b as f64 + 0.5) * w, real_c[b], krr_c[b], mmd_c[b]]),
    )?;
    let nu_max = p.nu_grid.iter().cloned().fold(0.0, f64::max);
    out.write_csv(
        "mmd.csv",
        &["nu", "mmd2"],
        [row![0.0, res.mmd_nu0], row![nu_max, res.mmd_nu]],
    )
}

pub fn fkl_curve(seed: u64, p: &FklParams, out: &mut OutDir) -> CliResult<()> {
    let b = out.stage("curves", |_| fkl_benchmark(&RngStream::new(seed, 0), p))?;
    out.write_csv(
        "consistency_curves.csv",
        &["model", "dep_weight", "rmse", "hsic"],
        b.curve
            .iter()
            .map(|c| row![ocean::NAMES[c.model], c.dep_weight, c.rmse, c.hsic]),
    )?;
    out.write_csv(
        "model_ranking.csv",
        &["model", "min_rmse", "generating"],
        b.min_rmse
            .iter()
            .enumerate()
            .map(|(i, e)| row![ocean::NAMES[i], *e, i == p.generating_model]),
    )?;
    out.write_csv(
        "tuning.csv",
        &["tuned_dep_weight", "rmse_zero", "rmse_tuned"],
        [row![b.tuned_dep, b.rmse_zero, b.rmse_tuned]],
    )
}

pub fn emulate_bench(seed: u64, p: &EmulateParams, out: &mut OutDir) -> CliResult<()> {
    let b = out.stage("runs", |_| {
        emulator_benchmark(&SyntheticRtm::default(), &p.emulator, p.runs, seed)
    })?;
    out.write_csv(
        "rmse_curves.csv",
        &["method", "run", "n_points", "rmse"],
        b.rows
            .iter()
            .map(|(m, run, n, e)| row![m.name(), *run, *n, *e]),
    )?;
    out.write_csv(
        "mean_curves.csv",
        &["method", "n_points", "rmse"],
        SamplingMethod::ALL
            .iter()
            .zip(&b.mean_curves)
            .flat_map(|(m, c)| c.iter().map(move |(n, e)| row![m.name(), *n, *e])),
    )?;
    out.write_csv(
        "points_to_target.csv",
        &["method", "points_to_target", "target_rmse"],
        SamplingMethod::ALL
            .iter()
            .zip(&b.points_to_target)
            .map(|(m, n)| {
                let pts: Cell = match n {
                    Some(n) => (*n).into(),
                    None => "NA".into(),
                };
                vec![m.name().into(), pts, b.target_rmse.into()]
            }),
    )
}

fn square(v: &[f64], what: &str) -> CliResult<DMatrix<f64>> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() {
        return Err(CliError::validation(format!(
            "{what} needs d*d entries, got {}",
            v.len()
        )));
    }
    Ok(DMatrix::from_row_slice(d, d, v))
}

pub fn prior_objects(p: &PriorParams) -> CliResult<(ObservationModel, CausePrior, CausePrior)> {
    let om = ObservationModel::rtm(SyntheticRtm::default(), p.sigma)?;
    if p.truth_m.len() != om.d_c() || p.init_m.len() != om.d_c() {
        return Err(CliError::validation(format!(
            "prior means need {} entries",
            om.d_c()
        )));
    }
    let truth = CausePrior::new(p.truth_m.clone(), square(&p.truth_s, "truth_s")?)?;
    let init = CausePrior::new(p.init_m.clone(), square(&p.init_s, "init_s")?)?;
    Ok((om, truth, init))
}

pub fn prior_trace_header(d: usize) -> Vec<String> {
    let mut h = vec!["iter".to_string()];
    h.extend((1..=d).map(|i| format!("m_{i}")));
    for i in 1..=d {
        h.extend((1..=d).map(|j| format!("s_{i}{j}")));
    }
    h.push("q_value".into());
    h.push("degenerate".into());
    h
}

pub fn prior_fit(seed: u64, p: &PriorParams, out: &mut OutDir) -> CliResult<()> {
    let (om, truth, init) = prior_objects(p)?;
    let rng = RngStream::new(seed, 0);
    let (causes, effects) = make_prior_dataset(&om, &truth, p.observations, &rng.child(0))?;
    let res = out.stage("mcem", |_| {
        mcem_fit(&effects, &om, &init, &p.mcem, &rng.child(1))
    })?;
    let d = om.d_c();
    let trace = res.trace.iter().map(|it| {
        let mut r = row![it.iter];
        r.extend(it.prior.m.iter().chain(&it.prior.s).map(|v| Cell::from(*v)));
        r.push(it.q_value.into());
        r.push(it.degenerate.into());
        r
    });
    write_dyn(
        out,
        "prior_trace.csv",
        &prior_trace_header(d),
        trace.collect(),
    )?;
    let mut header = vec!["obs".to_string(), "draw".to_string()];
    header.extend((1..=d).map(|i| format!("c_{i}")));
    let mut rows = Vec::new();
    for (j, s) in res.posteriors.iter().enumerate() {
        for k in 0..s.draws.nrows() {
            let mut r = row![j, k];
            r.extend(s.draws.row(k).iter().map(|v| Cell::from(*v)));
            rows.push(r);
        }
    }
    write_dyn(out, "posterior_draws.csv", &header, rows)?;
    let mut header = vec!["obs".to_string()];
    header.extend((1..=d).map(|i| format!("c_{i}")));
    let rows = (0..causes.nrows())
        .map(|j| {
            let mut r = row![j];
            r.extend(causes.row(j).iter().map(|v| Cell::from(*v)));
            r
        })
        .collect();
    write_dyn(out, "planted_causes.csv", &header, rows)
}

pub fn lfm_run(seed: u64, p: &LfmParams, out: &mut OutDir) -> CliResult<()> {
    let run = out.stage("fit", |_| lfm_trial(p, &RngStream::new(seed, 0)))?;
    let post = &run.posterior;
    let mut rows = Vec::new();
    for (d, s) in run.masked.series.iter().enumerate() {
        let (m, v) = post.predict_latent_output(d, &s.times)?;
        for i in 0..s.times.len() {
            rows.push(row![
                d + 1,
                s.times[i],
                run.planted.data.series[d].values[i],
                m[i],
                v[i].max(0.0).sqrt(),
                s.observed[i]
            ]);
        }
    }
    out.write_csv(
        "predictions.csv",
        &["output", "t", "value", "mean", "sd", "observed"],
        rows,
    )?;
    let mut rows = Vec::new();
    for d in 0..run.masked.series.len() {
        let (m, v) = post.predict_latent_output(d, &run.grid)?;
        for (i, &t) in run.grid.iter().enumerate() {
            rows.push(row![
                d + 1,
                t,
                m[i],
                v[i].max(0.0).sqrt(),
                run.planted.clean(d, t)
            ]);
        }
    }
    out.write_csv("curves.csv", &["output", "t", "mean", "sd", "truth"], rows)?;
    let lat = post.latent(&run.grid)?;
    let mut rows = Vec::new();
    for (r, (m, v)) in lat.iter().enumerate() {
        for (i, &t) in run.grid.iter().enumerate() {
            rows.push(row![
                r + 1,
                t,
                m[i],
                v[i].max(0.0).sqrt(),
                run.planted.force.eval(t)
            ]);
        }
    }
    out.write_csv("latent.csv", &["force", "t", "mean", "sd", "truth"], rows)?;
    let tr = &run.trial;
    let sens = &post.params().sens;
    out.write_csv(
        "params.csv",
        &[
            "output",
            "tau",
            "tau_true",
            "sigma",
            "sigma_true",
            "sensitivity",
        ],
        (0..tr.tau_hat.len()).map(|d| {
            row![
                d + 1,
                tr.tau_hat[d],
                tr.tau_true[d],
                tr.sigma_hat[d],
                tr.sigma_true[d],
                sens[(d, 0)]
            ]
        }),
    )?;
    out.write_csv(
        "scores.csv",
        &["force_corr", "gap_rmse_lfm", "gap_rmse_gp", "log_lik"],
        [row![
            tr.force_corr,
            tr.gap_rmse_lfm,
            tr.gap_rmse_gp,
            tr.log_lik
        ]],
    )
}

/// Reads `t,x_1,...,x_d` with a header and uniform time steps.
pub fn read_trajectory(path: &Path) -> CliResult<(DMatrix<f64>, f64)> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::validation(format!("trajectory {}: {e}", path.display())))?;
    let mut t = Vec::new();
    let mut vals = Vec::new();
    let mut width = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::validation(format!("trajectory: {e}")))?;
        let nums = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::validation(format!("trajectory: {e}")))?;
        if nums.len() < 2 || *width.get_or_insert(nums.len()) != nums.len() {
            return Err(CliError::validation(
                "trajectory rows need a time and at least one state, all of equal width",
            ));
        }
        t.push(nums[0]);
        vals.extend_from_slice(&nums[1..]);
    }
    let w = width.ok_or_else(|| CliError::validation("trajectory file is empty"))? - 1;
    if t.len() < 5 {
        return Err(CliError::validation("trajectory needs at least 5 rows"));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) || t.windows(2).any(|p| ((p[1] - p[0]) - dt).abs() > 1e-6 * dt) {
        return Err(CliError::validation(
            "trajectory times must be uniformly spaced and increasing",
        ));
    }
    Ok((DMatrix::from_row_slice(t.len(), w, &vals), dt))
}

pub fn discover_run(
    p: &DiscoverParams,
    traj_path: Option<&Path>,
    out: &mut OutDir,
) -> CliResult<()> {
    let (traj, dt) = match traj_path {
        Some(path) => read_trajectory(path)?,
        None => (ode_simulate(&mexico_system(p.horizon, p.dt), &p.x0)?, p.dt),
    };
    let lib = TermLibrary::new(traj.ncols(), p.degree);
    let opts = DiscoverOptions {
        threshold: p.threshold,
        ridge: p.ridge,
        smoothing_window: p.smoothing_window,
        max_iters: p.max_iters,
    };
    let model = out.stage("stlsq", |_| discover(&traj, dt, &lib, &opts))?;
    let terms: Vec<String> = (0..lib.len()).map(|i| lib.term_name(i)).collect();
    let coefficients: Vec<Vec<f64>> = (0..model.xi.ncols())
        .map(|j| model.xi.column(j).iter().copied().collect())
        .collect();
    out.write_json(
        "model.json",
        &serde_json::json!({
            "state_dim": traj.ncols(),
            "degree": p.degree,
            "terms": terms,
            "coefficients": coefficients,
            "threshold": model.threshold,
            "fit_r": model.fit_r,
            "empty_columns": model.empty_columns,
        }),
    )?;
    if traj.ncols() != 2 {
        return Ok(());
    }
    let range = |j: usize| {
        let c = traj.column(j);
        let (lo, hi) = (c.min(), c.max());
        let pad = p.margin * (hi - lo).max(1e-12);
        (lo - pad, hi + pad)
    };
    let grid = PhaseGrid {
        x_range: range(0),
        y_range: range(1),
        n: p.field_points,
    };
    let mid = |r: (f64, f64), f: f64| r.0 + f * (r.1 - r.0);
    let mut ics = vec![[traj[(0, 0)], traj[(0, 1)]]];
    for &(a, b) in &[(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
        ics.push([mid(grid.x_range, a), mid(grid.y_range, b)]);
    }
    let t_end = dt * (traj.nrows() - 1) as f64;
    let portrait = phase_portrait(&model, &grid, &ics, t_end, dt)?;
    out.write_csv(
        "field.csv",
        &["x", "y", "dx", "dy"],
        portrait.field.iter().map(|f| row![f[0], f[1], f[2], f[3]]),
    )?;
    out.write_csv(
        "trajectories.csv",
        &["k", "t", "x", "y"],
        portrait
            .trajectories
            .iter()
            .map(|(k, t, x, y)| row![*k, *t, *x, *y]),
    )
}

pub fn gibbs_logistic(seed: u64, p: &GibbsParams, out: &mut OutDir) -> CliResult<()> {
    let rng = RngStream::new(seed, 0);
    let res = out.stage("chains", |_| logistic_posterior_experiment(p, &rng))?;
    out.write_csv(
        "estimates.csv",
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
        "mse.csv",
        &["method", "mse_r", "mse_omega"],
        SamplerMethod::ALL
            .iter()
            .zip(&res.mse)
            .map(|(m, e)| row![m.name(), e[0], e[1]]),
    )?;
    // same series as the first trial
    let y = simulate_series(&p.truth, &rng.child(0).child(0))?;
    let post = LogisticPosterior::new(
        &y,
        p.truth.lambda_noise.max(f64::MIN_POSITIVE),
        p.prior_upper,
    )?;
    out.write_csv(
        "conditional_slice.csv",
        &["x", "log_conditional", "conditional"],
        conditional_slice(&post, p.slice_r, p.slice_points)
            .into_iter()
            .map(|(x, l, c)| row![x, l, c]),
    )
}
