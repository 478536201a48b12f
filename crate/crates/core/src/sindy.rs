//! Sparse identification of polynomial ODEs by sequential thresholded least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::rng::RngStream;
use crate::stats::{pearson, variance};
use crate::synth::{mexico_system, ode_simulate, rk4_step, MEXICO_HORIZON};

/// Ordered monomial basis: constant first, then by degree, and within a
/// degree lexicographically with higher powers of earlier variables first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermLibrary {
    state_dim: usize,
    max_degree: usize,
    terms: Vec<Vec<u32>>,
}

fn exponents_of_degree(dim: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == dim {
        prefix.push(degree);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=degree).rev() {
        prefix.push(e);
        exponents_of_degree(dim, degree - e, prefix, out);
        prefix.pop();
    }
}

impl TermLibrary {
    pub fn new(state_dim: usize, max_degree: usize) -> Self {
        assert!(state_dim >= 1, "library needs a positive state dimension");
        let mut terms = Vec::new();
        for deg in 0..=max_degree as u32 {
            exponents_of_degree(state_dim, deg, &mut Vec::new(), &mut terms);
        }
        Self {
            state_dim,
            max_degree,
            terms,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Vec<u32>] {
        &self.terms
    }

    pub fn index_of(&self, exponents: &[u32]) -> Option<usize> {
        self.terms.iter().position(|t| t == exponents)
    }

    /// Human-readable name, e.g. `x1*x2` or `x1^2`.
    pub fn term_name(&self, i: usize) -> String {
        let parts: Vec<String> = self.terms[i]
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(j, &e)| if e == 1 { format!("x{}", j + 1) } else { format!("x{}^{}", j + 1, e) })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }

    #[inline]
    pub fn eval_term(&self, i: usize, x: &[f64]) -> f64 {
        self.terms[i]
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&e, &v)| acc * v.powi(e as i32))
    }

    /// `out_j = Σ_i θ_i(x)·ξ_{ij}`.
    pub fn eval_rhs(&self, xi: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.len() {
            let row = xi.row(i);
            if row.iter().all(|c| *c == 0.0) {
                continue;
            }
            let th = self.eval_term(i, x);
            for (j, o) in out.iter_mut().enumerate() {
                *o += th * row[j];
            }
        }
    }
}

/// Evaluates every library term on every trajectory row.
pub fn build_library(traj: &DMatrix<f64>, lib: &TermLibrary) -> Result<DMatrix<f64>> {
    if traj.ncols() != lib.state_dim() {
        return Err(Error::input(format!(
            "trajectory has {} columns, library expects {}",
            traj.ncols(),
            lib.state_dim()
        )));
    }
    let mut theta = DMatrix::zeros(traj.nrows(), lib.len());
    let mut row = vec![0.0; lib.state_dim()];
    for t in 0..traj.nrows() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = traj[(t, j)];
        }
        for i in 0..lib.len() {
            theta[(t, i)] = lib.eval_term(i, &row);
        }
    }
    Ok(theta)
}

/// Centered moving average with an odd window, truncated at the ends.
fn smooth(col: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return col.to_vec();
    }
    let h = window / 2;
    let n = col.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            // keep the window symmetric so linear signals pass unchanged
            let k = (i - lo).min(hi - i);
            let (lo, hi) = (i - k, i + k);
            col[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Second-order finite differences: centered inside, one-sided at the ends.
pub fn estimate_derivatives(traj: &DMatrix<f64>, dt: f64, smoothing_window: usize) -> Result<DMatrix<f64>> {
    let n = traj.nrows();
    if n < 5 {
        return Err(Error::input(format!("need at least 5 samples to differentiate, got {n}")));
    }
    if smoothing_window == 0 || smoothing_window % 2 == 0 {
        return Err(Error::input(format!("smoothing window must be odd, got {smoothing_window}")));
    }
    if !(dt > 0.0) {
        return Err(Error::input("dt must be positive"));
    }
    let mut out = DMatrix::zeros(n, traj.ncols());
    for j in 0..traj.ncols() {
        let col: Vec<f64> = traj.column(j).iter().copied().collect();
        let x = smooth(&col, smoothing_window);
        out[(0, j)] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt);
        for i in 1..n - 1 {
            out[(i, j)] = (x[i + 1] - x[i - 1]) / (2.0 * dt);
        }
        out[(n - 1, j)] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * dt);
    }
    Ok(out)
}

/// Coefficients from [`stlsq`] plus the state dimensions whose active set emptied.
#[derive(Debug, Clone, PartialEq)]
pub struct StlsqResult {
    pub xi: DMatrix<f64>,
    pub empty_columns: Vec<usize>,
    pub iterations: usize,
}

fn ridge_solve(theta: &DMatrix<f64>, active: &[usize], y: &DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    let a = theta.select_columns(active);
    let k = active.len();
    let (m, _) = a.shape();
    let (a, b) = if ridge > 0.0 {
        let mut aa = DMatrix::zeros(m + k, k);
        aa.rows_mut(0, m).copy_from(&a);
        for i in 0..k {
            aa[(m + i, i)] = ridge.sqrt();
        }
        let mut bb = DMatrix::zeros(m + k, 1);
        bb.rows_mut(0, m).copy_from(y);
        (aa, bb)
    } else {
        (a, DMatrix::from_column_slice(m, 1, y.as_slice()))
    };
    Ok(lstsq(&a, &b)?.column(0).into_owned())
}

/// Sequential thresholded (ridge) least squares, column by column.
pub fn stlsq(theta: &DMatrix<f64>, xdot: &DMatrix<f64>, threshold: f64, ridge: f64, max_iters: usize) -> Result<StlsqResult> {
    if !(threshold >= 0.0) || !(ridge >= 0.0) {
        return Err(Error::input("threshold and ridge must be ≥ 0"));
    }
    if theta.nrows() != xdot.nrows() {
        return Err(Error::input("library and derivative row counts differ"));
    }
    let n_terms = theta.ncols();
    let mut xi = DMatrix::zeros(n_terms, xdot.ncols());
    let mut empty_columns = Vec::new();
    let mut max_it = 0;
    for j in 0..xdot.ncols() {
        let y: DVector<f64> = xdot.column(j).into_owned();
        let mut active: Vec<usize> = (0..n_terms).collect();
        let mut coef = ridge_solve(theta, &active, &y, ridge)?;
        let mut it = 0;
        loop {
            let keep: Vec<usize> = (0..active.len()).filter(|&k| coef[k].abs() >= threshold).collect();
            if keep.len() == active.len() {
                break;
            }
            let next: Vec<usize> = keep.iter().map(|&k| active[k]).collect();
            if next.is_empty() || it >= max_iters {
                // final pruning without another solve keeps the magnitude invariant
                coef = DVector::from_iterator(keep.len(), keep.iter().map(|&k| coef[k]));
                active = next;
                break;
            }
            active = next;
            coef = ridge_solve(theta, &active, &y, ridge)?;
            it += 1;
        }
        max_it = max_it.max(it);
        if active.is_empty() {
            empty_columns.push(j);
        }
        for (k, &term) in active.iter().enumerate() {
            xi[(term, j)] = coef[k];
        }
    }
    Ok(StlsqResult {
        xi,
        empty_columns,
        iterations: max_it,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOdeModel {
    pub library: TermLibrary,
    pub xi: DMatrix<f64>,
    pub threshold: f64,
    pub fit_r: f64,
    pub empty_columns: Vec<usize>,
}

impl SparseOdeModel {
    /// Nonzero `(term, state)` pairs.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut s = Vec::new();
        for j in 0..self.xi.ncols() {
            for i in 0..self.xi.nrows() {
                if self.xi[(i, j)] != 0.0 {
                    s.push((i, j));
                }
            }
        }
        s
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.library.eval_rhs(&self.xi, x, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoverOptions {
    pub threshold: f64,
    pub ridge: f64,
    pub smoothing_window: usize,
    pub max_iters: usize,
}

impl Default for DiscoverOptions {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            ridge: 0.0,
            smoothing_window: 1,
            max_iters: 20,
        }
    }
}

/// Derivative estimation, library construction and STLSQ in one pass.
pub fn discover(traj: &DMatrix<f64>, dt: f64, lib: &TermLibrary, opts: &DiscoverOptions) -> Result<SparseOdeModel> {
    let xdot = estimate_derivatives(traj, dt, opts.smoothing_window)?;
    let theta = build_library(traj, lib)?;
    let res = stlsq(&theta, &xdot, opts.threshold, opts.ridge, opts.max_iters)?;
    let pred = &theta * &res.xi;
    let fit_r = pearson(pred.as_slice(), xdot.as_slice());
    Ok(SparseOdeModel {
        library: lib.clone(),
        xi: res.xi,
        threshold: opts.threshold,
        fit_r,
        empty_columns: res.empty_columns,
    })
}

/// Uniform grid over a 2-D box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePortrait {
    /// Rows `(x, y, dx/dt, dy/dt)`.
    pub field: Vec<[f64; 4]>,
    /// Rows `(initial condition index, t, x, y)`; a trajectory ends early
    /// when it escapes ten times the grid box.
    pub trajectories: Vec<(usize, f64, f64, f64)>,
}

pub fn phase_portrait(
    model: &SparseOdeModel,
    grid: &PhaseGrid,
    initial_conditions: &[[f64; 2]],
    t_end: f64,
    dt: f64,
) -> Result<PhasePortrait> {
    if model.library.state_dim() != 2 {
        return Err(Error::input(format!(
            "phase portraits need a 2-D model, got dimension {}",
            model.library.state_dim()
        )));
    }
    if grid.n < 2 {
        return Err(Error::input("phase grid needs at least 2 points per axis"));
    }
    let mut field = Vec::with_capacity(grid.n * grid.n);
    let mut out = [0.0; 2];
    for i in 0..grid.n {
        let x = grid.x_range.0 + (grid.x_range.1 - grid.x_range.0) * i as f64 / (grid.n - 1) as f64;
        for j in 0..grid.n {
            let y = grid.y_range.0 + (grid.y_range.1 - grid.y_range.0) * j as f64 / (grid.n - 1) as f64;
            model.eval(&[x, y], &mut out);
            field.push([x, y, out[0], out[1]]);
        }
    }
    // Trajectories stop once they leave the box inflated tenfold about its centre.
    let (cx, cy) = (0.5 * (grid.x_range.0 + grid.x_range.1), 0.5 * (grid.y_range.0 + grid.y_range.1));
    let (hx, hy) = (
        5.0 * (grid.x_range.1 - grid.x_range.0).abs(),
        5.0 * (grid.y_range.1 - grid.y_range.0).abs(),
    );
    let steps = (t_end / dt).round() as usize;
    let rhs = |x: &[f64], o: &mut [f64]| model.eval(x, o);
    let mut trajectories = Vec::new();
    for (k, ic) in initial_conditions.iter().enumerate() {
        let mut x = ic.to_vec();
        trajectories.push((k, 0.0, x[0], x[1]));
        for s in 1..=steps {
            rk4_step(&rhs, &mut x, dt);
            if !x.iter().all(|v| v.is_finite()) || (x[0] - cx).abs() > hx || (x[1] - cy).abs() > hy {
                break;
            }
            trajectories.push((k, s as f64 * dt, x[0], x[1]));
        }
    }
    Ok(PhasePortrait { field, trajectories })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RediscoveryConfig {
    pub x0: [f64; 2],
    pub horizon: f64,
    pub dt: f64,
    pub threshold: f64,
    /// Clean-data smoothing window.
    pub clean_window: usize,
    /// Noise sd as a fraction of each state's sd.
    pub noise_frac: f64,
    pub noisy_window: usize,
    pub seeds: usize,
}

impl Default for RediscoveryConfig {
    fn default() -> Self {
        Self {
            x0: [-0.1, 0.1],
            horizon: MEXICO_HORIZON,
            dt: 1e-3,
            threshold: 5.0,
            clean_window: 1,
            noise_frac: 0.01,
            noisy_window: 7,
            seeds: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rediscovery {
    pub truth: DMatrix<f64>,
    pub clean: SparseOdeModel,
    pub clean_support_exact: bool,
    /// Largest relative error over the true nonzero coefficients.
    pub clean_max_rel_err: f64,
    /// Per-seed exact-support flags on noisy data.
    pub noisy_exact: Vec<bool>,
    pub trajectory: DMatrix<f64>,
}

fn same_support(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| (*x == 0.0) == (*y == 0.0))
}

/// Simulates the published two-state system and rediscovers it from clean
/// and noisy trajectories.
pub fn mexico_rediscovery(cfg: &RediscoveryConfig, rng: &RngStream) -> Result<Rediscovery> {
    let sys = mexico_system(cfg.horizon, cfg.dt);
    let traj = ode_simulate(&sys, &cfg.x0)?;
    let lib = sys.library.clone();
    let opts = DiscoverOptions {
        threshold: cfg.threshold,
        smoothing_window: cfg.clean_window,
        ..DiscoverOptions::default()
    };
    let clean = discover(&traj, cfg.dt, &lib, &opts)?;
    let clean_support_exact = same_support(&clean.xi, &sys.rhs);
    let clean_max_rel_err = sys
        .rhs
        .iter()
        .zip(clean.xi.iter())
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, e)| ((e - t) / t).abs())
        .fold(0.0, f64::max);
    let sd: Vec<f64> = (0..traj.ncols()).map(|j| variance(traj.column(j).as_slice()).sqrt()).collect();
    let noisy_opts = DiscoverOptions {
        smoothing_window: cfg.noisy_window,
        ..opts
    };
    let noisy_exact = (0..cfg.seeds)
        .map(|s| {
            let mut r = rng.child(s as u64).rng();
            let noisy = traj.map_with_location(|_, j, v| v + cfg.noise_frac * sd[j] * r.normal());
            discover(&noisy, cfg.dt, &lib, &noisy_opts).map(|m| same_support(&m.xi, &sys.rhs))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(Rediscovery {
        truth: sys.rhs.clone(),
        clean,
        clean_support_exact,
        clean_max_rel_err,
        noisy_exact,
        trajectory: traj,
    })
}
