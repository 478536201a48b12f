//! Derivative-free minimization: Nelder–Mead with multi-start.

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Objective at each starting point, in start order.
    pub start_values: Vec<f64>,
}

/// Minimizes `f` from `x0` with at most `budget` evaluations.
///
/// Non-finite objective values are treated as `+∞`. The best point ever
/// evaluated is returned, so the result is never worse than `x0`.
pub fn nelder_mead<F>(f: &mut F, x0: &[f64], step: f64, budget: usize, ftol: f64) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    for p in &simplex {
        if evals >= budget.max(1) && !values.is_empty() {
            values.push(f64::INFINITY);
            continue;
        }
        values.push(eval(p, &mut evals));
    }
    let start_value = values[0];

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        if spread.is_finite() && spread.abs() <= ftol * (values[0].abs() + ftol) {
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-alpha);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(-gamma);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    if evals >= budget {
                        break;
                    }
                    let p: Vec<f64> = best
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, v)| b + sigma * (v - b))
                        .collect();
                    values[i] = eval(&p, &mut evals);
                    simplex[i] = p;
                }
            }
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    let (x, value) = if values[best] <= start_value {
        (simplex[best].clone(), values[best])
    } else {
        (x0.to_vec(), start_value)
    };
    OptimResult {
        x,
        value,
        evaluations: evals,
        start_values: vec![start_value],
    }
}

/// Runs Nelder–Mead from each start with an equal share of `budget`.
pub fn multi_start<F>(f: &mut F, starts: &[Vec<f64>], step: f64, budget: usize, ftol: f64) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(!starts.is_empty(), "multi_start needs at least one start");
    let share = (budget / starts.len()).max(starts[0].len() + 2);
    let mut best: Option<OptimResult> = None;
    let mut start_values = Vec::with_capacity(starts.len());
    let mut total = 0;
    for s in starts {
        let r = nelder_mead(f, s, step, share, ftol);
        total += r.evaluations;
        start_values.push(r.start_values[0]);
        if best.as_ref().map_or(true, |b| r.value < b.value) {
            best = Some(r);
        }
    }
    let mut best = best.unwrap();
    best.evaluations = total;
    best.start_values = start_values;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let mut f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(&mut f, &[-1.2, 1.0], 0.5, 5000, 1e-14);
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
        assert!(r.evaluations <= 5000);
    }

    #[test]
    fn never_worse_than_start_and_handles_nan() {
        let mut f = |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { x[0] * x[0] };
        let r = nelder_mead(&mut f, &[-1.0], 0.5, 50, 1e-12);
        assert!(r.value <= 1.0);
        let r = multi_start(&mut f, &[vec![-3.0], vec![-0.5]], 0.5, 100, 1e-12);
        assert!(r.start_values.iter().all(|&s| r.value <= s));
    }
}
