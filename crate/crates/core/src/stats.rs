//! Small descriptive statistics shared by experiments.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    (pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64).sqrt()
}

pub fn mae(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64
}

/// Coefficient of determination `1 − SS_res/SS_tot`.
pub fn r2(pred: &[f64], truth: &[f64]) -> f64 {
    let m = mean(truth);
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let ss_tot: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Histogram counts on `n_bins` equal bins over `[lo, hi]`; out-of-range values are clamped.
pub fn histogram(xs: &[f64], lo: f64, hi: f64, n_bins: usize) -> Vec<usize> {
    let mut counts = vec![0; n_bins];
    let w = (hi - lo) / n_bins as f64;
    for &x in xs {
        let b = (((x - lo) / w).floor().max(0.0) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Monte-Carlo standard error of the mean of a correlated chain by
/// non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], n_batches: usize) -> f64 {
    let b = xs.len() / n_batches.max(2);
    if b == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = xs.chunks_exact(b).take(n_batches).map(mean).collect();
    let k = means.len() as f64;
    (variance(&means) * k / (k - 1.0) / k).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_metrics() {
        assert_eq!(rmse(&[1.0, 3.0], &[1.0, 1.0]), 2f64.sqrt());
        assert_eq!(mae(&[1.0, 3.0], &[1.0, 1.0]), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 0.997_98).abs() < 1e-4);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
        assert_eq!(histogram(&[0.0, 0.5, 0.99, 2.0, -1.0], 0.0, 1.0, 2), vec![2, 3]);
        // batch means 1, 2, 3: sample variance 1 over 3 batches
        let xs = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        assert!((batch_means_se(&xs, 3) - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
