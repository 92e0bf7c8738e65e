//! Robust summary statistics for heavy-tailed Monte-Carlo output.

/// Linear-interpolation quantile (type 7) of unsorted data; NaN when empty.
pub fn quantile(data: &[f64], q: f64) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub fn median(data: &[f64]) -> f64 {
    quantile(data, 0.5)
}

pub fn mean(data: &[f64]) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    data.iter().sum::<f64>() / data.len() as f64
}

/// Mean after dropping `floor(frac·n)` points from each end.
pub fn trimmed_mean(data: &[f64], frac: f64) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let cut = (frac * v.len() as f64).floor() as usize;
    let kept = &v[cut..v.len() - cut];
    if kept.is_empty() {
        return quantile_sorted(&v, 0.5);
    }
    mean(kept)
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(data: &[f64]) -> f64 {
    if data.len() < 2 {
        return 0.0;
    }
    let m = mean(data);
    (data.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (data.len() - 1) as f64).sqrt()
}

/// Hill estimate of the tail index from the `k` largest of `|data|`.
pub fn hill_estimator(data: &[f64], k: usize) -> f64 {
    let mut abs: Vec<f64> = data.iter().map(|x| x.abs()).collect();
    abs.sort_by(|a, b| b.total_cmp(a));
    if k == 0 || k >= abs.len() || abs[k] <= 0.0 {
        return f64::NAN;
    }
    let threshold = abs[k];
    let s: f64 = abs[..k].iter().map(|x| (x / threshold).ln()).sum();
    k as f64 / s
}

/// Real part of the empirical characteristic function at `h`.
pub fn empirical_cf(data: &[f64], h: f64) -> f64 {
    data.iter().map(|x| (h * x).cos()).sum::<f64>() / data.len() as f64
}

/// Least-squares fit `y ≈ a + b x`; returns `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let b = crate::noise::ls_slope(xs, ys);
    let a = mean(ys) - b * mean(xs);
    (a, b)
}
