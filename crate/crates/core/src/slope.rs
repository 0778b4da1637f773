//! Least-squares slope fits on log-log data, used by every decay and
//! convergence experiment in the crate.

/// Slope of the least-squares line through `(xs, ys)`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "slope fit needs at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Slope and intercept of the least-squares line.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let s = fit_slope(xs, ys);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    (s, my - s * mx)
}

/// Log-log slope of `values` sampled at `params` (both strictly positive).
pub fn loglog_slope(params: &[f64], values: &[f64]) -> f64 {
    let xs: Vec<f64> = params.iter().map(|&t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|&t| t.max(1e-300).ln()).collect();
    fit_slope(&xs, &ys)
}

/// Dyadic ladder `start * 2^k`, `k = 0..count`.
pub fn dyadic_ladder(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * 2f64.powi(k as i32)).collect()
}
