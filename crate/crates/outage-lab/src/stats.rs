//! Binomial confidence intervals and weighted line fits.

/// Two-sided 95% standard-normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `events` successes in `n` trials.
pub fn wilson_interval(events: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = events as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Weighted least squares `y ≈ intercept + slope·x`; equal weights when `weights` is `None`.
pub fn least_squares(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "a line needs two points");
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..xs.len()).map(w).sum();
    let xm = (0..xs.len()).map(|i| w(i) * xs[i]).sum::<f64>() / sw;
    let ym = (0..xs.len()).map(|i| w(i) * ys[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..xs.len()).map(|i| w(i) * (xs[i] - xm).powi(2)).sum();
    let sxy: f64 = (0..xs.len()).map(|i| w(i) * (xs[i] - xm) * (ys[i] - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let slope_stderr = if xs.len() > 2 {
        let rss: f64 = (0..xs.len()).map(|i| w(i) * (ys[i] - intercept - slope * xs[i]).powi(2)).sum();
        (rss / (xs.len() - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    LineFit { slope, intercept, slope_stderr }
}
