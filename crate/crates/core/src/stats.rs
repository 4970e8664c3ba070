//! Small numeric helpers shared by the estimators and experiments.

use std::f64::consts::PI;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two points.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// 1-based index `floor((1 - gamma) N)`, clamped to `[1, N]`.
///
/// The product is nudged up by a relative 1e-12 so that e.g. `0.95 * 2000`
/// lands on 1900 rather than 1899.999...
pub fn order_statistic_index(len: usize, gamma: f64) -> usize {
    let raw = (1.0 - gamma) * len as f64;
    let k = (raw * (1.0 + 1e-12)).floor() as usize;
    k.clamp(1, len)
}

/// Value at 1-based position `k` of an ascending slice.
pub fn order_statistic(sorted: &[f64], k: usize) -> f64 {
    sorted[k - 1]
}

/// Interpolated sample quantile at probability `p` of an ascending slice.
fn linear_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Silverman's rule-of-thumb bandwidth `0.9 min(sd, IQR/1.34) N^(-1/5)`.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n < 2 {
        return 0.0;
    }
    let sd = sample_variance(sorted).sqrt();
    let iqr = linear_quantile(sorted, 0.75) - linear_quantile(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Gaussian kernel density estimate at `x`.
pub fn kde_at(sorted: &[f64], x: f64, bandwidth: f64) -> f64 {
    let norm = 1.0 / ((2.0 * PI).sqrt() * bandwidth * sorted.len() as f64);
    sorted
        .iter()
        .map(|&v| {
            let u = (x - v) / bandwidth;
            (-0.5 * u * u).exp()
        })
        .sum::<f64>()
        * norm
}

/// Asymptotic standard error `sqrt(p(1-p)/N) / f(q)` of the sample
/// `p`-quantile `q`, with `f` a kernel density estimate. Degenerate
/// (constant) samples give 0.
pub fn quantile_std_error(sorted: &[f64], p: f64, q: f64) -> f64 {
    if sorted.first() == sorted.last() {
        return 0.0;
    }
    let h = silverman_bandwidth(sorted);
    if h.is_nan() || h <= 0.0 {
        return 0.0;
    }
    let density = kde_at(sorted, q, h);
    if density.is_nan() || density <= 0.0 {
        return 0.0;
    }
    (p * (1.0 - p) / sorted.len() as f64).sqrt() / density
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn sort_ascending(xs: &mut [f64]) {
    xs.sort_by(f64::total_cmp);
}
