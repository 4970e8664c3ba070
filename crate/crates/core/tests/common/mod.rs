#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_ebcredible");

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliRun {
    pub fn manifest(&self) -> Value {
        serde_json::from_str(&self.stdout)
            .unwrap_or_else(|e| panic!("manifest is not JSON ({e}): {}", self.stdout))
    }
}

pub fn run_cli(args: &[&str], out_dir: &Path) -> CliRun {
    let Output {
        status,
        stdout,
        stderr,
    } = Command::new(BIN)
        .args(args)
        .arg("--out-dir")
        .arg(out_dir)
        .env_remove("EBCREDIBLE_OUT_DIR")
        .output()
        .expect("binary runs");
    CliRun {
        code: status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

/// Header and rows of a CSV written by the tool (no quoting).
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

/// The three-coordinate conjugacy instance: kappa, n, y, prior variances (alpha = 1).
pub fn three_coordinate() -> ([f64; 3], f64, [f64; 3], [f64; 3]) {
    let v = [1.0, 2f64.powi(-3), 3f64.powi(-3)];
    ([1.0, 0.5, 0.25], 10.0, [1.0, -1.0, 2.0], v)
}

pub struct IsMoment {
    pub value: f64,
    pub se: f64,
}

/// Self-normalised importance sampling with the prior as proposal and the
/// likelihood as weight. Returns per-coordinate (mean, variance) with
/// delta-method standard errors.
pub fn importance_sampling_posterior(
    kappa: &[f64],
    n: f64,
    y: &[f64],
    v: &[f64],
    samples: usize,
    seed: u64,
) -> Vec<(IsMoment, IsMoment)> {
    let d = kappa.len();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut thetas = vec![0.0; samples * d];
    let mut logw = vec![0.0; samples];
    for j in 0..samples {
        let mut lw = 0.0;
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            let th = v[i].sqrt() * z;
            thetas[j * d + i] = th;
            let r = y[i] - kappa[i] * th;
            lw -= 0.5 * n * r * r;
        }
        logw[j] = lw;
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let sw: f64 = w.iter().sum();

    (0..d)
        .map(|i| {
            let th = |j: usize| thetas[j * d + i];
            let mean: f64 = (0..samples).map(|j| w[j] * th(j)).sum::<f64>() / sw;
            let var: f64 = (0..samples)
                .map(|j| w[j] * (th(j) - mean).powi(2))
                .sum::<f64>()
                / sw;
            let se_mean = (0..samples)
                .map(|j| (w[j] * (th(j) - mean)).powi(2))
                .sum::<f64>()
                .sqrt()
                / sw;
            let se_var = (0..samples)
                .map(|j| (w[j] * ((th(j) - mean).powi(2) - var)).powi(2))
                .sum::<f64>()
                .sqrt()
                / sw;
            (
                IsMoment {
                    value: mean,
                    se: se_mean,
                },
                IsMoment {
                    value: var,
                    se: se_var,
                },
            )
        })
        .collect()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
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
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// log of prod_i  int N(y_i; kappa_i theta, 1/n) N(theta; 0, v_i) dtheta, by
/// adaptive Simpson per coordinate over a wide panelled range.
pub fn quadrature_log_marginal(kappa: &[f64], n: f64, y: &[f64], v: &[f64]) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut total = 0.0;
    for i in 0..kappa.len() {
        let (k, yi, vi) = (kappa[i], y[i], v[i]);
        let f = |th: f64| {
            let lik = (n / two_pi).sqrt() * (-0.5 * n * (yi - k * th).powi(2)).exp();
            let prior = (-(th * th) / (2.0 * vi)).exp() / (two_pi * vi).sqrt();
            lik * prior
        };
        let reach = 40.0 * vi.sqrt() + yi.abs() / k + 40.0 / (k * n.sqrt());
        let panels = 400;
        let h = 2.0 * reach / panels as f64;
        let integral: f64 = (0..panels)
            .map(|p| {
                let a = -reach + p as f64 * h;
                adaptive_simpson(&f, a, a + h, 1e-16)
            })
            .sum();
        total += integral.ln();
    }
    total
}

/// Sum of posterior variances 1/(i^(1+2 alpha) + n kappa_i^2), evaluated directly.
pub fn sum_posterior_variance(
    kappa: impl Fn(usize) -> f64,
    alpha: f64,
    n: f64,
    i_max: usize,
) -> f64 {
    (1..=i_max)
        .map(|i| {
            let k = kappa(i);
            1.0 / ((i as f64).powf(1.0 + 2.0 * alpha) + n * k * k)
        })
        .sum()
}

pub fn volterra_kappa(i: usize) -> f64 {
    1.0 / ((i as f64 - 0.5) * std::f64::consts::PI)
}

pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Brute-force acceptance of proposals `c + a xi_k (k ln^2(k+1))^(-1/2)` in
/// the ball of radius `a` around `c`, which reduces to
/// `sum_k xi_k^2 / (k ln^2(k+1)) <= 1`.
pub fn lawmu_acceptance_oracle(i_max: usize, proposals: usize, seed: u64) -> f64 {
    let w: Vec<f64> = (1..=i_max)
        .map(|k| {
            let l = ((k + 1) as f64).ln();
            1.0 / (k as f64 * l * l)
        })
        .collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut accepted = 0usize;
    for _ in 0..proposals {
        let mut s = 0.0;
        let mut ok = true;
        for wk in &w {
            let z: f64 = rng.sample(StandardNormal);
            s += wk * z * z;
            if s > 1.0 {
                ok = false;
                break;
            }
        }
        accepted += ok as usize;
    }
    accepted as f64 / proposals as f64
}

pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
