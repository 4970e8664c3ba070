//! Gaussian sequence model `Y_i = kappa_i * theta_i + n^(-1/2) Z_i` with
//! coordinate-wise independent Gaussian priors, the conjugate posterior,
//! the marginal likelihood and its empirical-Bayes maximisation.
//!
//! Coordinates are stored 0-based; entry `k` of every array belongs to
//! coordinate `i = k + 1`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Finite truncation of an element of l^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoefficientSequence {
    values: Vec<f64>,
}

impl CoefficientSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("coefficient sequence must have i_max >= 1");
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("coefficient {} is not finite", k + 1));
        }
        Ok(Self { values })
    }

    pub fn zeros(i_max: usize) -> Result<Self> {
        Self::new(vec![0.0; i_max])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn i_max(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// l^2 distance; the shorter sequence is zero-padded.
    pub fn distance(&self, other: &CoefficientSequence) -> f64 {
        squared_distance(&self.values, &other.values).sqrt()
    }
}

impl TryFrom<Vec<f64>> for CoefficientSequence {
    type Error = crate::Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<CoefficientSequence> for Vec<f64> {
    fn from(seq: CoefficientSequence) -> Self {
        seq.values
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let shared = a.len().min(b.len());
    let mut acc = 0.0;
    for k in 0..shared {
        let d = a[k] - b[k];
        acc += d * d;
    }
    for v in &a[shared..] {
        acc += v * v;
    }
    for v in &b[shared..] {
        acc += v * v;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    /// `kappa_i = 1 / ((i - 1/2) pi)`, singular values of `f -> int_0^x f`.
    Volterra,
    /// `kappa_i = 1` (direct problem).
    Identity,
    Custom,
}

/// Singular values of the forward operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpectrum {
    kappa: Vec<f64>,
    label: String,
    kind: SpectrumKind,
}

impl OperatorSpectrum {
    pub fn volterra(i_max: usize) -> Result<Self> {
        if i_max == 0 {
            return invalid("volterra spectrum needs i_max >= 1");
        }
        let kappa = (1..=i_max).map(volterra_singular_value).collect();
        Ok(Self {
            kappa,
            label: "volterra".into(),
            kind: SpectrumKind::Volterra,
        })
    }

    pub fn identity(i_max: usize) -> Result<Self> {
        if i_max == 0 {
            return invalid("identity spectrum needs i_max >= 1");
        }
        Ok(Self {
            kappa: vec![1.0; i_max],
            label: "identity".into(),
            kind: SpectrumKind::Identity,
        })
    }

    pub fn custom(kappa: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if kappa.is_empty() {
            return invalid("spectrum needs i_max >= 1");
        }
        if let Some(k) = kappa.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return invalid(format!(
                "singular value {} must be positive and finite",
                k + 1
            ));
        }
        Ok(Self {
            kappa,
            label: label.into(),
            kind: SpectrumKind::Custom,
        })
    }

    pub fn from_kind(kind: SpectrumKind, i_max: usize) -> Result<Self> {
        match kind {
            SpectrumKind::Volterra => Self::volterra(i_max),
            SpectrumKind::Identity => Self::identity(i_max),
            SpectrumKind::Custom => invalid("custom spectra must be built from explicit values"),
        }
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn i_max(&self) -> usize {
        self.kappa.len()
    }

    /// Singular value for any `i >= 1`, including beyond the truncation
    /// when the spectrum has a closed form.
    pub fn kappa_at(&self, i: usize) -> Option<f64> {
        match self.kind {
            SpectrumKind::Volterra if i >= 1 => Some(volterra_singular_value(i)),
            SpectrumKind::Identity if i >= 1 => Some(1.0),
            _ => self.kappa.get(i.checked_sub(1)?).copied(),
        }
    }
}

fn volterra_singular_value(i: usize) -> f64 {
    1.0 / ((i as f64 - 0.5) * PI)
}

/// Coordinate-wise prior variance law `v_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PriorFamily {
    /// `v_i = i^(-1-2 alpha)`
    PowerLaw { alpha: f64 },
    /// `v_i = tau^2 i^(-1-2 alpha)`
    ScaledPowerLaw { alpha: f64, tau: f64 },
    /// `v_i = exp(-t i^q)`
    Exponential { t: f64, q: f64 },
}

impl PriorFamily {
    pub fn power_law(alpha: f64) -> Result<Self> {
        let p = PriorFamily::PowerLaw { alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn scaled_power_law(alpha: f64, tau: f64) -> Result<Self> {
        let p = PriorFamily::ScaledPowerLaw { alpha, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn exponential(t: f64, q: f64) -> Result<Self> {
        let p = PriorFamily::Exponential { t, q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                invalid(format!(
                    "prior parameter {name} must be positive and finite, got {v}"
                ))
            }
        };
        match *self {
            PriorFamily::PowerLaw { alpha } => check("alpha", alpha),
            PriorFamily::ScaledPowerLaw { alpha, tau } => {
                check("alpha", alpha)?;
                check("tau", tau)
            }
            PriorFamily::Exponential { t, q } => {
                check("t", t)?;
                check("q", q)
            }
        }
    }

    /// Prior variance of coordinate `i` (1-based).
    ///
    /// The exponential law underflows to exactly 0 for large `i`; the
    /// posterior formulas below stay well defined in that case.
    pub fn variance(&self, i: usize) -> f64 {
        debug_assert!(i >= 1);
        let x = i as f64;
        match *self {
            PriorFamily::PowerLaw { alpha } => x.powf(-1.0 - 2.0 * alpha),
            PriorFamily::ScaledPowerLaw { alpha, tau } => tau * tau * x.powf(-1.0 - 2.0 * alpha),
            PriorFamily::Exponential { t, q } => (-x.powf(q) * t).exp(),
        }
    }

    /// The scalar tuned by empirical Bayes.
    pub fn hyperparameter(&self) -> f64 {
        match *self {
            PriorFamily::PowerLaw { alpha } => alpha,
            PriorFamily::ScaledPowerLaw { tau, .. } => tau,
            PriorFamily::Exponential { t, .. } => t,
        }
    }

    pub fn variant(&self) -> PriorVariant {
        match *self {
            PriorFamily::PowerLaw { .. } => PriorVariant::PowerLaw,
            PriorFamily::ScaledPowerLaw { alpha, .. } => PriorVariant::ScaledPowerLaw { alpha },
            PriorFamily::Exponential { q, .. } => PriorVariant::Exponential { q },
        }
    }

    /// Upper bound on `sum_{i > m} v_i`.
    fn variance_tail_bound(&self, m: usize) -> f64 {
        let m = m as f64;
        match *self {
            PriorFamily::PowerLaw { alpha } => m.powf(-2.0 * alpha) / (2.0 * alpha),
            PriorFamily::ScaledPowerLaw { alpha, tau } => {
                tau * tau * m.powf(-2.0 * alpha) / (2.0 * alpha)
            }
            PriorFamily::Exponential { t, q } => {
                let x = t * m.powf(q);
                if q >= 1.0 {
                    // x^q lies above its tangent at m
                    (-x).exp() / (t * q * m.powf(q - 1.0))
                } else {
                    // (1/q) t^(-1/q) Gamma(1/q, x), with Gamma(s, x) <= x^(s-1) e^(-x) / (1 - (s-1)/x)
                    let s = 1.0 / q;
                    if x <= s - 1.0 {
                        return f64::INFINITY;
                    }
                    let gamma_bound = x.powf(s - 1.0) * (-x).exp() / (1.0 - (s - 1.0) / x);
                    s * t.powf(-s) * gamma_bound
                }
            }
        }
    }
}

/// A prior family with its free scalar left open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PriorVariant {
    /// free scalar: alpha
    PowerLaw,
    /// free scalar: tau
    ScaledPowerLaw { alpha: f64 },
    /// free scalar: t
    Exponential { q: f64 },
}

impl PriorVariant {
    pub fn with_hyperparameter(&self, h: f64) -> Result<PriorFamily> {
        match *self {
            PriorVariant::PowerLaw => PriorFamily::power_law(h),
            PriorVariant::ScaledPowerLaw { alpha } => PriorFamily::scaled_power_law(alpha, h),
            PriorVariant::Exponential { q } => PriorFamily::exponential(h, q),
        }
    }

    pub fn default_interval(&self) -> SearchInterval {
        match self {
            PriorVariant::ScaledPowerLaw { .. } => SearchInterval {
                lo: 0.01,
                hi: 100.0,
            },
            _ => SearchInterval { lo: 0.01, hi: 10.0 },
        }
    }

    pub fn hyperparameter_name(&self) -> &'static str {
        match self {
            PriorVariant::PowerLaw => "alpha",
            PriorVariant::ScaledPowerLaw { .. } => "tau",
            PriorVariant::Exponential { .. } => "t",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    y: Vec<f64>,
    n: f64,
}

impl ObservationSequence {
    pub fn new(y: Vec<f64>, n: f64) -> Result<Self> {
        if y.is_empty() {
            return invalid("observation sequence must have i_max >= 1");
        }
        if !(n.is_finite() && n > 0.0) {
            return invalid(format!("n must be positive and finite, got {n}"));
        }
        if let Some(k) = y.iter().position(|v| !v.is_finite()) {
            return invalid(format!("observation {} is not finite", k + 1));
        }
        Ok(Self { y, n })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn i_max(&self) -> usize {
        self.y.len()
    }
}

/// Independent Gaussian posterior `theta_i | Y ~ N(mean_i, var_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSpec {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub prior: PriorFamily,
    pub n: f64,
}

impl PosteriorSpec {
    pub fn i_max(&self) -> usize {
        self.mean.len()
    }

    pub fn sd(&self) -> Vec<f64> {
        self.var.iter().map(|v| v.sqrt()).collect()
    }

    pub fn mean_sequence(&self) -> CoefficientSequence {
        CoefficientSequence {
            values: self.mean.clone(),
        }
    }

    /// `E ||theta - mean||^2` under the posterior.
    pub fn total_variance(&self) -> f64 {
        self.var.iter().sum()
    }
}

/// Posterior variances `s_i^2 = 1/(1/v_i + n kappa_i^2)`; they depend on the
/// data only through `n`.
pub fn posterior_variances(spectrum: &OperatorSpectrum, prior: &PriorFamily, n: f64) -> Vec<f64> {
    spectrum
        .kappa()
        .iter()
        .enumerate()
        .map(|(k, &kappa)| {
            let v = prior.variance(k + 1);
            // v / (1 + n kappa^2 v) == 1 / (1/v + n kappa^2), and stays 0 when v underflows
            v / (1.0 + n * kappa * kappa * v)
        })
        .collect()
}

pub fn posterior_spec(
    obs: &ObservationSequence,
    spectrum: &OperatorSpectrum,
    prior: &PriorFamily,
) -> Result<PosteriorSpec> {
    check_lengths(obs, spectrum)?;
    prior.validate()?;
    let n = obs.n();
    let var = posterior_variances(spectrum, prior, n);
    let mean = obs
        .y()
        .iter()
        .zip(spectrum.kappa())
        .zip(&var)
        .map(|((&y, &kappa), &s2)| n * kappa * y * s2)
        .collect();
    Ok(PosteriorSpec {
        mean,
        var,
        prior: *prior,
        n,
    })
}

/// Exact log-density of `Y` under `Y_i ~ N(0, kappa_i^2 v_i + 1/n)`.
pub fn marginal_log_likelihood(
    obs: &ObservationSequence,
    spectrum: &OperatorSpectrum,
    prior: &PriorFamily,
) -> Result<f64> {
    check_lengths(obs, spectrum)?;
    prior.validate()?;
    Ok(log_likelihood_unchecked(obs, spectrum, prior))
}

fn log_likelihood_unchecked(
    obs: &ObservationSequence,
    spectrum: &OperatorSpectrum,
    prior: &PriorFamily,
) -> f64 {
    let noise = 1.0 / obs.n();
    let mut acc = 0.0;
    for (k, (&y, &kappa)) in obs.y().iter().zip(spectrum.kappa()).enumerate() {
        let sigma2 = kappa * kappa * prior.variance(k + 1) + noise;
        acc += (2.0 * PI * sigma2).ln() + y * y / sigma2;
    }
    -0.5 * acc
}

fn check_lengths(obs: &ObservationSequence, spectrum: &OperatorSpectrum) -> Result<()> {
    if obs.i_max() != spectrum.i_max() {
        return invalid(format!(
            "observation length {} does not match spectrum length {}",
            obs.i_max(),
            spectrum.i_max()
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SearchInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let s = Self { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo > 0.0 && self.lo < self.hi) {
            return invalid(format!(
                "search interval must satisfy 0 < lo < hi, got [{}, {}]",
                self.lo, self.hi
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbOptions {
    pub grid_points: usize,
    pub tolerance: f64,
}

impl Default for EbOptions {
    fn default() -> Self {
        Self {
            grid_points: 200,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub value: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EbFit {
    pub prior: PriorFamily,
    pub hyperparameter: f64,
    pub log_likelihood: f64,
    /// Every grid evaluation, in increasing parameter order.
    pub grid: Vec<GridPoint>,
}

pub fn eb_fit(
    obs: &ObservationSequence,
    spectrum: &OperatorSpectrum,
    variant: PriorVariant,
    search: SearchInterval,
) -> Result<EbFit> {
    eb_fit_with(obs, spectrum, variant, search, EbOptions::default())
}

/// Maximise the marginal likelihood over `search`: uniform grid, then
/// golden-section refinement inside the cell around the best grid point.
/// Ties go to the smaller hyperparameter.
pub fn eb_fit_with(
    obs: &ObservationSequence,
    spectrum: &OperatorSpectrum,
    variant: PriorVariant,
    search: SearchInterval,
    options: EbOptions,
) -> Result<EbFit> {
    search.validate()?;
    check_lengths(obs, spectrum)?;
    if options.grid_points < 2 {
        return invalid("eb grid needs at least 2 points");
    }
    if !(options.tolerance.is_finite() && options.tolerance > 0.0) {
        return invalid("eb tolerance must be positive");
    }
    // surface bad fixed parameters (e.g. alpha of ScaledPowerLaw) before the sweep
    variant.with_hyperparameter(search.lo)?;

    let objective = |h: f64| -> f64 {
        let prior = variant
            .with_hyperparameter(h)
            .expect("hyperparameter inside a validated interval");
        let ll = log_likelihood_unchecked(obs, spectrum, &prior);
        if ll.is_nan() {
            f64::NEG_INFINITY
        } else {
            ll
        }
    };

    let g = options.grid_points;
    let width = search.hi - search.lo;
    let values: Vec<f64> = (0..g)
        .map(|k| {
            if k == g - 1 {
                search.hi
            } else {
                search.lo + width * (k as f64) / ((g - 1) as f64)
            }
        })
        .collect();
    let grid: Vec<GridPoint> = values
        .par_iter()
        .map(|&value| GridPoint {
            value,
            log_likelihood: objective(value),
        })
        .collect();

    let mut best = 0;
    for (k, p) in grid.iter().enumerate() {
        if p.log_likelihood > grid[best].log_likelihood {
            best = k;
        }
    }

    let lo = grid[best.saturating_sub(1)].value;
    let hi = grid[(best + 1).min(g - 1)].value;
    let (candidate, candidate_ll) = golden_section_max(&objective, lo, hi, options.tolerance);

    let (hyperparameter, log_likelihood) = if candidate_ll > grid[best].log_likelihood {
        (candidate, candidate_ll)
    } else {
        (grid[best].value, grid[best].log_likelihood)
    };

    Ok(EbFit {
        prior: variant.with_hyperparameter(hyperparameter)?,
        hyperparameter,
        log_likelihood,
        grid,
    })
}

/// Returns the best point seen while shrinking `[lo, hi]` below `tol`.
fn golden_section_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub const TRUNCATION_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationCheck {
    pub i_max: usize,
    /// Upper bound on `sum_{i > i_max} min(v_i, 1/(n kappa_i^2))`.
    pub tail_bound: f64,
    pub radius_sq: f64,
    pub threshold: f64,
    pub adequate: bool,
}

/// Posterior variance left out by truncating at `spectrum.i_max()`,
/// compared with `TRUNCATION_RATIO * radius^2`.
pub fn truncation_check(
    spectrum: &OperatorSpectrum,
    prior: &PriorFamily,
    n: f64,
    radius: f64,
) -> TruncationCheck {
    let i_max = spectrum.i_max();
    let tail_bound = tail_posterior_variance_bound(spectrum, prior, n);
    let radius_sq = radius * radius;
    let threshold = TRUNCATION_RATIO * radius_sq;
    TruncationCheck {
        i_max,
        tail_bound,
        radius_sq,
        threshold,
        adequate: tail_bound <= threshold,
    }
}

pub fn tail_posterior_variance_bound(
    spectrum: &OperatorSpectrum,
    prior: &PriorFamily,
    n: f64,
) -> f64 {
    let i_max = spectrum.i_max();
    match spectrum.kind() {
        SpectrumKind::Custom => prior.variance_tail_bound(i_max),
        _ => {
            // explicit terms over (i_max, 64 i_max], prior-variance bound beyond
            let cutoff = i_max.saturating_mul(64);
            let mut acc = 0.0;
            for i in (i_max + 1)..=cutoff {
                let kappa = spectrum.kappa_at(i).expect("closed-form spectrum");
                acc += prior.variance(i).min(1.0 / (n * kappa * kappa));
            }
            acc + prior.variance_tail_bound(cutoff)
        }
    }
}
