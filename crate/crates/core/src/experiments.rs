//! Simulation studies built on the model, the radius estimators and the
//! samplers: false-positive/false-negative counts of the built-in radius,
//! frequentist coverage, radius/risk scaling in `n`, and curve export.
//!
//! Every random quantity comes from a substream of the master seed keyed by
//! (purpose, n index, repetition, ...), so any repetition can be rerun in
//! isolation and results do not depend on scheduling.

use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::credible_set::{
    build_credible_ball, check_gamma, radius_builtin, radius_precise, CredibleBall, RadiusEstimate,
};
use crate::error::{invalid, Error, Result};
use crate::function_space::{reconstruct, sup_distance, uniform_grid};
use crate::model::{
    eb_fit, posterior_spec, posterior_variances, CoefficientSequence, ObservationSequence,
    OperatorSpectrum, PosteriorSpec, PriorVariant, SearchInterval, SpectrumKind,
};
use crate::samplers::{draw_lawmu, draw_posterior, posterior_draw_radius, RngSeed};
use crate::stats;

const STREAM_DATA: u64 = 1;
const STREAM_DRAWS: u64 = 2;
const STREAM_PRECISE: u64 = 3;
const STREAM_PRECISE_SHARED: u64 = 4;
const STREAM_CURVES: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TruthSpec {
    /// `theta_i = c i^(-beta - 1/2)` with `c` making the truncated sequence unit-norm.
    Power {
        beta: f64,
    },
    Zero,
    /// Coefficients read from a text file (whitespace or comma separated;
    /// `#` starts a comment). Zero-padded or cut to `i_max`.
    Custom {
        path: PathBuf,
    },
}

impl TruthSpec {
    pub fn from_name(name: &str, beta: f64, path: Option<PathBuf>) -> Result<Self> {
        match name {
            "power" => Ok(TruthSpec::Power { beta }),
            "zero" => Ok(TruthSpec::Zero),
            "custom" => match path {
                Some(path) => Ok(TruthSpec::Custom { path }),
                None => invalid("custom truth needs a coefficient file"),
            },
            other => invalid(format!("unknown truth generator '{other}'")),
        }
    }
}

pub fn make_truth(spec: &TruthSpec, i_max: usize) -> Result<CoefficientSequence> {
    if i_max == 0 {
        return invalid("truth needs i_max >= 1");
    }
    match spec {
        TruthSpec::Zero => CoefficientSequence::zeros(i_max),
        TruthSpec::Power { beta } => {
            if !beta.is_finite() || *beta < 0.0 {
                return invalid(format!("power truth needs beta >= 0, got {beta}"));
            }
            let raw: Vec<f64> = (1..=i_max).map(|i| (i as f64).powf(-beta - 0.5)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            CoefficientSequence::new(raw.into_iter().map(|v| v / norm).collect())
        }
        TruthSpec::Custom { path } => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            let mut values = parse_coefficients(&text)?;
            values.resize(i_max, 0.0);
            CoefficientSequence::new(values)
        }
    }
}

fn parse_coefficients(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()) {
            if tok.is_empty() {
                continue;
            }
            match tok.parse::<f64>() {
                Ok(v) => out.push(v),
                Err(_) => return invalid(format!("cannot parse coefficient '{tok}'")),
            }
        }
    }
    if out.is_empty() {
        return invalid("coefficient file holds no values");
    }
    Ok(out)
}

/// `y_i = kappa_i theta_i + n^(-1/2) z_i`.
pub fn simulate_data<R: Rng + ?Sized>(
    truth: &CoefficientSequence,
    spectrum: &OperatorSpectrum,
    n: f64,
    rng: &mut R,
) -> Result<ObservationSequence> {
    check_shared(truth, spectrum)?;
    let noise = 1.0 / n.sqrt();
    let y = truth
        .values()
        .iter()
        .zip(spectrum.kappa())
        .map(|(&theta, &kappa)| {
            let z: f64 = rng.sample(StandardNormal);
            kappa * theta + noise * z
        })
        .collect();
    ObservationSequence::new(y, n)
}

/// The `n -> infinity` limit of `simulate_data`: `y_i = kappa_i theta_i`.
pub fn noiseless_data(
    truth: &CoefficientSequence,
    spectrum: &OperatorSpectrum,
    n: f64,
) -> Result<ObservationSequence> {
    check_shared(truth, spectrum)?;
    let y = truth
        .values()
        .iter()
        .zip(spectrum.kappa())
        .map(|(t, k)| k * t)
        .collect();
    ObservationSequence::new(y, n)
}

fn check_shared(truth: &CoefficientSequence, spectrum: &OperatorSpectrum) -> Result<()> {
    if truth.i_max() != spectrum.i_max() {
        return invalid(format!(
            "truth length {} does not match spectrum length {}",
            truth.i_max(),
            spectrum.i_max()
        ));
    }
    Ok(())
}

/// How the prior hyperparameter is chosen per data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HyperMode {
    Fixed { value: f64 },
    EmpiricalBayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_values: Vec<f64>,
    pub draw_counts: Vec<usize>,
    pub repetitions: usize,
    pub gamma: f64,
    pub blowup: f64,
    pub hyper: HyperMode,
    pub variant: PriorVariant,
    /// `None` uses the variant's default interval.
    pub search: Option<SearchInterval>,
    pub truth: TruthSpec,
    pub spectrum: SpectrumKind,
    pub i_max: usize,
    pub m_precise: usize,
    pub seed: u64,
    pub curve_count: usize,
    pub grid_points: usize,
    pub lawmu_max_attempts: usize,
    pub noiseless: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_values: vec![1000.0],
            draw_counts: vec![500, 2000],
            repetitions: 10,
            gamma: 0.05,
            blowup: 1.0,
            hyper: HyperMode::Fixed { value: 1.0 },
            variant: PriorVariant::PowerLaw,
            search: None,
            truth: TruthSpec::Power { beta: 1.0 },
            spectrum: SpectrumKind::Volterra,
            i_max: 10_000,
            m_precise: 100_000,
            seed: 1,
            curve_count: 50,
            grid_points: crate::function_space::PLOT_POINTS,
            lawmu_max_attempts: crate::samplers::DEFAULT_LAWMU_ATTEMPTS,
            noiseless: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return invalid("at least one n value is required");
        }
        if let Some(n) = self.n_values.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
            return invalid(format!("n values must be positive, got {n}"));
        }
        if self.draw_counts.is_empty() || self.draw_counts.contains(&0) {
            return invalid("draw counts must be nonempty and >= 1");
        }
        if self.repetitions == 0 {
            return invalid("repetitions must be >= 1");
        }
        check_gamma(self.gamma)?;
        if !(self.blowup.is_finite() && self.blowup > 0.0) {
            return invalid(format!(
                "blow-up factor must be positive, got {}",
                self.blowup
            ));
        }
        if let HyperMode::Fixed { value } = self.hyper {
            self.variant.with_hyperparameter(value)?;
        }
        self.search_interval().validate()?;
        self.variant
            .with_hyperparameter(self.search_interval().lo)?;
        if self.i_max == 0 {
            return invalid("i_max must be >= 1");
        }
        if self.m_precise < 2 {
            return invalid("m_precise must be >= 2");
        }
        if self.curve_count == 0 {
            return invalid("curve count must be >= 1");
        }
        if self.grid_points < 2 {
            return invalid("plot grid needs at least 2 points");
        }
        if self.lawmu_max_attempts == 0 {
            return invalid("lawmu max attempts must be >= 1");
        }
        if self.spectrum == SpectrumKind::Custom {
            return invalid("experiments support the volterra and identity spectra");
        }
        match &self.truth {
            TruthSpec::Power { beta } if !(beta.is_finite() && *beta >= 0.0) => {
                invalid(format!("power truth needs beta >= 0, got {beta}"))
            }
            _ => Ok(()),
        }
    }

    pub fn search_interval(&self) -> SearchInterval {
        self.search
            .unwrap_or_else(|| self.variant.default_interval())
    }

    fn root(&self) -> RngSeed {
        RngSeed::new(self.seed, 0)
    }

    fn data_seed(&self, n_index: usize, rep: usize) -> RngSeed {
        self.root()
            .child(STREAM_DATA)
            .child(n_index as u64)
            .child(rep as u64)
    }
}

/// Shared per-run inputs.
struct Setup {
    spectrum: OperatorSpectrum,
    truth: CoefficientSequence,
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            spectrum: OperatorSpectrum::from_kind(config.spectrum, config.i_max)?,
            truth: make_truth(&config.truth, config.i_max)?,
        })
    }

    fn data(
        &self,
        config: &ExperimentConfig,
        n_index: usize,
        rep: usize,
    ) -> Result<ObservationSequence> {
        let n = config.n_values[n_index];
        if config.noiseless {
            noiseless_data(&self.truth, &self.spectrum, n)
        } else {
            let mut rng = config.data_seed(n_index, rep).rng();
            simulate_data(&self.truth, &self.spectrum, n, &mut rng)
        }
    }

    fn posterior(
        &self,
        config: &ExperimentConfig,
        obs: &ObservationSequence,
    ) -> Result<PosteriorSpec> {
        let prior = match config.hyper {
            HyperMode::Fixed { value } => config.variant.with_hyperparameter(value)?,
            HyperMode::EmpiricalBayes => {
                eb_fit(
                    obs,
                    &self.spectrum,
                    config.variant,
                    config.search_interval(),
                )?
                .prior
            }
        };
        posterior_spec(obs, &self.spectrum, &prior)
    }

    /// With a fixed hyperparameter the recentered law depends on `n` only,
    /// so one precise radius serves every repetition.
    fn shared_precise(
        &self,
        config: &ExperimentConfig,
        n_index: usize,
    ) -> Result<Option<RadiusEstimate>> {
        let HyperMode::Fixed { value } = config.hyper else {
            return Ok(None);
        };
        let prior = config.variant.with_hyperparameter(value)?;
        let n = config.n_values[n_index];
        let var = posterior_variances(&self.spectrum, &prior, n);
        let post = PosteriorSpec {
            mean: vec![0.0; var.len()],
            var,
            prior,
            n,
        };
        let seed = config
            .root()
            .child(STREAM_PRECISE_SHARED)
            .child(n_index as u64);
        radius_precise(&post, config.gamma, config.m_precise, seed).map(Some)
    }

    fn precise(
        &self,
        config: &ExperimentConfig,
        post: &PosteriorSpec,
        shared: Option<RadiusEstimate>,
        n_index: usize,
        rep: usize,
    ) -> Result<RadiusEstimate> {
        match shared {
            Some(r) => Ok(r),
            None => {
                let seed = config
                    .root()
                    .child(STREAM_PRECISE)
                    .child(n_index as u64)
                    .child(rep as u64);
                radius_precise(post, config.gamma, config.m_precise, seed)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpFnRep {
    pub n: f64,
    pub draws: usize,
    pub rep: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    /// Draws kept by the built-in rule, always `floor((1 - gamma) N)`.
    pub retained: usize,
    pub threshold_builtin: f64,
    pub radius_precise: f64,
    pub hyperparameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountSummary {
    /// Mean over all repetitions.
    pub mean_all: f64,
    /// Mean over repetitions with at least one occurrence.
    pub mean_conditional: Option<f64>,
    /// Percentage of repetitions with at least one occurrence.
    pub occurrence_pct: f64,
}

impl CountSummary {
    pub fn from_counts(counts: &[usize]) -> Self {
        let total: usize = counts.iter().sum();
        let hits = counts.iter().filter(|&&c| c > 0).count();
        Self {
            mean_all: total as f64 / counts.len() as f64,
            mean_conditional: (hits > 0).then(|| total as f64 / hits as f64),
            occurrence_pct: 100.0 * hits as f64 / counts.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpFnCell {
    pub n: f64,
    pub draws: usize,
    pub fp: CountSummary,
    #[serde(rename = "fn")]
    pub fn_summary: CountSummary,
    pub reps: Vec<FpFnRep>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpFnReport {
    pub gamma: f64,
    pub cells: Vec<FpFnCell>,
}

/// False positives (`R_j <= T` and `R_j > rbar`) and false negatives
/// (`R_j > T` and `R_j <= rbar`) among the given radii.
pub fn classify(radii: &[f64], threshold_builtin: f64, radius_precise: f64) -> (usize, usize) {
    let mut fp = 0;
    let mut fneg = 0;
    for &r in radii {
        let kept = r <= threshold_builtin;
        let inside = r <= radius_precise;
        if kept && !inside {
            fp += 1;
        } else if !kept && inside {
            fneg += 1;
        }
    }
    (fp, fneg)
}

fn fpfn_rep(
    config: &ExperimentConfig,
    setup: &Setup,
    shared: Option<RadiusEstimate>,
    n_index: usize,
    rep: usize,
) -> Result<Vec<FpFnRep>> {
    let obs = setup.data(config, n_index, rep)?;
    let post = setup.posterior(config, &obs)?;
    let precise = setup.precise(config, &post, shared, n_index, rep)?;
    let sd = post.sd();
    let n = config.n_values[n_index];

    config
        .draw_counts
        .iter()
        .enumerate()
        .map(|(draw_index, &draws)| {
            let mut rng = config
                .root()
                .child(STREAM_DRAWS)
                .child(n_index as u64)
                .child(draw_index as u64)
                .child(rep as u64)
                .rng();
            let radii: Vec<f64> = (0..draws)
                .map(|_| posterior_draw_radius(&post.mean, &sd, &mut rng))
                .collect();
            let builtin = radius_builtin(&radii, config.gamma)?;
            let (fp, fn_count) = classify(&radii, builtin.value, precise.value);
            Ok(FpFnRep {
                n,
                draws,
                rep,
                fp,
                fn_count,
                retained: radii.iter().filter(|&&r| r <= builtin.value).count(),
                threshold_builtin: builtin.value,
                radius_precise: precise.value,
                hyperparameter: post.prior.hyperparameter(),
            })
        })
        .collect()
}

/// One repetition of the false-positive/false-negative study, computed in
/// isolation (one entry per draw count).
pub fn fpfn_repetition(
    config: &ExperimentConfig,
    n_index: usize,
    rep: usize,
) -> Result<Vec<FpFnRep>> {
    let setup = Setup::new(config)?;
    if n_index >= config.n_values.len() || rep >= config.repetitions {
        return invalid("repetition index out of range");
    }
    let shared = setup.shared_precise(config, n_index)?;
    fpfn_rep(config, &setup, shared, n_index, rep)
}

pub fn fpfn_experiment(config: &ExperimentConfig) -> Result<FpFnReport> {
    let setup = Setup::new(config)?;
    let mut cells = Vec::new();
    for n_index in 0..config.n_values.len() {
        let shared = setup.shared_precise(config, n_index)?;
        let per_rep: Vec<Vec<FpFnRep>> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| fpfn_rep(config, &setup, shared, n_index, rep))
            .collect::<Result<_>>()?;
        for (draw_index, &draws) in config.draw_counts.iter().enumerate() {
            let reps: Vec<FpFnRep> = per_rep.iter().map(|r| r[draw_index]).collect();
            let fp: Vec<usize> = reps.iter().map(|r| r.fp).collect();
            let fneg: Vec<usize> = reps.iter().map(|r| r.fn_count).collect();
            cells.push(FpFnCell {
                n: config.n_values[n_index],
                draws,
                fp: CountSummary::from_counts(&fp),
                fn_summary: CountSummary::from_counts(&fneg),
                reps,
            });
        }
    }
    Ok(FpFnReport {
        gamma: config.gamma,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageRep {
    pub rep: usize,
    pub covered: bool,
    pub radius: f64,
    /// `||theta_hat - theta_0||_2`
    pub distance: f64,
    pub hyperparameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageCell {
    pub n: f64,
    pub coverage: f64,
    pub mean_radius: f64,
    pub reps: Vec<CoverageRep>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub gamma: f64,
    pub blowup: f64,
    pub cells: Vec<CoverageCell>,
}

fn coverage_rep(
    config: &ExperimentConfig,
    setup: &Setup,
    shared: Option<RadiusEstimate>,
    n_index: usize,
    rep: usize,
) -> Result<CoverageRep> {
    let obs = setup.data(config, n_index, rep)?;
    let post = setup.posterior(config, &obs)?;
    let radius = setup.precise(config, &post, shared, n_index, rep)?;
    let ball = build_credible_ball(&post, &radius, config.blowup, config.gamma)?;
    Ok(CoverageRep {
        rep,
        covered: ball.contains(&setup.truth),
        radius: radius.value,
        distance: ball.center.distance(&setup.truth),
        hyperparameter: post.prior.hyperparameter(),
    })
}

pub fn coverage_experiment(config: &ExperimentConfig) -> Result<CoverageReport> {
    let setup = Setup::new(config)?;
    let mut cells = Vec::new();
    for n_index in 0..config.n_values.len() {
        let shared = setup.shared_precise(config, n_index)?;
        let reps: Vec<CoverageRep> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| coverage_rep(config, &setup, shared, n_index, rep))
            .collect::<Result<_>>()?;
        let covered = reps.iter().filter(|r| r.covered).count();
        let radii: Vec<f64> = reps.iter().map(|r| r.radius).collect();
        cells.push(CoverageCell {
            n: config.n_values[n_index],
            coverage: covered as f64 / reps.len() as f64,
            mean_radius: stats::mean(&radii),
            reps,
        });
    }
    Ok(CoverageReport {
        gamma: config.gamma,
        blowup: config.blowup,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub n: f64,
    pub mean_radius: f64,
    /// Mean of `||theta_hat - theta_0||_2`.
    pub mean_risk: f64,
    /// Mean of `sqrt(sum_i s_i^2)`, evaluated directly from the posterior variances.
    pub root_total_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub radius_slope: f64,
    pub risk_slope: f64,
    pub root_total_variance_slope: f64,
}

pub fn rate_experiment(config: &ExperimentConfig) -> Result<RateReport> {
    let setup = Setup::new(config)?;
    let (lo, hi) = config
        .n_values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &n| {
            (lo.min(n), hi.max(n))
        });
    if (hi / lo).log10() < 3.0 - 1e-9 {
        return invalid("rate experiment needs n values spanning at least 3 decades");
    }
    let mut rows = Vec::new();
    for n_index in 0..config.n_values.len() {
        let shared = setup.shared_precise(config, n_index)?;
        let per_rep: Vec<(f64, f64, f64)> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| -> Result<(f64, f64, f64)> {
                let obs = setup.data(config, n_index, rep)?;
                let post = setup.posterior(config, &obs)?;
                let radius = setup.precise(config, &post, shared, n_index, rep)?;
                let risk = post.mean_sequence().distance(&setup.truth);
                Ok((radius.value, risk, post.total_variance().sqrt()))
            })
            .collect::<Result<_>>()?;
        let col = |f: fn(&(f64, f64, f64)) -> f64| {
            stats::mean(&per_rep.iter().map(f).collect::<Vec<_>>())
        };
        rows.push(RateRow {
            n: config.n_values[n_index],
            mean_radius: col(|r| r.0),
            mean_risk: col(|r| r.1),
            root_total_variance: col(|r| r.2),
        });
    }
    let log_n: Vec<f64> = rows.iter().map(|r| r.n.ln()).collect();
    let slope = |f: fn(&RateRow) -> f64| {
        let ys: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
        stats::least_squares_slope(&log_n, &ys)
    };
    Ok(RateReport {
        radius_slope: slope(|r| r.mean_radius),
        risk_slope: slope(|r| r.mean_risk),
        root_total_variance_slope: slope(|r| r.root_total_variance),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    /// Perturbed posterior mean conditioned on the credible ball.
    Lawmu,
    Posterior,
}

impl Law {
    pub fn as_str(&self) -> &'static str {
        match self {
            Law::Lawmu => "lawmu",
            Law::Posterior => "posterior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawSelection {
    Posterior,
    Lawmu,
    Both,
}

impl LawSelection {
    pub fn laws(&self) -> Vec<Law> {
        match self {
            LawSelection::Posterior => vec![Law::Posterior],
            LawSelection::Lawmu => vec![Law::Lawmu],
            LawSelection::Both => vec![Law::Lawmu, Law::Posterior],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CurveId {
    Sample(usize),
    Mean,
    Truth,
}

impl CurveId {
    pub fn label(&self) -> String {
        match self {
            CurveId::Sample(j) => j.to_string(),
            CurveId::Mean => "mean".into(),
            CurveId::Truth => "truth".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub id: CurveId,
    pub values: Vec<f64>,
    /// l^2 distance of the sampled coefficients to the ball center.
    pub coefficient_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePanel {
    pub law: Law,
    pub n: f64,
    pub hyperparameter: f64,
    pub radius: f64,
    /// `blowup * radius`
    pub effective_radius: f64,
    /// Sampled curves first, then the posterior mean and the truth.
    pub curves: Vec<Curve>,
}

impl CurvePanel {
    pub fn samples(&self) -> impl Iterator<Item = &Curve> {
        self.curves
            .iter()
            .filter(|c| matches!(c.id, CurveId::Sample(_)))
    }

    pub fn reference(&self, id: CurveId) -> Option<&Curve> {
        self.curves.iter().find(|c| c.id == id)
    }

    /// Mean over sampled curves of the grid sup-distance to the posterior-mean curve.
    pub fn mean_sup_distance(&self, xs: &[f64]) -> Result<f64> {
        let mean = self
            .reference(CurveId::Mean)
            .ok_or_else(|| Error::InvalidArgument("panel has no mean curve".into()))?;
        let as_grid = |c: &Curve| crate::function_space::FunctionGrid {
            xs: xs.to_vec(),
            values: c.values.clone(),
        };
        let m = as_grid(mean);
        let dists: Vec<f64> = self
            .samples()
            .map(|c| sup_distance(&as_grid(c), &m))
            .collect::<Result<_>>()?;
        Ok(stats::mean(&dists))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveDataset {
    pub xs: Vec<f64>,
    /// Ordered by (law, n).
    pub panels: Vec<CurvePanel>,
}

impl CurveDataset {
    pub fn row_count(&self) -> usize {
        self.panels.iter().map(|p| p.curves.len()).sum::<usize>() * self.xs.len()
    }
}

pub fn export_curves(config: &ExperimentConfig, which: LawSelection) -> Result<CurveDataset> {
    let setup = Setup::new(config)?;
    let xs = uniform_grid(config.grid_points)?;
    let truth_curve = reconstruct(&setup.truth, &xs)?.values;

    struct Fitted {
        post: PosteriorSpec,
        ball: CredibleBall,
        mean_curve: Vec<f64>,
    }
    let fitted: Vec<Fitted> = (0..config.n_values.len())
        .map(|n_index| {
            let obs = setup.data(config, n_index, 0)?;
            let post = setup.posterior(config, &obs)?;
            let shared = setup.shared_precise(config, n_index)?;
            let radius = setup.precise(config, &post, shared, n_index, 0)?;
            let ball = build_credible_ball(&post, &radius, config.blowup, config.gamma)?;
            let mean_curve = reconstruct(&ball.center, &xs)?.values;
            Ok(Fitted {
                post,
                ball,
                mean_curve,
            })
        })
        .collect::<Result<_>>()?;

    let mut panels = Vec::new();
    for law in which.laws() {
        for (n_index, fit) in fitted.iter().enumerate() {
            let base = config
                .root()
                .child(STREAM_CURVES)
                .child(n_index as u64)
                .child(law as u64);
            let mut curves: Vec<Curve> = (0..config.curve_count)
                .into_par_iter()
                .map(|j| -> Result<Curve> {
                    let mut rng = base.child(j as u64).rng();
                    let sample = match law {
                        Law::Posterior => draw_posterior(&fit.post, &mut rng),
                        Law::Lawmu => {
                            draw_lawmu(
                                &fit.ball.center,
                                fit.ball.radius,
                                &fit.ball,
                                &mut rng,
                                config.lawmu_max_attempts,
                            )?
                            .sample
                        }
                    };
                    Ok(Curve {
                        id: CurveId::Sample(j),
                        values: reconstruct(&sample, &xs)?.values,
                        coefficient_distance: Some(sample.distance(&fit.ball.center)),
                    })
                })
                .collect::<Result<_>>()?;
            curves.push(Curve {
                id: CurveId::Mean,
                values: fit.mean_curve.clone(),
                coefficient_distance: None,
            });
            curves.push(Curve {
                id: CurveId::Truth,
                values: truth_curve.clone(),
                coefficient_distance: None,
            });
            panels.push(CurvePanel {
                law,
                n: config.n_values[n_index],
                hyperparameter: fit.post.prior.hyperparameter(),
                radius: fit.ball.radius,
                effective_radius: fit.ball.effective_radius(),
                curves,
            });
        }
    }
    Ok(CurveDataset { xs, panels })
}

/// Observations of repetition `rep` at `n_values[n_index]`.
pub fn observations(
    config: &ExperimentConfig,
    n_index: usize,
    rep: usize,
) -> Result<ObservationSequence> {
    let setup = Setup::new(config)?;
    if n_index >= config.n_values.len() {
        return invalid("n index out of range");
    }
    setup.data(config, n_index, rep)
}

/// Posterior and precise radius of repetition `rep` at `n_values[n_index]`,
/// drawn from the same substreams the experiments use.
pub fn posterior_and_radius(
    config: &ExperimentConfig,
    n_index: usize,
    rep: usize,
) -> Result<(PosteriorSpec, RadiusEstimate)> {
    let setup = Setup::new(config)?;
    if n_index >= config.n_values.len() {
        return invalid("n index out of range");
    }
    let obs = setup.data(config, n_index, rep)?;
    let post = setup.posterior(config, &obs)?;
    let shared = setup.shared_precise(config, n_index)?;
    let radius = setup.precise(config, &post, shared, n_index, rep)?;
    Ok((post, radius))
}
