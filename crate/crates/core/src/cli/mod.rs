//! Command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`] from (in increasing priority)
//! the subcommand defaults, an optional JSON file given by `--config`, and
//! explicit flags. The resolved config is echoed in the JSON manifest printed
//! on stdout, and feeding that echo back through `--config` reproduces the
//! run's CSV output byte for byte.
//!
//! Exit codes: 0 success, 2 invalid invocation or config, 3 runtime failure.

mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{
    coverage_experiment, export_curves, fpfn_experiment, observations, posterior_and_radius,
    rate_experiment, CurveId, ExperimentConfig, HyperMode, LawSelection, TruthSpec,
};
use crate::model::{
    eb_fit, truncation_check, OperatorSpectrum, PriorVariant, SearchInterval, SpectrumKind,
    TruncationCheck,
};

pub use output::{format_number, write_svg};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const OUT_DIR_ENV: &str = "EBCREDIBLE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "ebcredible",
    version,
    about = "Empirical-Bayes credible balls for sequence-space inverse problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Precise credible-ball radius from the recentered posterior.
    Radius(Flags),
    /// Empirical-Bayes hyperparameter fit on simulated data.
    EbFit(Flags),
    /// False positives/negatives of the built-in order-statistic radius.
    Fpfn(Flags),
    /// Frequentist coverage of the credible ball.
    Coverage(Flags),
    /// Radius and risk scaling in n.
    Rate(Flags),
    /// Posterior and lawmu sample curves (CSV and SVG).
    Curves(Flags),
    /// Truncation adequacy of i_max.
    CheckTruncation(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Radius(_) => "radius",
            Command::EbFit(_) => "eb-fit",
            Command::Fpfn(_) => "fpfn",
            Command::Coverage(_) => "coverage",
            Command::Rate(_) => "rate",
            Command::Curves(_) => "curves",
            Command::CheckTruncation(_) => "check-truncation",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Radius(f)
            | Command::EbFit(f)
            | Command::Fpfn(f)
            | Command::Coverage(f)
            | Command::Rate(f)
            | Command::Curves(f)
            | Command::CheckTruncation(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PriorArg {
    Power,
    Scaled,
    Exponential,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpectrumArg {
    Volterra,
    Identity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LawsArg {
    Posterior,
    Lawmu,
    Both,
}

#[derive(Debug, Clone, Args)]
struct Flags {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $EBCREDIBLE_OUT_DIR, else the current directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (does not affect results).
    #[arg(long)]
    threads: Option<usize>,

    /// Inverse noise levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<f64>>,
    /// Posterior draw counts N, comma separated.
    #[arg(long, value_delimiter = ',')]
    draws: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Blow-up factor L of the ball.
    #[arg(long)]
    blowup: Option<f64>,

    #[arg(long, value_enum)]
    prior: Option<PriorArg>,
    /// Regularity alpha (fixes it for the power-law prior).
    #[arg(long)]
    alpha: Option<f64>,
    /// Fixed scale tau of the scaled power-law prior.
    #[arg(long)]
    tau: Option<f64>,
    /// Fixed time t of the exponential prior.
    #[arg(long)]
    t: Option<f64>,
    /// Exponent q of the exponential prior, lambda_i = i^q.
    #[arg(long)]
    q: Option<f64>,
    /// Fit the free prior hyperparameter by marginal likelihood.
    #[arg(long)]
    eb: bool,
    #[arg(long)]
    search_lo: Option<f64>,
    #[arg(long)]
    search_hi: Option<f64>,

    /// Truth generator: power, zero or custom.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long)]
    truth_beta: Option<f64>,
    #[arg(long)]
    truth_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    spectrum: Option<SpectrumArg>,
    #[arg(long)]
    i_max: Option<usize>,
    /// Sample size of the precise radius estimate.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Observe kappa_i theta_i without noise.
    #[arg(long)]
    noiseless: bool,

    #[arg(long, value_enum)]
    laws: Option<LawsArg>,
    /// Sample curves per law and n.
    #[arg(long)]
    count: Option<usize>,
    /// Plot grid points.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    max_attempts: Option<usize>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub laws: LawSelection,
}

impl RunConfig {
    fn defaults_for(command: &str) -> Self {
        let mut e = ExperimentConfig::default();
        match command {
            "radius" | "check-truncation" => {
                e.n_values = vec![1000.0];
                e.repetitions = 1;
            }
            "eb-fit" => {
                e.n_values = vec![1000.0];
                e.repetitions = 1;
                e.hyper = HyperMode::EmpiricalBayes;
            }
            "fpfn" => {
                e.n_values = vec![1000.0, 1e6];
            }
            "coverage" => {
                e.n_values = vec![1000.0, 1e6];
                e.hyper = HyperMode::EmpiricalBayes;
            }
            "rate" => {
                e.n_values = vec![1e3, 1e4, 1e5, 1e6];
            }
            "curves" => {
                e.n_values = vec![1000.0, 1e6];
                e.hyper = HyperMode::EmpiricalBayes;
            }
            _ => {}
        }
        Self {
            experiment: e,
            laws: LawSelection::Both,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub duration_secs: f64,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub result: Value,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => EXIT_INVALID,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Runs the CLI against the process's stdout/stderr; `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_INVALID
                }
            };
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(
    cli: &Cli,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let command = cli.command.name();
    let flags = cli.command.flags();
    let config = resolve_config(command, flags)?;
    config.experiment.validate()?;
    let out_dir = flags
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let started = Instant::now();
    let work = || dispatch(&cli.command, &config);
    let Outcome {
        files,
        result,
        warnings,
    } = match flags.threads {
        Some(0) => return Err(Failure::invalid("--threads must be >= 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure {
                code: EXIT_RUNTIME,
                message: e.to_string(),
            })?
            .install(work)?,
        None => work()?,
    };

    std::fs::create_dir_all(&out_dir).map_err(|source| io_failure(&out_dir, source))?;
    let mut outputs = Vec::new();
    for file in files {
        let path = out_dir.join(&file.name);
        std::fs::write(&path, file.contents).map_err(|source| io_failure(&path, source))?;
        outputs.push(path.display().to_string());
    }
    for w in &warnings {
        let _ = writeln!(err, "warning: {w}");
    }

    let manifest = RunManifest {
        tool: "ebcredible",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        seed: config.experiment.seed,
        config,
        duration_secs: started.elapsed().as_secs_f64(),
        outputs,
        warnings,
        result,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    writeln!(out, "{text}").map_err(|e| Failure {
        code: EXIT_RUNTIME,
        message: format!("cannot write manifest: {e}"),
    })?;
    Ok(())
}

fn io_failure(path: &Path, source: std::io::Error) -> Failure {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
    .into()
}

fn resolve_config(command: &str, flags: &Flags) -> std::result::Result<RunConfig, Failure> {
    let defaults = RunConfig::defaults_for(command);
    let mut config = match &flags.config {
        None => defaults,
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::invalid(format!("cannot read config {}: {e}", path.display()))
            })?;
            let file: Value = serde_json::from_str(&text).map_err(|e| {
                Failure::invalid(format!("config {} is not valid JSON: {e}", path.display()))
            })?;
            let Value::Object(file) = file else {
                return Err(Failure::invalid("config file must hold a JSON object"));
            };
            let mut merged = serde_json::to_value(&defaults).expect("defaults serialise");
            let base = merged.as_object_mut().expect("config is an object");
            for (key, value) in file {
                if !base.contains_key(&key) {
                    return Err(Failure::invalid(format!("unknown config key '{key}'")));
                }
                base.insert(key, value);
            }
            serde_json::from_value(merged)
                .map_err(|e| Failure::invalid(format!("invalid config {}: {e}", path.display())))?
        }
    };
    apply_flags(&mut config, flags)?;
    Ok(config)
}

fn apply_flags(config: &mut RunConfig, f: &Flags) -> std::result::Result<(), Failure> {
    let e = &mut config.experiment;
    if let Some(n) = &f.n {
        e.n_values = n.clone();
    }
    if let Some(d) = &f.draws {
        e.draw_counts = d.clone();
    }
    if let Some(r) = f.reps {
        e.repetitions = r;
    }
    if let Some(g) = f.gamma {
        e.gamma = g;
    }
    if let Some(b) = f.blowup {
        e.blowup = b;
    }

    if let Some(p) = f.prior {
        let current_alpha = match e.variant {
            PriorVariant::ScaledPowerLaw { alpha } => alpha,
            _ => 1.0,
        };
        let current_q = match e.variant {
            PriorVariant::Exponential { q } => q,
            _ => 2.0,
        };
        let changed = std::mem::discriminant(&e.variant);
        e.variant = match p {
            PriorArg::Power => PriorVariant::PowerLaw,
            PriorArg::Scaled => PriorVariant::ScaledPowerLaw {
                alpha: current_alpha,
            },
            PriorArg::Exponential => PriorVariant::Exponential { q: current_q },
        };
        if changed != std::mem::discriminant(&e.variant) {
            // the old fixed value belonged to another parameter
            e.hyper = HyperMode::EmpiricalBayes;
            e.search = None;
        }
    }
    let fixed = match &mut e.variant {
        PriorVariant::PowerLaw => {
            if f.tau.is_some() || f.t.is_some() || f.q.is_some() {
                return Err(Failure::invalid(
                    "--tau, --t and --q do not apply to the power-law prior",
                ));
            }
            f.alpha
        }
        PriorVariant::ScaledPowerLaw { alpha } => {
            if let Some(a) = f.alpha {
                *alpha = a;
            }
            if f.t.is_some() || f.q.is_some() {
                return Err(Failure::invalid(
                    "--t and --q do not apply to the scaled prior",
                ));
            }
            f.tau
        }
        PriorVariant::Exponential { q } => {
            if let Some(v) = f.q {
                *q = v;
            }
            if f.alpha.is_some() || f.tau.is_some() {
                return Err(Failure::invalid(
                    "--alpha and --tau do not apply to the exponential prior",
                ));
            }
            f.t
        }
    };
    match (fixed, f.eb) {
        (Some(_), true) => {
            return Err(Failure::invalid(
                "--eb conflicts with a fixed value of the fitted hyperparameter",
            ))
        }
        (Some(v), false) => e.hyper = HyperMode::Fixed { value: v },
        (None, true) => e.hyper = HyperMode::EmpiricalBayes,
        (None, false) => {}
    }
    if f.search_lo.is_some() || f.search_hi.is_some() {
        let base = e.search_interval();
        e.search = Some(SearchInterval {
            lo: f.search_lo.unwrap_or(base.lo),
            hi: f.search_hi.unwrap_or(base.hi),
        });
    }

    if f.truth.is_some() || f.truth_beta.is_some() || f.truth_file.is_some() {
        let name = f.truth.clone().unwrap_or_else(|| match &e.truth {
            TruthSpec::Power { .. } => "power".into(),
            TruthSpec::Zero => "zero".into(),
            TruthSpec::Custom { .. } => "custom".into(),
        });
        let beta = f.truth_beta.unwrap_or(match e.truth {
            TruthSpec::Power { beta } => beta,
            _ => 1.0,
        });
        let path = f.truth_file.clone().or(match &e.truth {
            TruthSpec::Custom { path } => Some(path.clone()),
            _ => None,
        });
        e.truth = TruthSpec::from_name(&name, beta, path)?;
    }
    if let Some(s) = f.spectrum {
        e.spectrum = match s {
            SpectrumArg::Volterra => SpectrumKind::Volterra,
            SpectrumArg::Identity => SpectrumKind::Identity,
        };
    }
    if let Some(i) = f.i_max {
        e.i_max = i;
    }
    if let Some(m) = f.m {
        e.m_precise = m;
    }
    if let Some(s) = f.seed {
        e.seed = s;
    }
    if f.noiseless {
        e.noiseless = true;
    }
    if let Some(c) = f.count {
        e.curve_count = c;
    }
    if let Some(g) = f.grid {
        e.grid_points = g;
    }
    if let Some(a) = f.max_attempts {
        e.lawmu_max_attempts = a;
    }
    if let Some(l) = f.laws {
        config.laws = match l {
            LawsArg::Posterior => LawSelection::Posterior,
            LawsArg::Lawmu => LawSelection::Lawmu,
            LawsArg::Both => LawSelection::Both,
        };
    }
    Ok(())
}

struct OutputFile {
    name: String,
    contents: String,
}

struct Outcome {
    files: Vec<OutputFile>,
    result: Value,
    warnings: Vec<String>,
}

fn dispatch(command: &Command, config: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Radius(_) => cmd_radius(config),
        Command::EbFit(_) => cmd_eb_fit(config),
        Command::Fpfn(_) => cmd_fpfn(config),
        Command::Coverage(_) => cmd_coverage(config),
        Command::Rate(_) => cmd_rate(config),
        Command::Curves(_) => cmd_curves(config),
        Command::CheckTruncation(_) => cmd_check_truncation(config),
    }
}

fn truncation_warning(check: &TruncationCheck, n: f64) -> Option<String> {
    (!check.adequate).then(|| {
        format!(
            "truncation at i_max = {} leaves posterior tail variance <= {:.3e} at n = {n}, above {:.3e} (1e-4 x radius^2); raise --i-max",
            check.i_max, check.tail_bound, check.threshold
        )
    })
}

fn cmd_radius(config: &RunConfig) -> Result<Outcome> {
    let e = &config.experiment;
    let mut table =
        output::CsvTable::new(&["n", "hyperparameter", "gamma", "m", "value", "std_error"]);
    let mut estimates = Vec::new();
    let mut warnings = Vec::new();
    for (k, &n) in e.n_values.iter().enumerate() {
        let spectrum = OperatorSpectrum::from_kind(e.spectrum, e.i_max)?;
        let (post, est) = posterior_and_radius(e, k, 0)?;
        let check = truncation_check(&spectrum, &post.prior, n, est.value);
        warnings.extend(truncation_warning(&check, n));
        let h = post.prior.hyperparameter();
        table.push(
            vec![n, h],
            vec![
                format_number(n),
                format_number(h),
                format_number(e.gamma),
                e.m_precise.to_string(),
                format_number(est.value),
                format_number(est.std_error),
            ],
        );
        estimates.push(json!({
            "n": n,
            "hyperparameter": h,
            "value": est.value,
            "std_error": est.std_error,
            "sample_size": est.sample_size,
            "method": est.method,
        }));
    }
    Ok(Outcome {
        files: vec![table.into_file("radius.csv")],
        result: json!({ "estimates": estimates }),
        warnings,
    })
}

fn cmd_eb_fit(config: &RunConfig) -> Result<Outcome> {
    let e = &config.experiment;
    let spectrum = OperatorSpectrum::from_kind(e.spectrum, e.i_max)?;
    let mut fits_table = output::CsvTable::new(&["n", "rep", "hyperparameter", "log_likelihood"]);
    let mut grid_table =
        output::CsvTable::new(&["n", "rep", "grid_index", "hyperparameter", "log_likelihood"]);
    let mut fits = Vec::new();
    for (k, &n) in e.n_values.iter().enumerate() {
        for rep in 0..e.repetitions {
            let obs = observations(e, k, rep)?;
            let fit = eb_fit(&obs, &spectrum, e.variant, e.search_interval())?;
            fits_table.push(
                vec![n, rep as f64],
                vec![
                    format_number(n),
                    rep.to_string(),
                    format_number(fit.hyperparameter),
                    format_number(fit.log_likelihood),
                ],
            );
            for (g, p) in fit.grid.iter().enumerate() {
                grid_table.push(
                    vec![n, rep as f64, g as f64],
                    vec![
                        format_number(n),
                        rep.to_string(),
                        g.to_string(),
                        format_number(p.value),
                        format_number(p.log_likelihood),
                    ],
                );
            }
            fits.push(json!({
                "n": n,
                "rep": rep,
                "parameter": e.variant.hyperparameter_name(),
                "hyperparameter": fit.hyperparameter,
                "log_likelihood": fit.log_likelihood,
            }));
        }
    }
    Ok(Outcome {
        files: vec![
            fits_table.into_file("eb_fit.csv"),
            grid_table.into_file("eb_grid.csv"),
        ],
        result: json!({ "fits": fits }),
        warnings: Vec::new(),
    })
}

fn cmd_fpfn(config: &RunConfig) -> Result<Outcome> {
    let e = &config.experiment;
    let report = fpfn_experiment(e)?;
    let mut raw = output::CsvTable::new(&[
        "n",
        "N",
        "rep",
        "fp",
        "fn",
        "threshold_builtin",
        "radius_precise",
    ]);
    let mut summary = output::CsvTable::new(&[
        "n",
        "N",
        "mean_fp_all",
        "mean_fp_conditional",
        "occurrence_fp_pct",
        "mean_fn_all",
        "mean_fn_conditional",
        "occurrence_fn_pct",
    ]);
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for cell in &report.cells {
        for r in &cell.reps {
            raw.push(
                vec![r.n, r.draws as f64, r.rep as f64],
                vec![
                    format_number(r.n),
                    r.draws.to_string(),
                    r.rep.to_string(),
                    r.fp.to_string(),
                    r.fn_count.to_string(),
                    format_number(r.threshold_builtin),
                    format_number(r.radius_precise),
                ],
            );
        }
        summary.push(
            vec![cell.n, cell.draws as f64],
            vec![
                format_number(cell.n),
                cell.draws.to_string(),
                format_number(cell.fp.mean_all),
                opt(cell.fp.mean_conditional),
                format_number(cell.fp.occurrence_pct),
                format_number(cell.fn_summary.mean_all),
                opt(cell.fn_summary.mean_conditional),
                format_number(cell.fn_summary.occurrence_pct),
            ],
        );
    }
    let warnings = precise_truncation_warnings(
        e,
        &report
            .cells
            .iter()
            .map(|c| (c.n, c.reps[0].radius_precise))
            .collect::<Vec<_>>(),
    )?;
    Ok(Outcome {
        files: vec![
            raw.into_file("fpfn.csv"),
            summary.into_file("fpfn_summary.csv"),
        ],
        result: serde_json::to_value(&report).expect("report serialises"),
        warnings,
    })
}

/// Truncation warnings for (n, radius) pairs under a fixed hyperparameter;
/// empirical-Bayes runs are checked per subcommand where a single fit exists.
fn precise_truncation_warnings(e: &ExperimentConfig, radii: &[(f64, f64)]) -> Result<Vec<String>> {
    let HyperMode::Fixed { value } = e.hyper else {
        return Ok(Vec::new());
    };
    let spectrum = OperatorSpectrum::from_kind(e.spectrum, e.i_max)?;
    let prior = e.variant.with_hyperparameter(value)?;
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for &(n, r) in radii {
        if seen.contains(&n.to_bits()) {
            continue;
        }
        seen.push(n.to_bits());
        out.extend(truncation_warning(
            &truncation_check(&spectrum, &prior, n, r),
            n,
        ));
    }
    Ok(out)
}

fn cmd_coverage(config: &RunConfig) -> Result<Outcome> {
    let e = &config.experiment;
    let report = coverage_experiment(e)?;
    let mut raw = output::CsvTable::new(&[
        "n",
        "rep",
        "covered",
        "radius",
        "distance",
        "hyperparameter",
    ]);
    let mut summary = output::CsvTable::new(&["n", "coverage", "mean_radius"]);
    for cell in &report.cells {
        for r in &cell.reps {
            raw.push(
                vec![cell.n, r.rep as f64],
                vec![
                    format_number(cell.n),
                    r.rep.to_string(),
                    (r.covered as u8).to_string(),
                    format_number(r.radius),
                    format_number(r.distance),
                    format_number(r.hyperparameter),
                ],
            );
        }
        summary.push(
            vec![cell.n],
            vec![
                format_number(cell.n),
                format_number(cell.coverage),
                format_number(cell.mean_radius),
            ],
        );
    }
    let warnings = precise_truncation_warnings(
        e,
        &report
            .cells
            .iter()
            .map(|c| (c.n, c.mean_radius))
            .collect::<Vec<_>>(),
    )?;
    Ok(Outcome {
        files: vec![
            raw.into_file("coverage.csv"),
            summary.into_file("coverage_summary.csv"),
        ],
        result: json!({
            "gamma": report.gamma,
            "blowup": report.blowup,
            "cells": report.cells.iter().map(|c| json!({
                "n": c.n,
                "coverage": c.coverage,
                "mean_radius": c.mean_radius,
            })).collect::<Vec<_>>(),
        }),
        warnings,
    })
}

fn cmd_rate(config: &RunConfig) -> Result<Outcome> {
    let e = &config.experiment;
    let report = rate_experiment(e)?;
    let mut table =
        output::CsvTable::new(&["n", "mean_radius", "mean_risk", "root_total_variance"]);
    for r in &report.rows {
        table.push(
            vec![r.n],
            vec![
                format_number(r.n),
                format_number(r.mean_radius),
                format_number(r.mean_risk),
                format_number(r.root_total_variance),
            ],
        );
    }
    let warnings = precise_truncation_warnings(
        e,
        &report
            .rows
            .iter()
            .map(|r| (r.n, r.mean_radius))
            .collect::<Vec<_>>(),
    )?;
    Ok(Outcome {
        files: vec![table.into_file("rate.csv")],
        result: serde_json::to_value(&report).expect("report serialises"),
        warnings,
    })
}

fn cmd_curves(config: &RunConfig) -> Result<Outcome> {
    let e = &config.experiment;
    let data = export_curves(e, config.laws)?;
    let mut table = output::CsvTable::new(&["law", "n", "curve_id", "x", "value"]);
    for panel in &data.panels {
        for curve in &panel.curves {
            let id_rank = match curve.id {
                CurveId::Sample(j) => j as f64,
                CurveId::Mean => f64::MAX / 2.0,
                CurveId::Truth => f64::MAX,
            };
            for (k, (&x, &v)) in data.xs.iter().zip(&curve.values).enumerate() {
                table.push(
                    vec![panel.law as u8 as f64, panel.n, id_rank, k as f64],
                    vec![
                        panel.law.as_str().to_string(),
                        format_number(panel.n),
                        curve.id.label(),
                        format_number(x),
                        format_number(v),
                    ],
                );
            }
        }
    }
    let svg = write_svg(&data);
    let panels: Vec<Value> = data
        .panels
        .iter()
        .map(|p| {
            json!({
                "law": p.law,
                "n": p.n,
                "hyperparameter": p.hyperparameter,
                "radius": p.radius,
                "curves": p.samples().count(),
                "mean_sup_distance": p.mean_sup_distance(&data.xs).ok(),
            })
        })
        .collect();
    Ok(Outcome {
        files: vec![
            table.into_file("curves.csv"),
            OutputFile {
                name: "curves.svg".into(),
                contents: svg,
            },
        ],
        result: json!({ "grid_points": data.xs.len(), "panels": panels }),
        warnings: Vec::new(),
    })
}

fn cmd_check_truncation(config: &RunConfig) -> Result<Outcome> {
    let e = &config.experiment;
    let mut table = output::CsvTable::new(&[
        "n",
        "hyperparameter",
        "i_max",
        "tail_bound",
        "radius_sq",
        "threshold",
        "adequate",
    ]);
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    for (k, &n) in e.n_values.iter().enumerate() {
        let spectrum = OperatorSpectrum::from_kind(e.spectrum, e.i_max)?;
        let (post, est) = posterior_and_radius(e, k, 0)?;
        let check = truncation_check(&spectrum, &post.prior, n, est.value);
        warnings.extend(truncation_warning(&check, n));
        let h = post.prior.hyperparameter();
        table.push(
            vec![n, h],
            vec![
                format_number(n),
                format_number(h),
                check.i_max.to_string(),
                format_number(check.tail_bound),
                format_number(check.radius_sq),
                format_number(check.threshold),
                check.adequate.to_string(),
            ],
        );
        checks.push(json!({ "n": n, "hyperparameter": h, "check": check }));
    }
    Ok(Outcome {
        files: vec![table.into_file("truncation.csv")],
        result: json!({ "checks": checks }),
        warnings,
    })
}
