//! Simulation-based checks against independent oracles.

mod common;

use ebcredible::credible_set::recentered_radii;
use ebcredible::experiments::{
    coverage_experiment, fpfn_experiment, ExperimentConfig, HyperMode, TruthSpec,
};
use ebcredible::function_space::{sup_tube_quantile, SUP_POINTS};
use ebcredible::model::{posterior_variances, SpectrumKind};
use ebcredible::samplers::{
    draw_lawmu, draw_posterior, posterior_draw_radius, DEFAULT_LAWMU_ATTEMPTS,
};
use ebcredible::*;
use rand::Rng;
use rand_distr::StandardNormal;

use common::lawmu_acceptance_oracle;

/// Acceptance probability of the lawmu proposal with a = r, i_max = 10^4,
/// measured once with 10^6 brute-force proposals and frozen.
const LAWMU_ACCEPTANCE: f64 = 0.1269;

/// Frozen after 200 calibration seeds: |alpha_hat - 1| had median 0.11,
/// 90th percentile 0.38 and 95th percentile 0.45.
const EB_TOLERANCE: f64 = 0.5;

fn fixed_posterior(i_max: usize, n: f64, seed: u64) -> PosteriorSpec {
    let spectrum = OperatorSpectrum::volterra(i_max).unwrap();
    let truth = experiments::make_truth(&TruthSpec::Power { beta: 1.0 }, i_max).unwrap();
    let obs =
        experiments::simulate_data(&truth, &spectrum, n, &mut RngSeed::new(seed, 0).rng()).unwrap();
    posterior_spec(&obs, &spectrum, &PriorFamily::power_law(1.0).unwrap()).unwrap()
}

#[test]
fn eb_recovers_prior_regularity() {
    let i_max = 10_000;
    let n: f64 = 1e6;
    let spectrum = OperatorSpectrum::volterra(i_max).unwrap();
    let prior = PriorFamily::power_law(1.0).unwrap();
    let mut hits = 0;
    for seed in 1..=10u64 {
        let mut rng = RngSeed::new(seed, 99).rng();
        let y: Vec<f64> = (1..=i_max)
            .map(|i| {
                let theta = prior.variance(i).sqrt() * rng.sample::<f64, _>(StandardNormal);
                spectrum.kappa()[i - 1] * theta + rng.sample::<f64, _>(StandardNormal) / n.sqrt()
            })
            .collect();
        let obs = ObservationSequence::new(y, n).unwrap();
        let fit = eb_fit(
            &obs,
            &spectrum,
            PriorVariant::PowerLaw,
            SearchInterval::new(0.01, 10.0).unwrap(),
        )
        .unwrap();
        for g in &fit.grid {
            assert!(fit.log_likelihood >= g.log_likelihood);
        }
        if (fit.hyperparameter - 1.0).abs() <= EB_TOLERANCE {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10 seeds within {EB_TOLERANCE}");
}

#[test]
fn lawmu_acceptance_matches_brute_force() {
    let p = lawmu_acceptance_oracle(10_000, 100_000, 2024);
    assert!(p > 0.0);
    let se = (LAWMU_ACCEPTANCE * (1.0 - LAWMU_ACCEPTANCE) / 1e5).sqrt();
    assert!(
        (p - LAWMU_ACCEPTANCE).abs() < 4.0 * se,
        "oracle {p} vs {LAWMU_ACCEPTANCE}"
    );

    // the sampler's own attempt counts estimate the same probability
    let post = fixed_posterior(10_000, 1000.0, 5);
    let est = radius_precise(&post, 0.05, 20_000, RngSeed::new(5, 1)).unwrap();
    let ball = build_credible_ball(&post, &est, 1.0, 0.05).unwrap();
    let mut rng = RngSeed::new(5, 2).rng();
    let draws = 2000;
    let attempts: usize = (0..draws)
        .map(|_| {
            draw_lawmu(
                &ball.center,
                ball.radius,
                &ball,
                &mut rng,
                DEFAULT_LAWMU_ATTEMPTS,
            )
            .unwrap()
            .attempts
        })
        .sum();
    let rate = draws as f64 / attempts as f64;
    // geometric counts: relative error of the rate is about sqrt((1-p)/draws)
    let tol = 4.0 * LAWMU_ACCEPTANCE * ((1.0 - LAWMU_ACCEPTANCE) / draws as f64).sqrt();
    assert!((rate - LAWMU_ACCEPTANCE).abs() < tol, "sampler rate {rate}");
}

#[test]
fn lawmu_coordinates_are_symmetric() {
    let post = fixed_posterior(300, 1000.0, 8);
    let est = radius_precise(&post, 0.05, 20_000, RngSeed::new(8, 1)).unwrap();
    let ball = build_credible_ball(&post, &est, 1.0, 0.05).unwrap();
    let mut rng = RngSeed::new(8, 3).rng();
    let draws = 4000;
    let samples: Vec<CoefficientSequence> = (0..draws)
        .map(|_| {
            draw_lawmu(
                &ball.center,
                ball.radius,
                &ball,
                &mut rng,
                DEFAULT_LAWMU_ATTEMPTS,
            )
            .unwrap()
            .sample
        })
        .collect();
    for s in &samples {
        assert!(ball.contains(s));
    }
    let tol = 4.0 * (6.0 / draws as f64).sqrt();
    for k in [0, 1, 4, 50] {
        let d: Vec<f64> = samples
            .iter()
            .map(|s| s.values()[k] - ball.center.values()[k])
            .collect();
        let m2 = d.iter().map(|x| x * x).sum::<f64>() / draws as f64;
        let m3 = d.iter().map(|x| x * x * x).sum::<f64>() / draws as f64;
        let skew = m3 / m2.powf(1.5);
        assert!(skew.abs() < tol, "coordinate {k}: skewness {skew}");
    }
}

#[test]
fn sup_tube_does_not_grow_with_n() {
    let quantile = |n: f64| {
        let post = fixed_posterior(1000, n, 17);
        sup_tube_quantile(&post, 1000, 0.99, SUP_POINTS, RngSeed::new(17, 4)).unwrap()
    };
    let small = quantile(1e3);
    let large = quantile(1e6);
    assert!(large <= small, "{large} > {small}");
}

#[test]
fn builtin_radius_near_published_value() {
    let post = fixed_posterior(10_000, 1000.0, 21);
    let sd = post.sd();
    let mut rng = RngSeed::new(21, 5).rng();
    let radii: Vec<f64> = (0..2000)
        .map(|_| posterior_draw_radius(&post.mean, &sd, &mut rng))
        .collect();
    let est = radius_builtin(&radii, 0.05).unwrap();
    assert!(
        (est.value - 0.42).abs() <= 3.0 * est.std_error,
        "{} +- {}",
        est.value,
        est.std_error
    );
}

#[test]
fn posterior_draws_match_quantile_and_are_uncorrelated() {
    let post = fixed_posterior(2000, 1000.0, 23);
    let est = radius_precise(&post, 0.05, 100_000, RngSeed::new(23, 1)).unwrap();
    let ball = build_credible_ball(&post, &est, 1.0, 0.05).unwrap();
    let mut rng = RngSeed::new(23, 6).rng();
    let draws: Vec<CoefficientSequence> =
        (0..2000).map(|_| draw_posterior(&post, &mut rng)).collect();
    let inside = draws.iter().filter(|d| ball.contains(d)).count() as f64 / 2000.0;
    let tol = 3.0 * (0.95 * 0.05 / 2000.0f64).sqrt();
    assert!((inside - 0.95).abs() < tol, "inside fraction {inside}");

    let m = draws.len() as f64;
    for (a, b) in [(0, 1), (0, 2), (1, 5), (3, 40)] {
        let cov = draws
            .iter()
            .map(|d| (d.values()[a] - post.mean[a]) * (d.values()[b] - post.mean[b]))
            .sum::<f64>()
            / m;
        let se = (post.var[a] * post.var[b] / m).sqrt();
        assert!(cov.abs() < 4.0 * se, "cov({a},{b}) = {cov}, se {se}");
    }
}

#[test]
fn recentered_radii_match_independent_sampler() {
    // distribution check of the streamed recentered norm against a
    // straightforward generator: compare 0.5 and 0.95 quantiles
    let var = posterior_variances(
        &OperatorSpectrum::volterra(500).unwrap(),
        &PriorFamily::power_law(1.0).unwrap(),
        1000.0,
    );
    let m = 40_000;
    let mut ours = recentered_radii(&var, m, RngSeed::new(3, 0));
    let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(3);
    let mut theirs: Vec<f64> = (0..m)
        .map(|_| {
            var.iter()
                .map(|v| v * rng.sample::<f64, _>(StandardNormal).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    ours.sort_by(f64::total_cmp);
    theirs.sort_by(f64::total_cmp);
    for p in [0.5, 0.95] {
        let k = (p * m as f64) as usize;
        let se = stats::quantile_std_error(&theirs, p, theirs[k]);
        assert!(
            (ours[k] - theirs[k]).abs() < 5.0 * 2f64.sqrt() * se,
            "p = {p}"
        );
    }
}

#[test]
fn zero_truth_is_covered() {
    let reps = 40;
    let config = ExperimentConfig {
        n_values: vec![1e3, 1e6],
        repetitions: reps,
        truth: TruthSpec::Zero,
        hyper: HyperMode::EmpiricalBayes,
        i_max: 2000,
        m_precise: 20_000,
        seed: 31,
        ..ExperimentConfig::default()
    };
    let report = coverage_experiment(&config).unwrap();
    let floor = 0.95 - 3.0 * (0.95 * 0.05 / reps as f64).sqrt();
    for cell in &report.cells {
        assert!(cell.coverage >= floor, "n = {}: {}", cell.n, cell.coverage);
        assert!(cell.mean_radius > 0.0);
    }
}

#[test]
fn power_truth_coverage_does_not_degrade() {
    let config = ExperimentConfig {
        n_values: vec![1e3, 1e6],
        repetitions: 20,
        hyper: HyperMode::EmpiricalBayes,
        i_max: 2000,
        m_precise: 20_000,
        seed: 37,
        ..ExperimentConfig::default()
    };
    let report = coverage_experiment(&config).unwrap();
    let (lo, hi) = (&report.cells[0], &report.cells[1]);
    assert!(
        hi.coverage >= lo.coverage - 0.1,
        "{} vs {}",
        hi.coverage,
        lo.coverage
    );
    for c in &report.cells {
        assert!((0.0..=1.0).contains(&c.coverage));
    }
}

#[test]
fn many_draws_rarely_misclassify() {
    let config = ExperimentConfig {
        n_values: vec![1e3],
        draw_counts: vec![100_000],
        repetitions: 1,
        spectrum: SpectrumKind::Volterra,
        i_max: 2000,
        seed: 41,
        ..ExperimentConfig::default()
    };
    let report = fpfn_experiment(&config).unwrap();
    let r = &report.cells[0].reps[0];
    let frac = (r.fp + r.fn_count) as f64 / r.draws as f64;
    assert!(frac <= 0.01, "misclassified fraction {frac}");
    assert_eq!(
        r.draws - r.retained,
        r.draws - (0.95 * r.draws as f64).floor() as usize
    );
}
