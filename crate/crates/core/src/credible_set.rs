//! The l^2 credible ball around the posterior mean and the two estimators of
//! its radius: the order statistic of the posterior draws themselves, and a
//! separate large-sample estimate from the recentered posterior law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{squared_distance, CoefficientSequence, PosteriorSpec};
use crate::samplers::{recentered_sq_norm, RngSeed};
use crate::stats;

pub const DEFAULT_GAMMA: f64 = 0.05;
pub const DEFAULT_PRECISE_SAMPLES: usize = 100_000;

/// Draws per RNG substream in `radius_precise`. Fixed, so results do not
/// depend on the number of worker threads.
const PRECISE_BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMethod {
    BuiltinOrderStatistic,
    PreciseRecentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    pub value: f64,
    pub method: RadiusMethod,
    pub sample_size: usize,
    /// Monte Carlo standard error of the quantile.
    pub std_error: f64,
}

/// `{ theta : ||theta - center||_2 <= blowup * radius }`
#[derive(Debug, Clone, PartialEq)]
pub struct CredibleBall {
    pub center: CoefficientSequence,
    pub radius: f64,
    pub blowup: f64,
    pub gamma: f64,
}

impl CredibleBall {
    pub fn new(center: CoefficientSequence, radius: f64, blowup: f64, gamma: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return invalid(format!("ball radius must be finite and >= 0, got {radius}"));
        }
        if !(blowup.is_finite() && blowup > 0.0) {
            return invalid(format!("blow-up factor must be positive, got {blowup}"));
        }
        check_gamma(gamma)?;
        Ok(Self {
            center,
            radius,
            blowup,
            gamma,
        })
    }

    pub fn effective_radius(&self) -> f64 {
        self.blowup * self.radius
    }

    /// Membership by l^2 distance; coefficients past either truncation count as 0.
    pub fn contains(&self, theta: &CoefficientSequence) -> bool {
        let r = self.effective_radius();
        squared_distance(theta.values(), self.center.values()) <= r * r
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        invalid(format!("gamma must lie in (0, 1), got {gamma}"))
    }
}

/// The `floor((1 - gamma) N)`-th smallest of the given radii.
pub fn radius_builtin(radii: &[f64], gamma: f64) -> Result<RadiusEstimate> {
    check_gamma(gamma)?;
    if radii.is_empty() {
        return invalid("radius_builtin needs at least one radius");
    }
    if radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return invalid("radii must be finite and nonnegative");
    }
    let mut sorted = radii.to_vec();
    stats::sort_ascending(&mut sorted);
    Ok(estimate_from_sorted(
        &sorted,
        gamma,
        RadiusMethod::BuiltinOrderStatistic,
    ))
}

fn estimate_from_sorted(sorted: &[f64], gamma: f64, method: RadiusMethod) -> RadiusEstimate {
    let k = stats::order_statistic_index(sorted.len(), gamma);
    let value = stats::order_statistic(sorted, k);
    RadiusEstimate {
        value,
        method,
        sample_size: sorted.len(),
        std_error: stats::quantile_std_error(sorted, 1.0 - gamma, value),
    }
}

/// Bound on the standard deviation of the collapsed tail of `||zeta||^2`,
/// relative to `E ||zeta||^2`.
pub const TAIL_SD_RATIO: f64 = 1e-6;

/// Splits `var` into a sampled head and a tail replaced by its mean
/// `sum var_i`. The tail is the longest suffix whose contribution to
/// `||zeta||^2` has standard deviation `sqrt(2 sum var_i^2)` at most
/// `TAIL_SD_RATIO * sum(var)`. Returns (head length, tail mean).
pub fn split_tail(var: &[f64]) -> (usize, f64) {
    let total: f64 = var.iter().sum();
    let limit = 0.5 * (TAIL_SD_RATIO * total).powi(2);
    let mut fourth = 0.0;
    let mut mean = 0.0;
    let mut head = var.len();
    while head > 0 {
        let v = var[head - 1];
        if fourth + v * v > limit {
            break;
        }
        fourth += v * v;
        mean += v;
        head -= 1;
    }
    (head, mean)
}

/// `m` independent draws of `||zeta||_2`, `zeta_i ~ N(0, var_i)`, with the
/// negligible tail collapsed to its mean (see [`split_tail`]).
///
/// Draw `j` comes from substream `seed.child(j / 4096)`, so the output is
/// the same for any degree of parallelism.
pub fn recentered_radii(var: &[f64], m: usize, seed: RngSeed) -> Vec<f64> {
    let (head, tail) = split_tail(var);
    let sd: Vec<f64> = var[..head].iter().map(|v| v.sqrt()).collect();
    let blocks = m.div_ceil(PRECISE_BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = seed.child(b as u64).rng();
            let len = PRECISE_BLOCK.min(m - b * PRECISE_BLOCK);
            let sd = &sd;
            (0..len).map(move |_| (recentered_sq_norm(sd, &mut rng) + tail).sqrt())
        })
        .collect()
}

/// Radius from a separate large sample of the recentered posterior.
pub fn radius_precise(
    post: &PosteriorSpec,
    gamma: f64,
    m: usize,
    seed: RngSeed,
) -> Result<RadiusEstimate> {
    check_gamma(gamma)?;
    if m < 2 {
        return invalid(format!("radius_precise needs m >= 2, got {m}"));
    }
    let mut radii = recentered_radii(&post.var, m, seed);
    stats::sort_ascending(&mut radii);
    Ok(estimate_from_sorted(
        &radii,
        gamma,
        RadiusMethod::PreciseRecentered,
    ))
}

pub fn build_credible_ball(
    post: &PosteriorSpec,
    radius: &RadiusEstimate,
    blowup: f64,
    gamma: f64,
) -> Result<CredibleBall> {
    CredibleBall::new(
        CoefficientSequence::new(post.mean.clone())?,
        radius.value,
        blowup,
        gamma,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PriorFamily;
    use proptest::prelude::*;

    fn flat_posterior(var: Vec<f64>) -> PosteriorSpec {
        PosteriorSpec {
            mean: vec![0.0; var.len()],
            var,
            prior: PriorFamily::power_law(1.0).unwrap(),
            n: 1.0,
        }
    }

    #[test]
    fn builtin_constant_sample() {
        let est = radius_builtin(&[0.7; 40], 0.05).unwrap();
        assert_eq!(est.value, 0.7);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.method, RadiusMethod::BuiltinOrderStatistic);
    }

    #[test]
    fn builtin_one_to_hundred() {
        let radii: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        let est = radius_builtin(&radii, 0.05).unwrap();
        assert_eq!(est.value, 95.0);
        assert_eq!(est.sample_size, 100);
    }

    #[test]
    fn builtin_rejects_bad_input() {
        assert!(radius_builtin(&[], 0.05).is_err());
        assert!(radius_builtin(&[1.0], 0.0).is_err());
        assert!(radius_builtin(&[1.0], 1.0).is_err());
        assert!(radius_builtin(&[-1.0], 0.5).is_err());
    }

    #[test]
    fn precise_half_normal_quantile() {
        // P(|Z| <= q) = 0.95 at q = 1.959963984540054
        let post = flat_posterior(vec![1.0]);
        let est = radius_precise(&post, 0.05, 1_000_000, RngSeed::new(1, 0)).unwrap();
        assert!(
            (est.value - 1.959_963_984_540_054).abs() < 0.01,
            "{}",
            est.value
        );
        assert!(est.std_error > 0.0 && est.std_error < 0.01);
    }

    #[test]
    fn precise_degenerate_posterior() {
        let post = flat_posterior(vec![0.0; 10]);
        let est = radius_precise(&post, 0.05, 100, RngSeed::new(1, 0)).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
        assert!(radius_precise(&post, 0.05, 1, RngSeed::new(1, 0)).is_err());
    }

    #[test]
    fn precise_is_thread_count_independent() {
        let post = flat_posterior((1..=50).map(|i| 1.0 / (i as f64).powi(3)).collect());
        let seed = RngSeed::new(77, 3);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| recentered_radii(&post.var, 10_000, seed));
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| recentered_radii(&post.var, 10_000, seed));
        assert_eq!(single, multi);
    }

    #[test]
    fn tail_split_bounds() {
        let var: Vec<f64> = (1..=10_000).map(|i| 1.0 / (i as f64).powi(3)).collect();
        let (head, tail) = split_tail(&var);
        assert!(head < 2000 && head > 10, "{head}");
        let total: f64 = var.iter().sum();
        let sd = (2.0 * var[head..].iter().map(|v| v * v).sum::<f64>()).sqrt();
        assert!(sd <= TAIL_SD_RATIO * total);
        let next = var[head - 1];
        assert!((2.0 * (sd * sd / 2.0 + next * next)).sqrt() > TAIL_SD_RATIO * total);
        assert!((tail - var[head..].iter().sum::<f64>()).abs() < 1e-18);
        // flat variances leave nothing to collapse
        assert_eq!(split_tail(&[0.5; 20]), (20, 0.0));
        assert_eq!(split_tail(&[0.0; 4]), (0, 0.0));
    }

    #[test]
    fn precise_inflation_is_monotone() {
        let base: Vec<f64> = (1..=30).map(|i| 1.0 / (i as f64).powi(2)).collect();
        let inflated: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(k, v)| v * (1.0 + 0.1 * (k % 3) as f64))
            .collect();
        let seed = RngSeed::new(4, 4);
        let a = radius_precise(&flat_posterior(base), 0.05, 5000, seed).unwrap();
        let b = radius_precise(&flat_posterior(inflated), 0.05, 5000, seed).unwrap();
        assert!(b.value >= a.value);
    }

    #[test]
    fn ball_membership_examples() {
        let center = CoefficientSequence::zeros(3).unwrap();
        let theta = CoefficientSequence::new(vec![1.5]).unwrap();
        let unit = CredibleBall::new(center.clone(), 1.0, 1.0, 0.05).unwrap();
        assert!(!unit.contains(&theta));
        let doubled = CredibleBall::new(center.clone(), 1.0, 2.0, 0.05).unwrap();
        assert!(doubled.contains(&theta));
        let point = CredibleBall::new(center.clone(), 0.0, 1.0, 0.05).unwrap();
        assert!(point.contains(&center));
        assert!(!point.contains(&CoefficientSequence::new(vec![0.0, 0.0, 1e-100]).unwrap()));
        let blown = CredibleBall::new(center, 0.3, 2.0, 0.05).unwrap();
        assert!((blown.effective_radius() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ball_rejects_bad_parameters() {
        let c = CoefficientSequence::zeros(2).unwrap();
        assert!(CredibleBall::new(c.clone(), -1.0, 1.0, 0.05).is_err());
        assert!(CredibleBall::new(c.clone(), 1.0, 0.0, 0.05).is_err());
        assert!(CredibleBall::new(c, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn build_ball_assembles_from_posterior() {
        let mut post = flat_posterior(vec![1.0; 3]);
        post.mean = vec![0.1, 0.2, 0.3];
        let est = RadiusEstimate {
            value: 0.42,
            method: RadiusMethod::PreciseRecentered,
            sample_size: 10,
            std_error: 0.0,
        };
        let ball = build_credible_ball(&post, &est, 1.0, 0.05).unwrap();
        assert_eq!(ball.center.values(), &[0.1, 0.2, 0.3]);
        assert_eq!(ball.radius, 0.42);
        assert!(ball.contains(&ball.center));
    }

    proptest! {
        #[test]
        fn builtin_monotone_in_gamma(
            radii in prop::collection::vec(0.0f64..10.0, 1..200),
            g1 in 0.001f64..0.999,
            g2 in 0.001f64..0.999,
        ) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let a = radius_builtin(&radii, lo).unwrap().value;
            let b = radius_builtin(&radii, hi).unwrap().value;
            prop_assert!(b <= a);
        }

        #[test]
        fn contains_is_translation_invariant(
            center in prop::collection::vec(-1.0f64..1.0, 1..20),
            offset in prop::collection::vec(-1.0f64..1.0, 1..20),
            shift in prop::collection::vec(-5.0f64..5.0, 20),
            radius in 0.0f64..2.0,
        ) {
            let len = center.len().max(offset.len());
            let pad = |v: &[f64]| { let mut v = v.to_vec(); v.resize(len, 0.0); v };
            let c = pad(&center);
            let theta: Vec<f64> = c.iter().zip(pad(&offset)).map(|(a, b)| a + b).collect();
            let ball = CredibleBall::new(CoefficientSequence::new(c.clone()).unwrap(), radius, 1.0, 0.05).unwrap();
            let inside = ball.contains(&CoefficientSequence::new(theta.clone()).unwrap());

            // shift by a dyadic amount so the translation is exact in floating point
            let s: Vec<f64> = shift[..len].iter().map(|x| (x * 64.0).round() / 64.0).collect();
            let c2: Vec<f64> = c.iter().zip(&s).map(|(a, b)| a + b).collect();
            let t2: Vec<f64> = theta.iter().zip(&s).map(|(a, b)| a + b).collect();
            let d1 = squared_distance(&theta, &c);
            let d2 = squared_distance(&t2, &c2);
            // translation is exact up to rounding in the coordinates themselves
            if (d1.sqrt() - radius).abs() > 1e-9 {
                let ball2 = CredibleBall::new(CoefficientSequence::new(c2).unwrap(), radius, 1.0, 0.05).unwrap();
                prop_assert_eq!(inside, ball2.contains(&CoefficientSequence::new(t2).unwrap()));
                prop_assert!((d1 - d2).abs() < 1e-9);
            }
        }
    }
}
