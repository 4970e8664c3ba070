//! Seeded Gaussian draws: prior/posterior sequences, recentered radii and the
//! rejection sampler for a perturbed mean conditioned on the credible ball.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::credible_set::CredibleBall;
use crate::error::{invalid, Error, Result};
use crate::model::{CoefficientSequence, PosteriorSpec};

pub type SimRng = Xoshiro256PlusPlus;

/// `(seed, stream)` names one generator. Streams are derived by hashing, so
/// distinct streams are statistically independent and never share state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Substream `index` of this stream.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: mix64(mix64(self.stream ^ 0x6a09_e667_f3bc_c909).wrapping_add(index)),
        }
    }

    pub fn rng(&self) -> SimRng {
        let mut state = mix64(self.seed) ^ mix64(self.stream.wrapping_add(0xbb67_ae85_84ca_a73b));
        let mut bytes = [0u8; 32];
        for chunk in bytes.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        SimRng::from_seed(bytes)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    mix64(*state)
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent `N(means[k], vars[k])` coordinates.
pub fn draw_gaussian_sequence<R: Rng + ?Sized>(
    means: &[f64],
    vars: &[f64],
    rng: &mut R,
) -> Result<CoefficientSequence> {
    if means.len() != vars.len() {
        return invalid(format!(
            "means ({}) and variances ({}) differ in length",
            means.len(),
            vars.len()
        ));
    }
    if let Some(k) = vars
        .iter()
        .position(|v| v.is_nan() || *v < 0.0 || !v.is_finite())
    {
        return invalid(format!(
            "variance {} is negative or not finite: {}",
            k + 1,
            vars[k]
        ));
    }
    let values = means
        .iter()
        .zip(vars)
        .map(|(&m, &v)| {
            let z: f64 = rng.sample(StandardNormal);
            m + v.sqrt() * z
        })
        .collect();
    CoefficientSequence::new(values)
}

pub fn draw_posterior<R: Rng + ?Sized>(post: &PosteriorSpec, rng: &mut R) -> CoefficientSequence {
    draw_gaussian_sequence(&post.mean, &post.var, rng).expect("posterior variances are nonnegative")
}

/// `||theta - mean||_2` for a fresh posterior draw `theta = mean + sd * z`,
/// computed coordinate by coordinate without materialising the draw.
pub fn posterior_draw_radius<R: Rng + ?Sized>(mean: &[f64], sd: &[f64], rng: &mut R) -> f64 {
    let mut acc = 0.0;
    for (&m, &s) in mean.iter().zip(sd) {
        let z: f64 = rng.sample(StandardNormal);
        let d = (m + s * z) - m;
        acc += d * d;
    }
    acc.sqrt()
}

/// `||zeta||_2` with `zeta_k ~ N(0, sd[k]^2)` independent.
pub fn recentered_norm<R: Rng + ?Sized>(sd: &[f64], rng: &mut R) -> f64 {
    recentered_sq_norm(sd, rng).sqrt()
}

pub fn recentered_sq_norm<R: Rng + ?Sized>(sd: &[f64], rng: &mut R) -> f64 {
    let mut acc = 0.0;
    for &s in sd {
        let z: f64 = rng.sample(StandardNormal);
        let d = s * z;
        acc += d * d;
    }
    acc
}

/// Proposal scale `(k log^2(k+1))^(-1/2)` for coordinate `k >= 1`.
pub fn lawmu_scale(k: usize) -> f64 {
    let kf = k as f64;
    let l = (kf + 1.0).ln();
    1.0 / (kf * l * l).sqrt()
}

pub const DEFAULT_LAWMU_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LawmuDraw {
    pub sample: CoefficientSequence,
    /// Proposals generated, including the accepted one.
    pub attempts: usize,
}

/// Rejection sampler for `mu_k = center_k + a xi_k scale_k` conditioned on
/// `ball.contains(mu)`.
///
/// A proposal is abandoned as soon as its partial squared distance to the
/// ball center exceeds the squared effective radius.
pub fn draw_lawmu<R: Rng + ?Sized>(
    center: &CoefficientSequence,
    a: f64,
    ball: &CredibleBall,
    rng: &mut R,
    max_attempts: usize,
) -> Result<LawmuDraw> {
    if !(a.is_finite() && a > 0.0) {
        return invalid(format!("lawmu scale a must be positive, got {a}"));
    }
    if max_attempts == 0 {
        return invalid("lawmu max_attempts must be at least 1");
    }
    let scales: Vec<f64> = (1..=center.i_max()).map(lawmu_scale).collect();
    let c = center.values();
    let b = ball.center.values();
    let limit = {
        let r = ball.effective_radius();
        r * r
    };
    // squared norm of the ball center beyond the proposal's truncation
    let ball_tail: f64 = b.iter().skip(c.len()).map(|v| v * v).sum();

    let mut mu = vec![0.0; c.len()];
    for attempt in 1..=max_attempts {
        let mut acc = ball_tail;
        let mut rejected = false;
        for k in 0..c.len() {
            let xi: f64 = rng.sample(StandardNormal);
            mu[k] = c[k] + a * xi * scales[k];
            let d = mu[k] - b.get(k).copied().unwrap_or(0.0);
            acc += d * d;
            if acc > limit {
                rejected = true;
                break;
            }
        }
        if rejected {
            continue;
        }
        let sample = CoefficientSequence::new(mu.clone())?;
        if ball.contains(&sample) {
            return Ok(LawmuDraw {
                sample,
                attempts: attempt,
            });
        }
    }
    Err(Error::LawmuExhausted {
        attempts: max_attempts,
        scale: a,
        radius: ball.effective_radius(),
    })
}
