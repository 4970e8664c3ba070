//! Coefficient sequences as functions on [0, 1] in the signal-side singular
//! basis of the Volterra operator, `e_i(x) = sqrt(2) cos((i - 1/2) pi x)`.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::model::{CoefficientSequence, PosteriorSpec};
use crate::samplers::{draw_gaussian_sequence, RngSeed};
use crate::stats;

pub const PLOT_POINTS: usize = 512;
pub const SUP_POINTS: usize = 2048;

/// Terms between exact re-evaluations of the rotation recurrence.
const ANCHOR_EVERY: usize = 32;

pub fn basis_eval(i: usize, x: f64) -> f64 {
    SQRT_2 * ((i as f64 - 0.5) * PI * x).cos()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionGrid {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

/// `points` equally spaced nodes from 0 to 1 inclusive.
pub fn uniform_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return invalid(format!("grid needs at least 2 points, got {points}"));
    }
    let last = (points - 1) as f64;
    Ok((0..points).map(|k| k as f64 / last).collect())
}

pub fn validate_grid(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return invalid("evaluation grid is empty");
    }
    if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return invalid("grid points must lie in [0, 1]");
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("grid points must be strictly increasing");
    }
    Ok(())
}

/// `f(x) = sum_i theta_i e_i(x)` on the grid.
pub fn reconstruct(theta: &CoefficientSequence, xs: &[f64]) -> Result<FunctionGrid> {
    validate_grid(xs)?;
    let coef = theta.values();
    let values = xs.iter().map(|&x| evaluate_series(coef, x)).collect();
    Ok(FunctionGrid {
        xs: xs.to_vec(),
        values,
    })
}

/// Sum of `coef[k] e_{k+1}(x)`. The angles `(k + 1/2) pi x` advance by
/// rotation through `pi x`, re-anchored with an exact cos/sin every
/// `ANCHOR_EVERY` terms to bound the recurrence drift.
fn evaluate_series(coef: &[f64], x: f64) -> f64 {
    let step = PI * x;
    let (sin_step, cos_step) = step.sin_cos();
    let mut acc = 0.0;
    let mut c = 0.0;
    let mut s = 0.0;
    for (k, &theta) in coef.iter().enumerate() {
        if k % ANCHOR_EVERY == 0 {
            let (sa, ca) = ((k as f64 + 0.5) * step).sin_cos();
            s = sa;
            c = ca;
        } else {
            let next_c = c * cos_step - s * sin_step;
            s = s * cos_step + c * sin_step;
            c = next_c;
        }
        acc += theta * c;
    }
    SQRT_2 * acc
}

/// Maximum absolute difference over a shared grid; a lower bound for the
/// true sup-norm distance.
pub fn sup_distance(a: &FunctionGrid, b: &FunctionGrid) -> Result<f64> {
    if a.xs != b.xs || a.values.len() != b.values.len() {
        return invalid("sup_distance needs identical grids");
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max))
}

/// Empirical `level`-quantile of `sup_x |f(x) - fhat(x)|` over `draws`
/// posterior draws `f`, with `fhat` the posterior-mean function, on a
/// uniform grid of `points` nodes.
pub fn sup_tube_quantile(
    post: &PosteriorSpec,
    draws: usize,
    level: f64,
    points: usize,
    seed: RngSeed,
) -> Result<f64> {
    if draws == 0 {
        return invalid("sup tube needs at least one draw");
    }
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("quantile level must lie in (0, 1), got {level}"));
    }
    let xs = uniform_grid(points)?;
    let mean = reconstruct(&post.mean_sequence(), &xs)?;
    let mut sups: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|j| {
            let mut rng = seed.child(j as u64).rng();
            let draw = draw_gaussian_sequence(&post.mean, &post.var, &mut rng)?;
            sup_distance(&reconstruct(&draw, &xs)?, &mean)
        })
        .collect::<Result<_>>()?;
    stats::sort_ascending(&mut sups);
    let k = ((level * draws as f64).ceil() as usize).clamp(1, draws);
    Ok(sups[k - 1])
}
