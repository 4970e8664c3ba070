//! Empirical-Bayes credible balls for Gaussian sequence-space inverse
//! problems.
//!
//! The observation model is `Y_i = kappa_i theta_i + n^(-1/2) Z_i` with
//! `kappa_i` the singular values of the forward operator (the Volterra
//! integration operator by default). Coordinates carry independent Gaussian
//! priors whose regularity or scale is chosen by maximising the marginal
//! likelihood. The crate builds the resulting l^2 credible ball, estimates
//! its radius in two ways, samples inside it, and runs the simulation
//! studies exposed by the `ebcredible` binary.

pub mod cli;
pub mod credible_set;
mod error;
pub mod experiments;
pub mod function_space;
pub mod model;
pub mod samplers;
pub mod stats;

pub use credible_set::{
    build_credible_ball, radius_builtin, radius_precise, CredibleBall, RadiusEstimate, RadiusMethod,
};
pub use error::{Error, Result};
pub use model::{
    eb_fit, marginal_log_likelihood, posterior_spec, CoefficientSequence, ObservationSequence,
    OperatorSpectrum, PosteriorSpec, PriorFamily, PriorVariant, SearchInterval,
};
pub use samplers::RngSeed;
