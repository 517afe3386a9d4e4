//! Bayesian monotone regression via the projection-posterior.
//!
//! A conjugate normal prior on step-function heights gives a closed-form
//! posterior; monotonicity is imposed afterwards by projecting each posterior
//! draw onto the cone of nondecreasing functions (weighted isotonic
//! regression). The crate provides:
//!
//! - data ingestion, interval partitions, and bin statistics ([`data`]),
//! - conjugate posteriors, marginal likelihoods, and σ² handling ([`conjugate`]),
//! - weighted L1/L2 isotonic projections with a GCM cross-check ([`isotonic`]),
//! - Lp and Hellinger distances and distances to the monotone cone ([`metrics`]),
//! - the projection-posterior sampling pipeline ([`inference`]),
//! - two Bayesian monotonicity tests ([`testing`]),
//! - data generators and Monte Carlo studies ([`sim`]).
//!
//! All sampling takes explicit seeds; parallel loops derive per-task streams
//! so results are independent of worker count.

pub mod conjugate;
pub mod data;
pub mod error;
pub mod inference;
pub mod isotonic;
pub mod metrics;
pub mod rng;
pub mod sim;
pub mod testing;

pub use conjugate::{
    default_j, log_marginal_likelihood, marginal_mle_sigma2, posterior_over_j, posterior_params,
    sample_heights, sigma2_posterior, PosteriorState, PriorSpec, PriorType, SigmaMode,
    SigmaPosterior,
};
pub use data::{bin_stats, load_dataset, sample_knots_from_design, BinStats, Dataset, Partition};
pub use error::{Error, Result};
pub use inference::{
    draw_projection_posterior, inheritance_check, summarize, InheritanceReport, PosteriorSummary,
    ProjectionSample,
};
pub use isotonic::{
    gcm_left_derivative, isotonic_l1, pava_l2, project, ProjectionMetric, StepFunction,
    WeightVector,
};
pub use metrics::{
    distance_to_monotone, hellinger_distance, lp_distance, ConeMetric, DesignMeasure, Discrepancy,
    MetricTag,
};
pub use sim::{
    approximation_check, generate, run_power_study, run_rate_study, ApproxRow, DesignSpec,
    ErrorDist, PowerCell, PriorFamily, RateMetric, RateReport, SimConfig, TruthFn,
};
pub use testing::{
    calibrate_m0, separation_curve, test_adaptive, test_fixedj, SeparationPoint, TestConfig,
    TestMode, TestResult,
};
