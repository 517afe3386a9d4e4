//! Closed-form conjugate posterior machinery for step-function regression.
//!
//! Posterior height laws, the marginal likelihood, the plug-in marginal MLE
//! of σ², the inverse-gamma posterior of σ², and the exact posterior over the
//! number of bins for the Poisson-J prior. All quadratic forms use the
//! Woodbury identity, so everything is O(n) in the sample size.

use crate::data::{bin_stats, BinStats, Dataset, Partition};
use crate::error::{Error, Result};
use crate::isotonic::StepFunction;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

/// Knot layout of the step-function prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriorType {
    /// Equispaced knots, fixed J.
    Type1 { j_bins: usize },
    /// Knots sampled without replacement from the design points, fixed J.
    Type2 { j_bins: usize },
    /// Equispaced knots with a Poisson prior on J, truncated at `j_max`.
    Type3 { poisson_mean: f64, j_max: usize },
}

/// Treatment of the error variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaMode {
    Fixed(f64),
    PlugInMle,
    InverseGamma { beta1: f64, beta2: f64 },
}

impl SigmaMode {
    fn name(&self) -> &'static str {
        match self {
            SigmaMode::Fixed(_) => "Fixed",
            SigmaMode::PlugInMle => "PlugInMLE",
            SigmaMode::InverseGamma { .. } => "InverseGamma",
        }
    }
}

/// Prior specification: knot layout, normal height prior, and σ² handling.
///
/// The height prior is θ_j | σ ~ N(ζ_j, σ²λ_j²). Scalar ζ and λ² broadcast
/// across bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub prior_type: PriorType,
    pub zeta: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub sigma_mode: SigmaMode,
}

impl PriorSpec {
    pub fn new(
        prior_type: PriorType,
        zeta: Vec<f64>,
        lambda2: Vec<f64>,
        sigma_mode: SigmaMode,
    ) -> Result<Self> {
        if lambda2.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
            return Err(Error::InvalidArgument(
                "prior variances lambda2 must be positive".into(),
            ));
        }
        if zeta.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidArgument("prior means must be finite".into()));
        }
        if let SigmaMode::InverseGamma { beta1, beta2 } = sigma_mode {
            if beta1 <= 2.0 || beta2 <= 0.0 {
                return Err(Error::InvalidArgument(
                    "inverse-gamma prior needs beta1 > 2 and beta2 > 0".into(),
                ));
            }
        }
        if let SigmaMode::Fixed(s) = sigma_mode {
            if s <= 0.0 {
                return Err(Error::InvalidArgument("fixed sigma must be positive".into()));
            }
        }
        if let PriorType::Type3 { poisson_mean, j_max } = prior_type {
            if poisson_mean <= 0.0 {
                return Err(Error::InvalidArgument("Poisson mean must be positive".into()));
            }
            if j_max < 1 {
                return Err(Error::InvalidArgument("J_max must be at least 1".into()));
            }
        }
        Ok(PriorSpec {
            prior_type,
            zeta,
            lambda2,
            sigma_mode,
        })
    }

    /// Default hyperparameters: ζ = 0, λ² = 1, equispaced knots with
    /// J = ⌈n^{1/3}⌉, plug-in σ².
    pub fn type1_default(n: usize) -> Self {
        PriorSpec {
            prior_type: PriorType::Type1 {
                j_bins: default_j(n),
            },
            zeta: vec![0.0],
            lambda2: vec![1.0],
            sigma_mode: SigmaMode::PlugInMle,
        }
    }

    /// Type 2 prior with J = ⌈(n/log n)^{1/3}⌉ design-sampled knots.
    pub fn type2_default(n: usize) -> Self {
        let nf = n as f64;
        let j = (nf / nf.ln().max(1.0)).powf(1.0 / 3.0).ceil().max(1.0) as usize;
        PriorSpec {
            prior_type: PriorType::Type2 { j_bins: j },
            zeta: vec![0.0],
            lambda2: vec![1.0],
            sigma_mode: SigmaMode::PlugInMle,
        }
    }

    /// Type 3 prior: Poisson(n^{1/3}) on J, truncated at
    /// ⌈(n/log n)^{1/2}⌉ (capped at 200), plug-in σ².
    pub fn type3_default(n: usize) -> Self {
        let nf = n as f64;
        let j_max = ((nf / nf.ln().max(1.0)).sqrt().ceil() as usize).clamp(1, 200);
        PriorSpec {
            prior_type: PriorType::Type3 {
                poisson_mean: nf.powf(1.0 / 3.0),
                j_max,
            },
            zeta: vec![0.0],
            lambda2: vec![1.0],
            sigma_mode: SigmaMode::PlugInMle,
        }
    }

    /// ζ_j for bin j (scalar broadcast).
    pub fn zeta_at(&self, j: usize) -> f64 {
        if self.zeta.len() == 1 {
            self.zeta[0]
        } else {
            self.zeta[j]
        }
    }

    /// λ_j² for bin j (scalar broadcast).
    pub fn lambda2_at(&self, j: usize) -> f64 {
        if self.lambda2.len() == 1 {
            self.lambda2[0]
        } else {
            self.lambda2[j]
        }
    }

    fn check_dims(&self, j_bins: usize) -> Result<()> {
        for v in [&self.zeta, &self.lambda2] {
            if v.len() != 1 && v.len() != j_bins {
                return Err(Error::LengthMismatch {
                    expected: j_bins,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// Default number of bins ⌈n^{1/3}⌉ for fixed-J priors.
pub fn default_j(n: usize) -> usize {
    (n as f64).powf(1.0 / 3.0).ceil().max(1.0) as usize
}

/// Resolved error-scale component of a posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaPosterior {
    /// σ fixed or plugged in.
    Point(f64),
    /// σ² ~ IG(a, b).
    InverseGamma { a: f64, b: f64 },
}

impl SigmaPosterior {
    /// Posterior mean of σ² (the point value itself in point mode).
    pub fn sigma2_mean(&self) -> f64 {
        match *self {
            SigmaPosterior::Point(s) => s * s,
            SigmaPosterior::InverseGamma { a, b } => b / (a - 1.0),
        }
    }

    /// Draws σ² (deterministic in point mode).
    pub fn sample_sigma2<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SigmaPosterior::Point(s) => s * s,
            SigmaPosterior::InverseGamma { a, b } => {
                let gamma = Gamma::new(a, 1.0 / b).expect("valid IG parameters");
                1.0 / gamma.sample(rng)
            }
        }
    }
}

/// Conjugate posterior of the step heights over a fixed partition.
///
/// post_vars_unit_sigma holds v_j = 1/(N_j + 1/λ_j²); the height law is
/// θ_j ~ N(m_j, σ² v_j) independently across bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    pub partition: Partition,
    pub post_means: Vec<f64>,
    pub post_vars_unit_sigma: Vec<f64>,
    pub sigma: SigmaPosterior,
}

/// Per-bin sums of the prior-centered responses: S_j = Σ_{i∈I_j} (y_i − ζ_j).
fn centered_bin_sums(data: &Dataset, part: &Partition, prior: &PriorSpec) -> Vec<f64> {
    let mut sums = vec![0.0; part.num_bins()];
    for (&x, &y) in data.xs.iter().zip(&data.ys) {
        let j = part.bin_index(x);
        sums[j] += y - prior.zeta_at(j);
    }
    sums
}

/// The Woodbury quadratic form (Y−Bζ)ᵀ(BΛBᵀ+I)⁻¹(Y−Bζ), computed in O(n) as
/// ‖q‖² − Σ_j S_j²/(N_j + 1/λ_j²).
fn quadratic_form(data: &Dataset, part: &Partition, prior: &PriorSpec) -> f64 {
    let stats = bin_stats(data, part);
    let sums = centered_bin_sums(data, part, prior);
    let mut q_norm2 = 0.0;
    for (&x, &y) in data.xs.iter().zip(&data.ys) {
        let j = part.bin_index(x);
        let q = y - prior.zeta_at(j);
        q_norm2 += q * q;
    }
    let correction: f64 = sums
        .iter()
        .enumerate()
        .map(|(j, &s)| s * s / (stats.counts[j] as f64 + 1.0 / prior.lambda2_at(j)))
        .sum();
    q_norm2 - correction
}

/// Marginal maximum-likelihood estimate of σ²:
/// n⁻¹ (Y−Bζ)ᵀ(BΛBᵀ+I)⁻¹(Y−Bζ).
pub fn marginal_mle_sigma2(data: &Dataset, part: &Partition, prior: &PriorSpec) -> Result<f64> {
    prior.check_dims(part.num_bins())?;
    Ok(quadratic_form(data, part, prior) / data.n() as f64)
}

/// Inverse-gamma posterior parameters (a, b) of σ² under the hierarchical
/// prior: a = β₁ + n/2, b = β₂ + q/2.
pub fn sigma2_posterior(data: &Dataset, part: &Partition, prior: &PriorSpec) -> Result<(f64, f64)> {
    prior.check_dims(part.num_bins())?;
    let (beta1, beta2) = match prior.sigma_mode {
        SigmaMode::InverseGamma { beta1, beta2 } => (beta1, beta2),
        other => {
            return Err(Error::WrongSigmaMode {
                expected: "InverseGamma",
                got: other.name(),
            })
        }
    };
    let q = quadratic_form(data, part, prior);
    Ok((beta1 + data.n() as f64 / 2.0, beta2 + q / 2.0))
}

/// Log marginal likelihood of the data: log N(Y; Bζ, σ²(BΛBᵀ+I)).
pub fn log_marginal_likelihood(
    data: &Dataset,
    part: &Partition,
    sigma: f64,
    prior: &PriorSpec,
) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    prior.check_dims(part.num_bins())?;
    let n = data.n() as f64;
    let stats = bin_stats(data, part);
    let log_det: f64 = (0..part.num_bins())
        .map(|j| (1.0 + stats.counts[j] as f64 * prior.lambda2_at(j)).ln())
        .sum();
    let q = quadratic_form(data, part, prior);
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - 0.5 * log_det
        - q / (2.0 * sigma * sigma))
}

/// Conjugate posterior parameters for the heights, with σ resolved per the
/// prior's sigma mode.
pub fn posterior_params(
    data: &Dataset,
    part: &Partition,
    stats: &BinStats,
    prior: &PriorSpec,
) -> Result<PosteriorState> {
    let j_bins = part.num_bins();
    if stats.num_bins() != j_bins {
        return Err(Error::LengthMismatch {
            expected: j_bins,
            got: stats.num_bins(),
        });
    }
    prior.check_dims(j_bins)?;

    let mut post_means = Vec::with_capacity(j_bins);
    let mut post_vars = Vec::with_capacity(j_bins);
    for j in 0..j_bins {
        let nj = stats.counts[j] as f64;
        let lam2 = prior.lambda2_at(j);
        let zeta = prior.zeta_at(j);
        let denom = nj + 1.0 / lam2;
        let ybar = stats.means[j].unwrap_or(0.0);
        post_means.push((nj * ybar + zeta / lam2) / denom);
        post_vars.push(1.0 / denom);
    }

    let sigma = match prior.sigma_mode {
        SigmaMode::Fixed(s) => SigmaPosterior::Point(s),
        SigmaMode::PlugInMle => {
            SigmaPosterior::Point(marginal_mle_sigma2(data, part, prior)?.sqrt())
        }
        SigmaMode::InverseGamma { .. } => {
            let (a, b) = sigma2_posterior(data, part, prior)?;
            SigmaPosterior::InverseGamma { a, b }
        }
    };

    Ok(PosteriorState {
        partition: part.clone(),
        post_means,
        post_vars_unit_sigma: post_vars,
        sigma,
    })
}

/// Exact posterior over J = 1..=J_max under the truncated-Poisson Type 3
/// prior, with equispaced partitions and log-sum-exp normalization.
pub fn posterior_over_j(data: &Dataset, prior: &PriorSpec, sigma: f64) -> Result<Vec<f64>> {
    let (poisson_mean, j_max) = match prior.prior_type {
        PriorType::Type3 { poisson_mean, j_max } => (poisson_mean, j_max),
        _ => return Err(Error::WrongPriorType { expected: "Type3" }),
    };
    let mut log_weights = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let part = Partition::equispaced(j)?;
        // log Poisson(j; mean) up to the additive constant −mean
        let log_prior =
            j as f64 * poisson_mean.ln() - (1..=j).map(|k| (k as f64).ln()).sum::<f64>();
        let log_lik = log_marginal_likelihood(data, &part, sigma, prior)?;
        log_weights.push(log_prior + log_lik);
    }
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::JPosteriorUnderflow);
    }
    let mut weights: Vec<f64> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Draws step functions from the conjugate posterior.
///
/// Each draw first samples σ² (a point mass unless the posterior is
/// inverse-gamma), then θ_j ~ N(m_j, σ²v_j) independently across bins.
pub fn sample_heights<R: Rng + ?Sized>(
    state: &PosteriorState,
    count: usize,
    rng: &mut R,
) -> Result<Vec<StepFunction>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(sample_one(state, rng));
    }
    Ok(out)
}

/// One posterior draw, returning the step function and the σ² used.
pub fn sample_one_with_sigma<R: Rng + ?Sized>(
    state: &PosteriorState,
    rng: &mut R,
) -> (StepFunction, f64) {
    let sigma2 = state.sigma.sample_sigma2(rng);
    let heights = state
        .post_means
        .iter()
        .zip(&state.post_vars_unit_sigma)
        .map(|(&m, &v)| {
            let z: f64 = StandardNormal.sample(rng);
            m + z * (sigma2 * v).sqrt()
        })
        .collect();
    (
        StepFunction::new(state.partition.clone(), heights).expect("dims match by construction"),
        sigma2,
    )
}

fn sample_one<R: Rng + ?Sized>(state: &PosteriorState, rng: &mut R) -> StepFunction {
    sample_one_with_sigma(state, rng).0
}

/// Grid posterior over σ on [center/3, 3·center], weighting each grid point
/// by the marginal likelihood. Used for the bounded-support σ prior of the
/// adaptive test.
pub fn sigma_grid_posterior(
    data: &Dataset,
    part: &Partition,
    prior: &PriorSpec,
    center: f64,
    points: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if center <= 0.0 || points < 1 {
        return Err(Error::InvalidArgument(
            "grid center must be positive and points >= 1".into(),
        ));
    }
    let lo = center / 3.0;
    let hi = 3.0 * center;
    let sigmas: Vec<f64> = (0..points)
        .map(|i| {
            if points == 1 {
                center
            } else {
                lo + (hi - lo) * i as f64 / (points - 1) as f64
            }
        })
        .collect();
    let log_w: Vec<f64> = sigmas
        .iter()
        .map(|&s| log_marginal_likelihood(data, part, s, prior))
        .collect::<Result<_>>()?;
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_w.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok((sigmas, probs))
}
