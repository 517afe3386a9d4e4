//! Bayesian tests of monotonicity: the posterior mass near the monotone cone
//! is compared against a shrinking threshold.
//!
//! Two modes: a fixed-J test (L1 distance, threshold M_n·n^{−1/3}) and an
//! adaptive test that draws J from its posterior and uses the Hellinger
//! distance with threshold M₀·√(J·log n / n).

use crate::conjugate::{
    posterior_params, sample_one_with_sigma, sigma_grid_posterior, PriorSpec, PriorType,
};
use crate::data::{bin_stats, Dataset, Partition};
use crate::error::{Error, Result};
use crate::isotonic::StepFunction;
use crate::metrics::{distance_to_monotone, ConeMetric, DesignMeasure};
use crate::rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which monotonicity test to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMode {
    /// Fixed number of bins, L1 distance to the cone, threshold M_n·n^{−1/3}.
    FixedJL1,
    /// J drawn from its posterior, Hellinger distance with the drawn σ,
    /// threshold M₀·√(J·log n / n).
    AdaptiveHellinger,
}

/// Tuning of the monotonicity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub mode: TestMode,
    /// Rejection cutoff: reject when the near-cone posterior mass < gamma.
    pub gamma: f64,
    /// Fixed-J slack constant; defaults to log log(max(n, 27)).
    pub m_n: Option<f64>,
    /// Adaptive-test constant M₀ (see [`calibrate_m0`]).
    pub m0: f64,
    /// Monte Carlo posterior draws.
    pub sample_count: usize,
    /// Measure under which distances to the cone are taken.
    pub measure: DesignMeasure,
    /// Grid points for the bounded σ posterior of the adaptive test;
    /// below 2 the plug-in point estimate is used instead.
    pub sigma_grid_points: usize,
}

impl TestConfig {
    pub fn fixed_j() -> Self {
        TestConfig {
            mode: TestMode::FixedJL1,
            gamma: 0.5,
            m_n: None,
            m0: 1.0,
            sample_count: 500,
            measure: DesignMeasure::Uniform,
            sigma_grid_points: 0,
        }
    }

    pub fn adaptive() -> Self {
        TestConfig {
            mode: TestMode::AdaptiveHellinger,
            sigma_grid_points: 25,
            ..TestConfig::fixed_j()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument("gamma must lie in (0, 1)".into()));
        }
        if self.m0 <= 0.0 {
            return Err(Error::InvalidArgument("m0 must be positive".into()));
        }
        if let Some(m) = self.m_n {
            if m <= 0.0 {
                return Err(Error::InvalidArgument("m_n must be positive".into()));
            }
        }
        if self.sample_count == 0 {
            return Err(Error::InvalidArgument("sample_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Default fixed-J slack: log log(max(n, 27)), kept away from 0 for small n.
pub fn default_m_n(n: usize) -> f64 {
    (n.max(27) as f64).ln().ln()
}

/// Outcome of a monotonicity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Fraction of posterior draws within the threshold of the cone.
    pub posterior_prob_near_cone: f64,
    /// Distance threshold (for the adaptive test, evaluated at `j_used`).
    pub threshold_tau: f64,
    /// True when `posterior_prob_near_cone` < gamma.
    pub reject: bool,
    /// Monte Carlo standard error of the probability estimate.
    pub mc_se: f64,
    /// Fixed J, or the posterior-modal J for the adaptive test.
    pub j_used: usize,
    /// Adaptive test only: (J, posterior weight of J, near-cone fraction
    /// among draws with that J) for every J that received draws.
    pub per_j_breakdown: Option<Vec<(usize, f64, f64)>>,
}

fn finish(
    near: usize,
    count: usize,
    tau: f64,
    gamma: f64,
    j_used: usize,
    per_j: Option<Vec<(usize, f64, f64)>>,
) -> TestResult {
    let p = near as f64 / count as f64;
    TestResult {
        posterior_prob_near_cone: p,
        threshold_tau: tau,
        reject: p < gamma,
        mc_se: (p * (1.0 - p) / count as f64).sqrt(),
        j_used,
        per_j_breakdown: per_j,
    }
}

/// Fixed-J monotonicity test: equispaced bins, L1 distance to the cone under
/// `cfg.measure`, threshold M_n·n^{−1/3}.
pub fn test_fixedj(
    data: &Dataset,
    prior: &PriorSpec,
    cfg: &TestConfig,
    seed: u64,
) -> Result<TestResult> {
    cfg.validate()?;
    let j_bins = match prior.prior_type {
        PriorType::Type1 { j_bins } => j_bins,
        _ => return Err(Error::WrongPriorType { expected: "Type1" }),
    };
    let n = data.n();
    let part = Partition::equispaced(j_bins)?;
    let stats = bin_stats(data, &part);
    let state = posterior_params(data, &part, &stats, prior)?;
    let tau = cfg.m_n.unwrap_or_else(|| default_m_n(n)) * (n as f64).powf(-1.0 / 3.0);

    let hits: Vec<bool> = (0..cfg.sample_count)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let mut r = rng::task_rng(seed, i as u64);
            let (raw, _sigma2) = sample_one_with_sigma(&state, &mut r);
            let d = distance_to_monotone(&raw, &cfg.measure, ConeMetric::L1)?;
            Ok(d.value <= tau)
        })
        .collect::<Result<_>>()?;
    let near = hits.iter().filter(|&&h| h).count();
    Ok(finish(near, cfg.sample_count, tau, cfg.gamma, j_bins, None))
}

/// Per-draw (J, Hellinger distance to the cone, threshold ratio d/√(J·log n/n))
/// for the adaptive machinery. Shared by [`test_adaptive`] and [`calibrate_m0`].
type DrawStats = (Vec<f64>, Vec<(usize, f64, f64)>);

fn adaptive_draw_stats(
    data: &Dataset,
    prior: &PriorSpec,
    cfg: &TestConfig,
    seed: u64,
) -> Result<DrawStats> {
    let j_max = match prior.prior_type {
        PriorType::Type3 { j_max, .. } => j_max,
        _ => return Err(Error::WrongPriorType { expected: "Type3" }),
    };
    let n = data.n() as f64;
    let (j_weights, states) = crate::inference::adaptive_states(data, prior, j_max)?;

    // bounded σ posterior per J, on a grid around the reference estimate
    let grids: Option<Vec<(Vec<f64>, Vec<f64>)>> = if cfg.sigma_grid_points >= 2 {
        let center = crate::inference::sigma_reference(data, prior)?;
        let mut all = Vec::with_capacity(states.len());
        for (state, _) in &states {
            all.push(sigma_grid_posterior(
                data,
                &state.partition,
                prior,
                center,
                cfg.sigma_grid_points,
            )?);
        }
        Some(all)
    } else {
        None
    };

    let draws: Vec<(usize, f64, f64)> = (0..cfg.sample_count)
        .into_par_iter()
        .map(|i| -> Result<(usize, f64, f64)> {
            let mut r = rng::task_rng(seed, i as u64);
            let idx = crate::inference::sample_j_index(&j_weights, &mut r);
            let (state, _) = &states[idx];
            let (f, sigma) = match &grids {
                Some(all) => {
                    let (sigmas, probs) = &all[idx];
                    let u: f64 = r.gen();
                    let mut k = sigmas.len() - 1;
                    let mut acc = 0.0;
                    for (g, &p) in probs.iter().enumerate() {
                        acc += p;
                        if u <= acc {
                            k = g;
                            break;
                        }
                    }
                    let sigma = sigmas[k];
                    let heights: Vec<f64> = state
                        .post_means
                        .iter()
                        .zip(&state.post_vars_unit_sigma)
                        .map(|(&m, &v)| {
                            let z: f64 = StandardNormal.sample(&mut r);
                            m + z * (sigma * sigma * v).sqrt()
                        })
                        .collect();
                    (StepFunction::new(state.partition.clone(), heights)?, sigma)
                }
                None => {
                    let (f, sigma2) = sample_one_with_sigma(state, &mut r);
                    (f, sigma2.sqrt())
                }
            };
            let j = idx + 1;
            let d = distance_to_monotone(&f, &cfg.measure, ConeMetric::Hellinger { sigma })?;
            let scale = (j as f64 * n.ln() / n).sqrt();
            Ok((j, d.value, d.value / scale))
        })
        .collect::<Result<_>>()?;
    Ok((j_weights, draws))
}

/// Adaptive monotonicity test: J from its posterior, Hellinger distance with
/// the drawn σ, threshold M₀·√(J·log n / n).
pub fn test_adaptive(
    data: &Dataset,
    prior: &PriorSpec,
    cfg: &TestConfig,
    seed: u64,
) -> Result<TestResult> {
    cfg.validate()?;
    let (j_weights, draws) = adaptive_draw_stats(data, prior, cfg, seed)?;
    let n = data.n() as f64;

    let j_max = j_weights.len();
    let mut counts = vec![0usize; j_max + 1];
    let mut hits = vec![0usize; j_max + 1];
    let mut near = 0usize;
    for &(j, _d, ratio) in &draws {
        counts[j] += 1;
        if ratio <= cfg.m0 {
            hits[j] += 1;
            near += 1;
        }
    }
    let per_j: Vec<(usize, f64, f64)> = (1..=j_max)
        .filter(|&j| counts[j] > 0)
        .map(|j| (j, j_weights[j - 1], hits[j] as f64 / counts[j] as f64))
        .collect();
    let j_mode = per_j
        .iter()
        .max_by(|a, b| {
            (counts[a.0], a.0)
                .partial_cmp(&(counts[b.0], b.0))
                .unwrap()
        })
        .map(|t| t.0)
        .unwrap_or(1);
    let tau = cfg.m0 * (j_mode as f64 * n.ln() / n).sqrt();
    Ok(finish(
        near,
        cfg.sample_count,
        tau,
        cfg.gamma,
        j_mode,
        Some(per_j),
    ))
}

/// Calibrates M₀ on null (monotone-truth) pilot simulations: for each
/// replication, take the gamma-quantile of d_H/√(J·log n / n) across draws,
/// then return the 0.95 quantile over replications. With this M₀ the adaptive
/// test rejects at most ~5% of null datasets.
pub fn calibrate_m0(sim_cfg: &crate::sim::SimConfig, cfg: &TestConfig) -> Result<f64> {
    cfg.validate()?;
    if !sim_cfg.truth.is_monotone() {
        return Err(Error::NonMonotoneReference);
    }
    if sim_cfg.reps < 2 {
        return Err(Error::InvalidArgument("need at least 2 replications".into()));
    }
    let mut rep_quantiles = Vec::new();
    for (n_idx, &n) in sim_cfg.n_grid.iter().enumerate() {
        let per_n: Vec<f64> = (0..sim_cfg.reps)
            .into_par_iter()
            .map(|rep| -> Result<f64> {
                let cell_seed =
                    rng::child_seed(sim_cfg.seed, (n_idx * sim_cfg.reps + rep) as u64);
                let mut data_rng = rng::task_rng(cell_seed, 0);
                let data = crate::sim::generate(sim_cfg, n, &mut data_rng)?;
                let prior = PriorSpec::type3_default(n);
                let (_, draws) =
                    adaptive_draw_stats(&data, &prior, cfg, rng::child_seed(cell_seed, 1))?;
                let mut ratios: Vec<f64> = draws.iter().map(|d| d.2).collect();
                ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let pos = (cfg.gamma * (ratios.len() - 1) as f64).round() as usize;
                Ok(ratios[pos])
            })
            .collect::<Result<_>>()?;
        rep_quantiles.extend(per_n);
    }
    rep_quantiles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = (0.95 * (rep_quantiles.len() - 1) as f64).round() as usize;
    Ok(rep_quantiles[pos])
}

/// One point of a power-vs-separation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationPoint {
    pub separation: f64,
    pub power: f64,
    pub mc_se: f64,
}

/// Rejection frequency of the test against sine-bump alternatives whose L1
/// distance to the monotone cone equals each requested separation.
pub fn separation_curve(
    base: &crate::sim::SimConfig,
    n: usize,
    separations: &[f64],
    cfg: &TestConfig,
) -> Result<Vec<SeparationPoint>> {
    cfg.validate()?;
    if separations.is_empty() {
        return Err(Error::InvalidArgument("need at least one separation".into()));
    }
    let mut out = Vec::with_capacity(separations.len());
    for (k, &s) in separations.iter().enumerate() {
        let mut sim_cfg = base.clone();
        sim_cfg.truth = crate::sim::TruthFn::sine_bump_at_separation(s, 2)?;
        sim_cfg.n_grid = vec![n];
        sim_cfg.seed = rng::child_seed(base.seed, k as u64);
        let cells = crate::sim::run_power_study(&sim_cfg, cfg)?;
        out.push(SeparationPoint {
            separation: s,
            power: cells[0].rejection_rate,
            mc_se: cells[0].mc_se,
        });
    }
    Ok(out)
}
