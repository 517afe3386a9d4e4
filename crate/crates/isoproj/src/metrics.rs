//! Distances between step functions and distances to the monotone cone.
//!
//! All integrals over step functions are closed-form sums over the common
//! refinement of the partitions involved; no quadrature on production paths.

use crate::error::{Error, Result};
use crate::isotonic::{isotonic_l1, pava_l2, StepFunction, WeightVector};
use serde::{Deserialize, Serialize};

/// Integration measure on [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DesignMeasure {
    /// Lebesgue measure on [0,1].
    Uniform,
    /// Piecewise-constant density over the given knots; integrates to 1.
    StepDensity { knots: Vec<f64>, densities: Vec<f64> },
    /// Per-bin point masses of an empirical design, spread uniformly within
    /// each bin of the associated partition.
    EmpiricalWeights {
        partition: crate::data::Partition,
        weights: WeightVector,
    },
}

impl DesignMeasure {
    /// Validated step-density measure.
    pub fn step_density(knots: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        let part = crate::data::Partition::from_knots(knots.clone())?;
        if densities.len() != part.num_bins() {
            return Err(Error::LengthMismatch {
                expected: part.num_bins(),
                got: densities.len(),
            });
        }
        if densities.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::InvalidArgument("densities must be nonnegative".into()));
        }
        let total: f64 = densities
            .iter()
            .enumerate()
            .map(|(j, &d)| d * part.bin_width(j))
            .sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "step density integrates to {total}, not 1"
            )));
        }
        Ok(DesignMeasure::StepDensity { knots, densities })
    }

    /// Whether the density is bounded away from zero (vacuously true for the
    /// uniform measure; false for empirical weights with empty bins).
    pub fn bounded_away_from_zero(&self) -> bool {
        match self {
            DesignMeasure::Uniform => true,
            DesignMeasure::StepDensity { densities, .. } => {
                densities.iter().all(|&d| d > 0.0)
            }
            DesignMeasure::EmpiricalWeights { weights, .. } => {
                weights.as_slice().iter().all(|&w| w > 0.0)
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            DesignMeasure::Uniform => vec![0.0, 1.0],
            DesignMeasure::StepDensity { knots, .. } => knots.clone(),
            DesignMeasure::EmpiricalWeights { partition, .. } => partition.knots().to_vec(),
        }
    }

    /// Density at an interior point of a refinement piece.
    fn density_at(&self, x: f64) -> f64 {
        match self {
            DesignMeasure::Uniform => 1.0,
            DesignMeasure::StepDensity { knots, densities } => {
                let j = piece_index(knots, x);
                densities[j]
            }
            DesignMeasure::EmpiricalWeights { partition, weights } => {
                let j = partition.bin_index(x);
                weights.as_slice()[j] / partition.bin_width(j)
            }
        }
    }

    /// Measure of each bin of `part`.
    pub fn bin_masses(&self, part: &crate::data::Partition) -> Vec<f64> {
        let mut masses = vec![0.0; part.num_bins()];
        for (a, b, mid) in refinement_pieces(&[part.knots().to_vec(), self.breakpoints()]) {
            masses[part.bin_index(mid)] += (b - a) * self.density_at(mid);
        }
        masses
    }
}

fn piece_index(knots: &[f64], x: f64) -> usize {
    match knots.binary_search_by(|k| k.partial_cmp(&x).unwrap()) {
        Ok(j) => j.min(knots.len() - 2),
        Err(j) => j - 1,
    }
}

/// Sorted, deduplicated union of breakpoint sets, returned as pieces
/// (left, right, midpoint).
fn refinement_pieces(knot_sets: &[Vec<f64>]) -> Vec<(f64, f64, f64)> {
    let mut cuts: Vec<f64> = knot_sets.iter().flatten().copied().collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts.windows(2)
        .map(|w| (w[0], w[1], 0.5 * (w[0] + w[1])))
        .collect()
}

/// Metric label carried on a computed discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MetricTag {
    Lp(f64),
    Hellinger,
}

/// Nonnegative distance value with the metric it was computed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub value: f64,
    pub metric_tag: MetricTag,
}

/// Lp distance between step functions under `mu`, exact on the common
/// refinement.
///
/// For p >= 1 this is the Lp norm of the difference; for 0 < p < 1 it is the
/// p-th power integral (no root).
pub fn lp_distance(
    f: &StepFunction,
    h: &StepFunction,
    mu: &DesignMeasure,
    p: f64,
) -> Result<Discrepancy> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "p must lie in (0, 2], got {p}"
        )));
    }
    let pieces = refinement_pieces(&[
        f.partition.knots().to_vec(),
        h.partition.knots().to_vec(),
        mu.breakpoints(),
    ]);
    let mut acc = 0.0;
    for (a, b, mid) in pieces {
        let diff = (f.evaluate(mid) - h.evaluate(mid)).abs();
        acc += (b - a) * mu.density_at(mid) * diff.powf(p);
    }
    let value = if p >= 1.0 { acc.powf(1.0 / p) } else { acc };
    Ok(Discrepancy {
        value,
        metric_tag: MetricTag::Lp(p),
    })
}

/// Hellinger distance between the data densities induced by two step
/// functions with normal errors.
///
/// The Bhattacharyya coefficient of N(f(x), σ_f²) and N(h(x), σ_h²) is
/// closed-form, so the squared distance is an exact sum over the common
/// refinement: H² = 1 − ∫ √(2σ_fσ_h/(σ_f²+σ_h²)) · exp(−(f−h)²/(4(σ_f²+σ_h²))) dμ.
pub fn hellinger_distance(
    f: &StepFunction,
    h: &StepFunction,
    sigma_f: f64,
    sigma_h: f64,
    mu: &DesignMeasure,
) -> Result<Discrepancy> {
    if sigma_f <= 0.0 || sigma_h <= 0.0 {
        return Err(Error::InvalidArgument("sigmas must be positive".into()));
    }
    if matches!(mu, DesignMeasure::EmpiricalWeights { .. }) {
        return Err(Error::HellingerEmpiricalMeasure);
    }
    let s2 = sigma_f * sigma_f + sigma_h * sigma_h;
    let scale = (2.0 * sigma_f * sigma_h / s2).sqrt();
    let pieces = refinement_pieces(&[
        f.partition.knots().to_vec(),
        h.partition.knots().to_vec(),
        mu.breakpoints(),
    ]);
    let mut bc = 0.0;
    for (a, b, mid) in pieces {
        let diff = f.evaluate(mid) - h.evaluate(mid);
        bc += (b - a) * mu.density_at(mid) * scale * (-diff * diff / (4.0 * s2)).exp();
    }
    let h2 = (1.0 - bc).max(0.0);
    Ok(Discrepancy {
        value: h2.sqrt(),
        metric_tag: MetricTag::Hellinger,
    })
}

/// Metric for the distance to the monotone cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConeMetric {
    L1,
    L2,
    /// Hellinger on induced densities with a common error scale; the
    /// reference point is the L2(μ) projection.
    Hellinger { sigma: f64 },
}

/// Distance from `f` to the monotone cone under `mu`.
///
/// For L1/L2 the reference point is the isotonic projection in the same
/// metric under μ's bin masses; zero exactly when `f` is monotone.
pub fn distance_to_monotone(
    f: &StepFunction,
    mu: &DesignMeasure,
    metric: ConeMetric,
) -> Result<Discrepancy> {
    if f.is_monotone() {
        return Ok(Discrepancy {
            value: 0.0,
            metric_tag: match metric {
                ConeMetric::L1 => MetricTag::Lp(1.0),
                ConeMetric::L2 => MetricTag::Lp(2.0),
                ConeMetric::Hellinger { .. } => MetricTag::Hellinger,
            },
        });
    }
    let weights = WeightVector::new(mu.bin_masses(&f.partition))?;
    match metric {
        ConeMetric::L1 => {
            let proj = StepFunction::new(f.partition.clone(), isotonic_l1(&f.heights, &weights)?)?;
            lp_distance(f, &proj, mu, 1.0)
        }
        ConeMetric::L2 => {
            let proj = StepFunction::new(f.partition.clone(), pava_l2(&f.heights, &weights)?)?;
            lp_distance(f, &proj, mu, 2.0)
        }
        ConeMetric::Hellinger { sigma } => {
            let proj = StepFunction::new(f.partition.clone(), pava_l2(&f.heights, &weights)?)?;
            hellinger_distance(f, &proj, sigma, sigma, mu)
        }
    }
}
