//! Data generators, Monte Carlo studies (contraction slope, test size and
//! power), and step-function approximation diagnostics.

use crate::conjugate::PriorSpec;
use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::inference::draw_projection_posterior;
use crate::isotonic::{ProjectionMetric, StepFunction};
use crate::metrics::{distance_to_monotone, ConeMetric, DesignMeasure};
use crate::rng;
use crate::testing::{test_adaptive, test_fixedj, TestConfig, TestMode};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Built-in truth library for simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TruthFn {
    /// f(x) = x.
    Linear,
    /// f(x) = x².
    Square,
    /// Monotone step function with three jumps.
    StepMonotone,
    /// f(x) = c.
    Constant(f64),
    /// f(x) = −x.
    NegLinear,
    /// Smooth non-monotone alternative f(x) = x + a·sin(2πkx).
    SineBump { amplitude: f64, cycles: usize },
    /// Discontinuous, non-Hölder alternative with a fixed down jump.
    NonSmooth,
    /// Arbitrary step function.
    Custom(StepFunction),
}

impl TruthFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TruthFn::Linear => x,
            TruthFn::Square => x * x,
            TruthFn::StepMonotone => {
                if x < 0.25 {
                    0.0
                } else if x < 0.5 {
                    0.4
                } else if x < 0.75 {
                    0.8
                } else {
                    1.2
                }
            }
            TruthFn::Constant(c) => *c,
            TruthFn::NegLinear => -x,
            TruthFn::SineBump { amplitude, cycles } => {
                x + amplitude * (2.0 * std::f64::consts::PI * *cycles as f64 * x).sin()
            }
            TruthFn::NonSmooth => {
                if x < 0.5 {
                    -1.0
                } else if x < 0.75 {
                    1.0
                } else {
                    -0.5
                }
            }
            TruthFn::Custom(f) => f.evaluate(x),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TruthFn::Linear => "linear".into(),
            TruthFn::Square => "square".into(),
            TruthFn::StepMonotone => "step_monotone".into(),
            TruthFn::Constant(c) => format!("constant({c})"),
            TruthFn::NegLinear => "neg_linear".into(),
            TruthFn::SineBump { amplitude, cycles } => {
                format!("sine_bump(a={amplitude},k={cycles})")
            }
            TruthFn::NonSmooth => "non_smooth".into(),
            TruthFn::Custom(_) => "custom".into(),
        }
    }

    pub fn is_monotone(&self) -> bool {
        match self {
            TruthFn::Linear | TruthFn::Square | TruthFn::StepMonotone | TruthFn::Constant(_) => {
                true
            }
            TruthFn::NegLinear | TruthFn::NonSmooth => false,
            TruthFn::SineBump { amplitude, cycles } => {
                // derivative 1 + a·2πk·cos(...) stays nonnegative iff |a|·2πk <= 1
                amplitude.abs() * 2.0 * std::f64::consts::PI * *cycles as f64 <= 1.0
            }
            TruthFn::Custom(f) => f.is_monotone(),
        }
    }

    /// Step-function discretization on `j` equispaced bins (bin midpoints).
    pub fn discretize(&self, j: usize) -> Result<StepFunction> {
        let part = Partition::equispaced(j)?;
        let heights = (0..j)
            .map(|k| self.eval((k as f64 + 0.5) / j as f64))
            .collect();
        StepFunction::new(part, heights)
    }

    /// L1 distance to the monotone cone under the uniform measure, computed
    /// on a fine discretization.
    pub fn distance_to_cone_l1(&self) -> Result<f64> {
        let f = self.discretize(1024)?;
        Ok(distance_to_monotone(&f, &DesignMeasure::Uniform, ConeMetric::L1)?.value)
    }

    /// Sine-bump alternative calibrated so its L1 distance to the monotone
    /// cone equals `separation` (bisection on the amplitude).
    pub fn sine_bump_at_separation(separation: f64, cycles: usize) -> Result<TruthFn> {
        if separation < 0.0 {
            return Err(Error::InvalidArgument("separation must be >= 0".into()));
        }
        if separation == 0.0 {
            return Ok(TruthFn::SineBump {
                amplitude: 0.0,
                cycles,
            });
        }
        let dist = |a: f64| -> Result<f64> {
            TruthFn::SineBump {
                amplitude: a,
                cycles,
            }
            .distance_to_cone_l1()
        };
        let mut hi = 1.0;
        let mut doublings = 0;
        while dist(hi)? < separation {
            hi *= 2.0;
            doublings += 1;
            if doublings > 32 {
                return Err(Error::InvalidArgument(format!(
                    "cannot reach separation {separation} with the sine-bump family"
                )));
            }
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if dist(mid)? < separation {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(TruthFn::SineBump {
            amplitude: 0.5 * (lo + hi),
            cycles,
        })
    }
}

/// Mean-zero error distribution with variance σ₀² (all sub-Gaussian).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ErrorDist {
    Normal { sigma0: f64 },
    /// ±σ₀ with equal probability.
    ScaledRademacher { sigma0: f64 },
    /// Uniform on (−√3·σ₀, √3·σ₀).
    Uniform { sigma0: f64 },
}

impl ErrorDist {
    pub fn sigma0(&self) -> f64 {
        match *self {
            ErrorDist::Normal { sigma0 }
            | ErrorDist::ScaledRademacher { sigma0 }
            | ErrorDist::Uniform { sigma0 } => sigma0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorDist::Normal { sigma0 } => {
                if sigma0 == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, sigma0).unwrap().sample(rng)
                }
            }
            ErrorDist::ScaledRademacher { sigma0 } => {
                if rng.gen::<bool>() {
                    sigma0
                } else {
                    -sigma0
                }
            }
            ErrorDist::Uniform { sigma0 } => {
                let half = 3.0f64.sqrt() * sigma0;
                rng.gen_range(-half..=half)
            }
        }
    }
}

/// Predictor design: fixed grid x_i = i/(n+1) or i.i.d. draws from G.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DesignSpec {
    FixedGrid,
    RandomG(DesignMeasure),
}

impl DesignSpec {
    fn sample_x<R: Rng + ?Sized>(&self, i: usize, n: usize, rng: &mut R) -> f64 {
        match self {
            DesignSpec::FixedGrid => (i + 1) as f64 / (n + 1) as f64,
            DesignSpec::RandomG(measure) => sample_from_measure(measure, rng),
        }
    }
}

fn sample_from_measure<R: Rng + ?Sized>(mu: &DesignMeasure, rng: &mut R) -> f64 {
    match mu {
        DesignMeasure::Uniform => rng.gen(),
        DesignMeasure::StepDensity { knots, densities } => {
            // inverse CDF over the piecewise-constant density
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (j, &d) in densities.iter().enumerate() {
                let width = knots[j + 1] - knots[j];
                let mass = d * width;
                if u <= acc + mass || j + 1 == densities.len() {
                    let frac = if mass > 0.0 { (u - acc) / mass } else { 0.0 };
                    return (knots[j] + frac.clamp(0.0, 1.0) * width).clamp(0.0, 1.0);
                }
                acc += mass;
            }
            1.0
        }
        DesignMeasure::EmpiricalWeights { partition, weights } => {
            // treated as a step density over the partition
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (j, &wj) in weights.as_slice().iter().enumerate() {
                if u <= acc + wj || j + 1 == partition.num_bins() {
                    let frac = if wj > 0.0 { (u - acc) / wj } else { 0.0 };
                    let a = partition.knots()[j];
                    return (a + frac.clamp(0.0, 1.0) * partition.bin_width(j)).clamp(0.0, 1.0);
                }
                acc += wj;
            }
            1.0
        }
    }
}

/// Configuration of a Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub truth: TruthFn,
    pub error_dist: ErrorDist,
    pub design: DesignSpec,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Optional uniform bound for monotone-class sweeps.
    pub k_bound: Option<f64>,
}

impl SimConfig {
    pub fn defaults(truth: TruthFn, seed: u64) -> Self {
        SimConfig {
            truth,
            error_dist: ErrorDist::Normal { sigma0: 0.5 },
            design: DesignSpec::FixedGrid,
            n_grid: vec![500, 1000, 2000, 4000, 8000],
            reps: 50,
            seed,
            k_bound: None,
        }
    }
}

/// Generates a dataset of size `n`: xs from the design, ys = f₀(x) + ε.
pub fn generate<R: Rng + ?Sized>(cfg: &SimConfig, n: usize, rng: &mut R) -> Result<Dataset> {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let x = cfg.design.sample_x(i, n, rng);
        xs.push(x);
        ys.push(cfg.truth.eval(x) + cfg.error_dist.sample(rng));
    }
    Dataset::new(xs, ys)
}

/// Prior family used by the studies; J scales with n automatically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorFamily {
    /// Equispaced knots, J = ⌈n^{1/3}⌉.
    Type1,
    /// Design-sampled knots, J = ⌈(n/log n)^{1/3}⌉.
    Type2,
    /// Poisson prior on J.
    Type3,
}

impl PriorFamily {
    pub fn prior_for(&self, n: usize) -> PriorSpec {
        match self {
            PriorFamily::Type1 => PriorSpec::type1_default(n),
            PriorFamily::Type2 => PriorSpec::type2_default(n),
            PriorFamily::Type3 => PriorSpec::type3_default(n),
        }
    }
}

/// Error metric recorded by the rate study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateMetric {
    /// (1/n) Σ |f̂(x_i) − f₀(x_i)|.
    L1Empirical,
    /// ∫ |f̂ − f₀| dx (uniform design measure).
    L1DesignG,
    /// Empirical Lp: ((1/n) Σ |Δ|^p)^{1/p} for p ≥ 1, power integral below 1.
    LpEmpirical(f64),
}

/// One sample-size cell of a rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub n: usize,
    /// Median over replications of the posterior-mean-curve error.
    pub median_error: f64,
    /// Interquartile range of the same.
    pub iqr: f64,
    /// Median over replications of the per-draw median error.
    pub median_draw_error: f64,
    #[serde(skip)]
    pub runtime_ms: f64,
}

/// Rate study output: per-n error summaries and the fitted log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub cells: Vec<RateCell>,
    pub slope: f64,
    pub slope_se: f64,
    pub metric: RateMetric,
}

fn curve_error(
    mean_heights: &[f64],
    part: &Partition,
    data: &Dataset,
    truth: &TruthFn,
    metric: RateMetric,
) -> f64 {
    match metric {
        RateMetric::L1Empirical => {
            let total: f64 = data
                .xs
                .iter()
                .map(|&x| (mean_heights[part.bin_index(x)] - truth.eval(x)).abs())
                .sum();
            total / data.n() as f64
        }
        RateMetric::LpEmpirical(p) => {
            let total: f64 = data
                .xs
                .iter()
                .map(|&x| {
                    (mean_heights[part.bin_index(x)] - truth.eval(x))
                        .abs()
                        .powf(p)
                })
                .sum();
            let avg = total / data.n() as f64;
            if p >= 1.0 {
                avg.powf(1.0 / p)
            } else {
                avg
            }
        }
        RateMetric::L1DesignG => {
            // midpoint rule on a fine grid; diagnostic metric only
            let m = 2048;
            (0..m)
                .map(|k| {
                    let x = (k as f64 + 0.5) / m as f64;
                    (mean_heights[part.bin_index(x)] - truth.eval(x)).abs()
                })
                .sum::<f64>()
                / m as f64
        }
    }
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn quartile_range(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    q(0.75) - q(0.25)
}

/// Runs the posterior-contraction rate study and fits the log-log slope of
/// the median error against n.
pub fn run_rate_study(
    cfg: &SimConfig,
    family: PriorFamily,
    metric: RateMetric,
    draws_per_rep: usize,
) -> Result<RateReport> {
    if cfg.n_grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "rate study needs at least 3 grid points".into(),
        ));
    }
    let span = *cfg.n_grid.iter().max().unwrap() as f64
        / *cfg.n_grid.iter().min().unwrap() as f64;
    if span < 8.0 {
        return Err(Error::InvalidArgument(
            "n_grid must span at least a factor of 8".into(),
        ));
    }
    if matches!(family, PriorFamily::Type3) {
        return Err(Error::InvalidArgument(
            "rate study needs a shared partition; use Type1 or Type2".into(),
        ));
    }

    let mut cells = Vec::with_capacity(cfg.n_grid.len());
    for (n_idx, &n) in cfg.n_grid.iter().enumerate() {
        let start = std::time::Instant::now();
        let results: Vec<(f64, f64)> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| -> Result<(f64, f64)> {
                let cell_seed =
                    rng::child_seed(cfg.seed, (n_idx * cfg.reps + rep) as u64);
                let mut data_rng = rng::task_rng(cell_seed, 0);
                let data = generate(cfg, n, &mut data_rng)?;
                let prior = family.prior_for(n);
                let samples = draw_projection_posterior(
                    &data,
                    &prior,
                    draws_per_rep,
                    ProjectionMetric::L2,
                    rng::child_seed(cell_seed, 1),
                )?;
                let part = samples[0].projected.partition.clone();
                let j = part.num_bins();
                // posterior mean curve on the shared partition
                let mut mean_heights = vec![0.0; j];
                for s in &samples {
                    for (m, &h) in mean_heights.iter_mut().zip(&s.projected.heights) {
                        *m += h;
                    }
                }
                for m in &mut mean_heights {
                    *m /= samples.len() as f64;
                }
                let mean_err = curve_error(&mean_heights, &part, &data, &cfg.truth, metric);
                let draw_errs: Vec<f64> = samples
                    .iter()
                    .map(|s| curve_error(&s.projected.heights, &part, &data, &cfg.truth, metric))
                    .collect();
                Ok((mean_err, median_of(draw_errs)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mean_errs: Vec<f64> = results.iter().map(|r| r.0).collect();
        let draw_errs: Vec<f64> = results.iter().map(|r| r.1).collect();
        cells.push(RateCell {
            n,
            median_error: median_of(mean_errs.clone()),
            iqr: quartile_range(mean_errs),
            median_draw_error: median_of(draw_errs),
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    let (slope, slope_se) = loglog_slope(&cells);
    Ok(RateReport {
        cells,
        slope,
        slope_se,
        metric,
    })
}

fn loglog_slope(cells: &[RateCell]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .map(|c| ((c.n as f64).ln(), c.median_error.max(1e-300).ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual_ss: f64 = pts
        .iter()
        .map(|p| {
            let fit = my + slope * (p.0 - mx);
            (p.1 - fit) * (p.1 - fit)
        })
        .sum();
    let se = if pts.len() > 2 {
        (residual_ss / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, se)
}

/// One cell of a size/power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub setting: String,
    pub n: usize,
    pub rejection_rate: f64,
    pub mc_se: f64,
}

/// Rejection frequencies of the monotonicity test per (truth, n) cell.
pub fn run_power_study(cfg: &SimConfig, test_cfg: &TestConfig) -> Result<Vec<PowerCell>> {
    if cfg.reps < 2 {
        return Err(Error::InvalidArgument("need at least 2 replications".into()));
    }
    let mut cells = Vec::with_capacity(cfg.n_grid.len());
    for (n_idx, &n) in cfg.n_grid.iter().enumerate() {
        let rejects: Vec<bool> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| -> Result<bool> {
                let cell_seed =
                    rng::child_seed(cfg.seed, (n_idx * cfg.reps + rep) as u64);
                let mut data_rng = rng::task_rng(cell_seed, 0);
                let data = generate(cfg, n, &mut data_rng)?;
                let result = match test_cfg.mode {
                    TestMode::FixedJL1 => {
                        let prior = PriorSpec::type1_default(n);
                        test_fixedj(&data, &prior, test_cfg, rng::child_seed(cell_seed, 1))?
                    }
                    TestMode::AdaptiveHellinger => {
                        let prior = PriorSpec::type3_default(n);
                        test_adaptive(&data, &prior, test_cfg, rng::child_seed(cell_seed, 1))?
                    }
                };
                Ok(result.reject)
            })
            .collect::<Result<Vec<_>>>()?;
        let rate = rejects.iter().filter(|&&r| r).count() as f64 / cfg.reps as f64;
        cells.push(PowerCell {
            setting: format!("{}/{:?}", cfg.truth.label(), test_cfg.mode),
            n,
            rejection_rate: rate,
            mc_se: (rate * (1.0 - rate) / cfg.reps as f64).sqrt(),
        });
    }
    Ok(cells)
}

// --- step-function approximation diagnostics --------------------------------

/// Row of the approximation table: p-th power integrals ∫|f₀−f_J|^p dH for
/// the equispaced bin-average construction and the free-knot (level-split)
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxRow {
    pub j: usize,
    pub equispaced_error: f64,
    pub free_knot_error: f64,
}

/// ∫_a^b f dx by composite Simpson; exact for cubics per subinterval.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = intervals.max(2) & !1; // even
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for k in 1..m {
        let x = a + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

/// ∫_a^b g dH where H is Uniform or a step density.
fn integrate_h<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, measure: &DesignMeasure) -> Result<f64> {
    match measure {
        DesignMeasure::Uniform => Ok(simpson(g, a, b, 256)),
        DesignMeasure::StepDensity { knots, densities } => {
            let mut acc = 0.0;
            for (j, &d) in densities.iter().enumerate() {
                let lo = knots[j].max(a);
                let hi = knots[j + 1].min(b);
                if hi > lo {
                    acc += d * simpson(g, lo, hi, 256);
                }
            }
            Ok(acc)
        }
        DesignMeasure::EmpiricalWeights { .. } => Err(Error::InvalidArgument(
            "approximation check needs a continuous measure".into(),
        )),
    }
}

/// Leftmost x in [lo, hi] with f0(x) >= level, by bisection (f0 monotone).
fn monotone_inverse(f0: &TruthFn, level: f64, mut lo: f64, mut hi: f64) -> f64 {
    if f0.eval(lo) >= level {
        return lo;
    }
    if f0.eval(hi) < level {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f0.eval(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// ∫_a^b |f0 − theta|^p dH, splitting at the monotone crossing f0 = theta so
/// each side is smooth.
fn bin_error(
    f0: &TruthFn,
    theta: f64,
    a: f64,
    b: f64,
    p: f64,
    measure: &DesignMeasure,
) -> Result<f64> {
    let c = monotone_inverse(f0, theta, a, b);
    let below = integrate_h(&|x| (theta - f0.eval(x)).max(0.0).powf(p), a, c, measure)?;
    let above = integrate_h(&|x| (f0.eval(x) - theta).max(0.0).powf(p), c, b, measure)?;
    Ok(below + above)
}

/// Step-approximation errors of a monotone truth for each J in `j_grid`.
pub fn approximation_check(
    f0: &TruthFn,
    j_grid: &[usize],
    p: f64,
    measure: &DesignMeasure,
) -> Result<Vec<ApproxRow>> {
    if !f0.is_monotone() {
        return Err(Error::NonMonotoneReference);
    }
    if p < 1.0 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(j_grid.len());
    for &j in j_grid {
        if j == 0 {
            return Err(Error::ZeroBins);
        }
        // (a) equispaced knots with per-bin H-averages
        let mut equi = 0.0;
        for k in 0..j {
            let a = k as f64 / j as f64;
            let b = (k + 1) as f64 / j as f64;
            let mass = integrate_h(&|_| 1.0, a, b, measure)?;
            let theta = if mass > 0.0 {
                integrate_h(&|x| f0.eval(x), a, b, measure)? / mass
            } else {
                f0.eval(0.5 * (a + b))
            };
            equi += bin_error(f0, theta, a, b, p, measure)?;
        }

        // (b) free knots by splitting the range of f0 into J equal levels,
        // heights at level midpoints; |f0 − f_J| <= range/(2J) pointwise
        let (f_lo, f_hi) = (f0.eval(0.0), f0.eval(1.0));
        let range = f_hi - f_lo;
        let mut free = 0.0;
        if range > 0.0 {
            let mut left = 0.0;
            for k in 0..j {
                let level_hi = f_lo + range * (k + 1) as f64 / j as f64;
                let right = if k + 1 == j {
                    1.0
                } else {
                    monotone_inverse(f0, level_hi, left, 1.0)
                };
                let theta = f_lo + range * (k as f64 + 0.5) / j as f64;
                if right > left {
                    free += bin_error(f0, theta, left, right, p, measure)?;
                }
                left = right;
            }
        }
        rows.push(ApproxRow {
            j,
            equispaced_error: equi,
            free_knot_error: free,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::bin_stats;
    use approx::assert_abs_diff_eq;

    #[test]
    fn generate_noiseless() {
        let cfg = SimConfig {
            truth: TruthFn::Square,
            error_dist: ErrorDist::Normal { sigma0: 0.0 },
            design: DesignSpec::FixedGrid,
            n_grid: vec![10],
            reps: 1,
            seed: 0,
            k_bound: None,
        };
        let d = generate(&cfg, 10, &mut crate::rng::master_rng(1)).unwrap();
        for (&x, &y) in d.xs.iter().zip(&d.ys) {
            assert_abs_diff_eq!(y, x * x, epsilon = 1e-15);
        }
    }

    #[test]
    fn fixed_grid_positions() {
        let cfg = SimConfig::defaults(TruthFn::Linear, 0);
        let d = generate(&cfg, 4, &mut crate::rng::master_rng(1)).unwrap();
        assert_eq!(d.xs, vec![0.2, 0.4, 0.6, 0.8]);
    }

    #[test]
    fn error_dist_moments() {
        let n = 100_000;
        for dist in [
            ErrorDist::Normal { sigma0: 0.7 },
            ErrorDist::ScaledRademacher { sigma0: 0.7 },
            ErrorDist::Uniform { sigma0: 0.7 },
        ] {
            let mut rng = crate::rng::master_rng(42);
            let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
            let s0 = dist.sigma0();
            assert!(
                mean.abs() < 4.0 * s0 / (n as f64).sqrt(),
                "{dist:?}: mean {mean}"
            );
            assert!(
                (var - s0 * s0).abs() / (s0 * s0) < 0.02,
                "{dist:?}: var {var}"
            );
        }
    }

    #[test]
    fn random_design_respects_density() {
        let mu = DesignMeasure::step_density(vec![0.0, 0.5, 1.0], vec![1.6, 0.4]).unwrap();
        let cfg = SimConfig {
            truth: TruthFn::Linear,
            error_dist: ErrorDist::Normal { sigma0: 0.0 },
            design: DesignSpec::RandomG(mu),
            n_grid: vec![1],
            reps: 1,
            seed: 0,
            k_bound: None,
        };
        let n = 50_000;
        let d = generate(&cfg, n, &mut crate::rng::master_rng(9)).unwrap();
        let left = d.xs.iter().filter(|&&x| x < 0.5).count() as f64 / n as f64;
        assert!((left - 0.8).abs() < 0.01, "left mass {left}");
    }

    #[test]
    fn condition_dd_max_count_ratio_halves() {
        // fixed grid with J = ceil(n^{1/3}): max_j N_j / n should halve when
        // n grows by 8x
        let ratio = |n: usize| -> f64 {
            let cfg = SimConfig::defaults(TruthFn::Linear, 0);
            let d = generate(&cfg, n, &mut crate::rng::master_rng(3)).unwrap();
            let part = Partition::equispaced(crate::conjugate::default_j(n)).unwrap();
            let stats = bin_stats(&d, &part);
            *stats.counts.iter().max().unwrap() as f64 / n as f64
        };
        let r1 = ratio(500);
        let r2 = ratio(4000);
        assert!(r2 <= r1 / 2.0 + 0.01, "ratios {r1} -> {r2}");
    }

    #[test]
    fn approximation_constant_truth_is_exact() {
        let rows = approximation_check(
            &TruthFn::Constant(0.3),
            &[1, 2, 8],
            1.0,
            &DesignMeasure::Uniform,
        )
        .unwrap();
        for r in rows {
            assert_abs_diff_eq!(r.equispaced_error, 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(r.free_knot_error, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn approximation_linear_truth_closed_forms() {
        let rows =
            approximation_check(&TruthFn::Linear, &[2, 4, 8, 16], 1.0, &DesignMeasure::Uniform)
                .unwrap();
        for r in &rows {
            // equispaced p=1 error for f0(x)=x is exactly 1/(4J)
            assert_abs_diff_eq!(r.equispaced_error, 1.0 / (4.0 * r.j as f64), epsilon = 1e-12);
        }
        let rows =
            approximation_check(&TruthFn::Linear, &[2, 4, 8, 16], 2.0, &DesignMeasure::Uniform)
                .unwrap();
        for r in &rows {
            // free-knot p=2 power integral is 1/(12J²) <= 1/J²
            let jf = r.j as f64;
            assert_abs_diff_eq!(r.free_knot_error, 1.0 / (12.0 * jf * jf), epsilon = 1e-12);
            assert!(r.free_knot_error <= 1.0 / (jf * jf));
        }
    }

    #[test]
    fn approximation_rejects_nonmonotone() {
        assert!(matches!(
            approximation_check(&TruthFn::NegLinear, &[2], 1.0, &DesignMeasure::Uniform),
            Err(Error::NonMonotoneReference)
        ));
    }

    #[test]
    fn approximation_bounds_hold_for_step_truth() {
        // Lemma-style bounds with K = sup|f0|: equispaced O(K^p/J),
        // free-knot O(K^p/J^p)
        let f0 = TruthFn::StepMonotone;
        let k = 1.2f64;
        for p in [1.0, 2.0] {
            let rows =
                approximation_check(&f0, &[2, 4, 8, 16], p, &DesignMeasure::Uniform).unwrap();
            for r in rows {
                let jf = r.j as f64;
                assert!(r.equispaced_error <= k.powf(p) / jf + 1e-9);
                assert!(r.free_knot_error <= k.powf(p) / jf.powf(p) + 1e-9);
            }
        }
    }

    #[test]
    fn sine_bump_separation_calibration() {
        let truth = TruthFn::sine_bump_at_separation(0.2, 1).unwrap();
        let d = truth.distance_to_cone_l1().unwrap();
        assert_abs_diff_eq!(d, 0.2, epsilon = 1e-6);
        let zero = TruthFn::sine_bump_at_separation(0.0, 1).unwrap();
        assert!(zero.is_monotone());
    }

    #[test]
    fn non_smooth_truth_has_fixed_cone_distance() {
        let d = TruthFn::NonSmooth.distance_to_cone_l1().unwrap();
        assert!(d > 0.1, "distance {d}");
    }

    #[test]
    fn rate_study_noiseless_slope_near_third() {
        // noiseless strictly increasing truth: errors are pure step
        // approximation, slope ~ -1/3 via J = ceil(n^{1/3})
        let cfg = SimConfig {
            truth: TruthFn::Linear,
            error_dist: ErrorDist::Normal { sigma0: 0.0 },
            design: DesignSpec::FixedGrid,
            n_grid: vec![500, 2000, 8000],
            reps: 3,
            seed: 5,
            k_bound: None,
        };
        let report = run_rate_study(&cfg, PriorFamily::Type1, RateMetric::L1Empirical, 50).unwrap();
        assert!(
            (report.slope + 1.0 / 3.0).abs() < 0.12,
            "slope {}",
            report.slope
        );
    }

    #[test]
    fn rate_study_input_validation() {
        let mut cfg = SimConfig::defaults(TruthFn::Linear, 0);
        cfg.n_grid = vec![100, 200];
        assert!(run_rate_study(&cfg, PriorFamily::Type1, RateMetric::L1Empirical, 10).is_err());
        cfg.n_grid = vec![100, 200, 400];
        assert!(run_rate_study(&cfg, PriorFamily::Type1, RateMetric::L1Empirical, 10).is_err());
    }
}
