//! Flag-value parsers shared by the subcommands.

use anyhow::anyhow;
use isoproj::{PriorSpec, RateMetric, SigmaMode, TestMode, TruthFn};

pub fn truth(s: &str) -> anyhow::Result<TruthFn> {
    if let Some(c) = s.strip_prefix("constant:") {
        let c: f64 = c.parse().map_err(|_| anyhow!("bad constant level {c:?}"))?;
        return Ok(TruthFn::Constant(c));
    }
    if let Some(rest) = s.strip_prefix("sine:") {
        let (a, k) = rest
            .split_once(',')
            .ok_or_else(|| anyhow!("sine truth needs <amplitude>,<cycles>"))?;
        return Ok(TruthFn::SineBump {
            amplitude: a.parse().map_err(|_| anyhow!("bad amplitude {a:?}"))?,
            cycles: k.parse().map_err(|_| anyhow!("bad cycle count {k:?}"))?,
        });
    }
    match s {
        "linear" => Ok(TruthFn::Linear),
        "square" => Ok(TruthFn::Square),
        "step" => Ok(TruthFn::StepMonotone),
        "neglinear" => Ok(TruthFn::NegLinear),
        "nonsmooth" => Ok(TruthFn::NonSmooth),
        other => Err(anyhow!(
            "unknown truth {other:?} (expected linear, square, step, constant:<c>, \
             neglinear, nonsmooth, or sine:<a>,<k>)"
        )),
    }
}

pub fn sigma_mode(s: &str) -> anyhow::Result<SigmaMode> {
    if s == "plugin" {
        return Ok(SigmaMode::PlugInMle);
    }
    if let Some(v) = s.strip_prefix("fixed:") {
        let v: f64 = v.parse().map_err(|_| anyhow!("bad fixed sigma {v:?}"))?;
        if v <= 0.0 {
            return Err(anyhow!("fixed sigma must be positive"));
        }
        return Ok(SigmaMode::Fixed(v));
    }
    if let Some(rest) = s.strip_prefix("ig:") {
        let (b1, b2) = rest
            .split_once(',')
            .ok_or_else(|| anyhow!("ig sigma needs <beta1>,<beta2>"))?;
        return Ok(SigmaMode::InverseGamma {
            beta1: b1.parse().map_err(|_| anyhow!("bad beta1 {b1:?}"))?,
            beta2: b2.parse().map_err(|_| anyhow!("bad beta2 {b2:?}"))?,
        });
    }
    Err(anyhow!(
        "unknown sigma mode {s:?} (expected plugin, fixed:<v>, or ig:<b1>,<b2>)"
    ))
}

pub fn prior_family(s: &str, n: usize) -> anyhow::Result<PriorSpec> {
    match s {
        "type1" => Ok(PriorSpec::type1_default(n)),
        "type2" => Ok(PriorSpec::type2_default(n)),
        "type3" => Ok(PriorSpec::type3_default(n)),
        other => Err(anyhow!("unknown prior {other:?} (expected type1, type2, or type3)")),
    }
}

pub fn test_mode(s: &str) -> anyhow::Result<TestMode> {
    match s {
        "fixedj" => Ok(TestMode::FixedJL1),
        "adaptive" => Ok(TestMode::AdaptiveHellinger),
        other => Err(anyhow!("unknown test mode {other:?} (expected fixedj or adaptive)")),
    }
}

pub fn rate_prior(s: &str) -> anyhow::Result<isoproj::PriorFamily> {
    match s {
        "type1" => Ok(isoproj::PriorFamily::Type1),
        "type2" => Ok(isoproj::PriorFamily::Type2),
        other => Err(anyhow!("rate studies support type1 or type2, not {other:?}")),
    }
}

pub fn rate_metric(s: &str) -> anyhow::Result<RateMetric> {
    if let Some(p) = s.strip_prefix("lp:") {
        let p: f64 = p.parse().map_err(|_| anyhow!("bad Lp exponent {p:?}"))?;
        return Ok(RateMetric::LpEmpirical(p));
    }
    match s {
        "l1emp" => Ok(RateMetric::L1Empirical),
        "l1design" => Ok(RateMetric::L1DesignG),
        other => Err(anyhow!(
            "unknown rate metric {other:?} (expected l1emp, l1design, or lp:<p>)"
        )),
    }
}

pub fn n_grid(s: &str) -> anyhow::Result<Vec<usize>> {
    let grid: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| anyhow!("bad n {t:?}")))
        .collect::<anyhow::Result<_>>()?;
    if grid.is_empty() {
        return Err(anyhow!("empty n grid"));
    }
    Ok(grid)
}

pub fn f64_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| anyhow!("bad value {t:?}")))
        .collect()
}
